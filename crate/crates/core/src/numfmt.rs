//! `%g`-style formatting with a fixed number of significant digits.

/// Formats `x` with `sig` significant digits, trailing zeros removed, using
/// scientific notation when the decimal exponent is below -4 or at least
/// `sig`. Locale-independent.
///
/// ```
/// use delaypop::numfmt::fmt_sig;
///
/// assert_eq!(fmt_sig(8.0, 9), "8");
/// assert_eq!(fmt_sig(2.0 / 3.0, 6), "0.666667");
/// assert_eq!(fmt_sig(1.5e-9, 9), "1.5e-9");
/// ```
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Formats an optional value, empty when absent.
pub fn fmt_opt(x: Option<f64>, sig: usize) -> String {
    x.map(|v| fmt_sig(v, sig)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_and_scientific() {
        assert_eq!(fmt_sig(3.5, 9), "3.5");
        assert_eq!(fmt_sig(-0.25, 9), "-0.25");
        assert_eq!(fmt_sig(123456789.0, 9), "123456789");
        assert_eq!(fmt_sig(1234567890.0, 9), "1.23456789e9");
        assert_eq!(fmt_sig(0.0001, 9), "0.0001");
        assert_eq!(fmt_sig(0.00001234, 3), "1.23e-5");
        assert_eq!(fmt_sig(f64::INFINITY, 9), "inf");
    }

    #[test]
    fn rounding_carries_into_exponent() {
        assert_eq!(fmt_sig(9.9999999999, 9), "10");
        assert_eq!(fmt_sig(999999999.7, 9), "1e9");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [2.0 / 3.0, std::f64::consts::PI, 1e-300, 6.02214076e23, 0.1] {
            let s = fmt_sig(x, 17);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
