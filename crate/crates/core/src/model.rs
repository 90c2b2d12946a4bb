//! Growth-function families and their equilibria.
//!
//! A [`GrowthModel`] fixes the per-capita growth factor `F` of the recurrence
//! `A[n+1] = A[n] F(A[n-m])`. Two strictly decreasing families are supported:
//!
//! * bobwhite quail: `F(x) = alpha + beta / (1 + x^r)`
//! * Pielou: `F(x) = beta / (1 + lambda x)`
//!
//! Construction validates the parameter domain so that a unique positive
//! equilibrium `x_bar` with `F(x_bar) = 1` exists, and records the infimum
//! `alpha_inf` and supremum `c_sup` of `F` over `(0, inf)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Equilibrium residual every constructed model satisfies.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

const BISECT_RTOL: f64 = 1e-12;
const MAX_BRACKET_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha must lie in (0, 1) (got {0})")]
    AlphaOutOfRange(f64),
    #[error("alpha + beta must exceed 1 (got {0})")]
    NoPositiveEquilibrium(f64),
    #[error("r must be positive (got {0})")]
    NonPositiveExponent(f64),
    #[error("beta must exceed 1 (got {0})")]
    BetaTooSmall(f64),
    #[error("lambda must be positive (got {0})")]
    NonPositiveLambda(f64),
    #[error("beta must be positive (got {0})")]
    NonPositiveBeta(f64),
    #[error("F is defined on x > 0 only (got x = {0})")]
    NonPositiveArgument(f64),
    #[error("parameter {name} is not a finite number")]
    NotFinite { name: &'static str },
    #[error("no sign change of F(x) - 1 found on [{lo:e}, {hi:e}]")]
    BracketExpansion { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bobwhite,
    Pielou,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Bobwhite => "bobwhite",
            Family::Pielou => "pielou",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bobwhite" => Ok(Family::Bobwhite),
            "pielou" => Ok(Family::Pielou),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

/// Family-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Params {
    Bobwhite { alpha: f64, beta: f64, r: f64 },
    Pielou { beta: f64, lambda: f64 },
}

/// An immutable, validated growth-function instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthModel {
    params: Params,
    x_bar: f64,
    alpha_inf: f64,
    c_sup: f64,
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn finite(name: &'static str, v: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NotFinite { name })
    }
}

impl GrowthModel {
    /// Bobwhite quail model `F(x) = alpha + beta / (1 + x^r)`.
    ///
    /// Requires `0 < alpha < 1`, `alpha + beta > 1` and `r > 0`. The
    /// equilibrium is `((alpha + beta - 1) / (1 - alpha))^(1/r)`.
    ///
    /// ```
    /// use delaypop::model::GrowthModel;
    ///
    /// let model = GrowthModel::bobwhite(0.25, 1.0, 1.0).unwrap();
    /// assert!((model.x_bar() - 1.0 / 3.0).abs() < 1e-15);
    /// assert!(GrowthModel::bobwhite(1.2, 1.0, 1.0).is_err());
    /// ```
    pub fn bobwhite(alpha: f64, beta: f64, r: f64) -> Result<Self, ModelError> {
        let alpha = finite("alpha", alpha)?;
        let beta = finite("beta", beta)?;
        let r = finite("r", r)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ModelError::AlphaOutOfRange(alpha));
        }
        if beta <= 0.0 {
            return Err(ModelError::NonPositiveBeta(beta));
        }
        if alpha + beta <= 1.0 {
            return Err(ModelError::NoPositiveEquilibrium(alpha + beta));
        }
        if r <= 0.0 {
            return Err(ModelError::NonPositiveExponent(r));
        }
        let x_bar = ((alpha + beta - 1.0) / (1.0 - alpha)).powf(r.recip());
        Ok(GrowthModel {
            params: Params::Bobwhite { alpha, beta, r },
            x_bar,
            alpha_inf: alpha,
            c_sup: alpha + beta,
        })
    }

    /// Pielou model `F(x) = beta / (1 + lambda x)` with equilibrium
    /// `(beta - 1) / lambda`.
    ///
    /// The infimum of `F` is 0, so the lower persistence bound built from it
    /// is degenerate; see [`crate::analysis::persistence_envelope`].
    pub fn pielou(beta: f64, lambda: f64) -> Result<Self, ModelError> {
        let beta = finite("beta", beta)?;
        let lambda = finite("lambda", lambda)?;
        if beta <= 1.0 {
            return Err(ModelError::BetaTooSmall(beta));
        }
        if lambda <= 0.0 {
            return Err(ModelError::NonPositiveLambda(lambda));
        }
        Ok(GrowthModel {
            params: Params::Pielou { beta, lambda },
            x_bar: (beta - 1.0) / lambda,
            alpha_inf: 0.0,
            c_sup: beta,
        })
    }

    pub fn family(&self) -> Family {
        match self.params {
            Params::Bobwhite { .. } => Family::Bobwhite,
            Params::Pielou { .. } => Family::Pielou,
        }
    }

    pub fn params(&self) -> Params {
        self.params
    }

    /// Positive equilibrium, `F(x_bar) = 1`.
    pub fn x_bar(&self) -> f64 {
        self.x_bar
    }

    /// `inf F` over `(0, inf)`.
    pub fn alpha_inf(&self) -> f64 {
        self.alpha_inf
    }

    /// `sup F` over `(0, inf)`.
    pub fn c_sup(&self) -> f64 {
        self.c_sup
    }

    /// Evaluates `F(x)`, rejecting `x <= 0`.
    pub fn eval(&self, x: f64) -> Result<f64, ModelError> {
        if x > 0.0 {
            Ok(self.growth(x))
        } else {
            Err(ModelError::NonPositiveArgument(x))
        }
    }

    /// Unchecked `F(x)` for `x > 0`.
    #[inline]
    pub fn growth(&self, x: f64) -> f64 {
        match self.params {
            Params::Bobwhite { alpha, beta, r } => alpha + beta / (1.0 + x.powf(r)),
            Params::Pielou { beta, lambda } => beta / (1.0 + lambda * x),
        }
    }

    /// `ln F(exp(y))`, the increment of the log-population.
    #[inline]
    pub fn log_growth_at_log(&self, y: f64) -> f64 {
        match self.params {
            Params::Bobwhite { alpha, beta, r } => {
                // x^r = exp(r y) avoids a separate exp followed by powf
                (alpha + beta / (1.0 + (r * y).exp())).ln()
            }
            Params::Pielou { beta, lambda } => beta.ln() - softplus(lambda.ln() + y),
        }
    }

    /// Analytic derivative `F'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.params {
            Params::Bobwhite { beta, r, .. } => {
                let u = x.powf(r);
                -beta * r * u / (x * (1.0 + u) * (1.0 + u))
            }
            Params::Pielou { beta, lambda } => {
                let d = 1.0 + lambda * x;
                -beta * lambda / (d * d)
            }
        }
    }

    /// Log-log slope `|x F'(x) / F(x)| = |d ln F / d ln x|`.
    pub fn elasticity(&self, x: f64) -> f64 {
        match self.params {
            Params::Bobwhite { alpha, beta, r } => {
                let u = x.powf(r);
                beta * r * u / ((1.0 + u) * (alpha * (1.0 + u) + beta))
            }
            Params::Pielou { lambda, .. } => {
                let lx = lambda * x;
                lx / (1.0 + lx)
            }
        }
    }

    /// `lim F(x)` as `x -> 0+`.
    pub fn limit_at_zero(&self) -> f64 {
        match self.params {
            Params::Bobwhite { alpha, beta, .. } => alpha + beta,
            Params::Pielou { beta, .. } => beta,
        }
    }

    /// `lim F(x)` as `x -> inf`.
    pub fn limit_at_infinity(&self) -> f64 {
        match self.params {
            Params::Bobwhite { alpha, .. } => alpha,
            Params::Pielou { .. } => 0.0,
        }
    }

    /// `(alpha, beta, r, lambda)` with absent entries as `None`.
    pub fn param_columns(&self) -> [Option<f64>; 4] {
        match self.params {
            Params::Bobwhite { alpha, beta, r } => [Some(alpha), Some(beta), Some(r), None],
            Params::Pielou { beta, lambda } => [None, Some(beta), None, Some(lambda)],
        }
    }
}

impl fmt::Display for GrowthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params {
            Params::Bobwhite { alpha, beta, r } => {
                write!(f, "bobwhite(alpha={alpha}, beta={beta}, r={r})")
            }
            Params::Pielou { beta, lambda } => write!(f, "pielou(beta={beta}, lambda={lambda})"),
        }
    }
}

/// Root of `F(x) - 1` by bisection, independent of the closed-form `x_bar`.
///
/// Starts from `[1e-12, 1]` and doubles the upper end (halving the lower end
/// if needed) until `F(lo) > 1 > F(hi)`, then bisects to a relative width of
/// `1e-12`.
pub fn equilibrium_bisect(model: &GrowthModel) -> Result<f64, ModelError> {
    let g = |x: f64| model.growth(x) - 1.0;
    let (mut lo, mut hi) = (1e-12_f64, 1.0_f64);
    let mut steps = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(ModelError::BracketExpansion { lo, hi });
        }
    }
    steps = 0;
    while g(lo) < 0.0 {
        lo *= 0.5;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(ModelError::BracketExpansion { lo, hi });
        }
    }
    if g(hi) == 0.0 {
        return Ok(hi);
    }
    if g(lo) == 0.0 {
        return Ok(lo);
    }
    while hi - lo > BISECT_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn bobwhite_ratio_one_equilibrium() {
        let m = GrowthModel::bobwhite(0.5, 1.0, 2.0).unwrap();
        assert_eq!(m.x_bar(), 1.0);
        assert_eq!(m.alpha_inf(), 0.5);
        assert_eq!(m.c_sup(), 1.5);
        assert_eq!(m.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn bobwhite_third() {
        let m = GrowthModel::bobwhite(0.25, 1.0, 1.0).unwrap();
        assert!(rel(m.x_bar(), 1.0 / 3.0) < 1e-15);
    }

    #[test]
    fn bobwhite_domain_errors() {
        assert_eq!(
            GrowthModel::bobwhite(1.2, 1.0, 1.0),
            Err(ModelError::AlphaOutOfRange(1.2))
        );
        assert!(matches!(
            GrowthModel::bobwhite(0.5, 0.5, 1.0),
            Err(ModelError::NoPositiveEquilibrium(_))
        ));
        assert!(matches!(
            GrowthModel::bobwhite(0.5, 1.0, 0.0),
            Err(ModelError::NonPositiveExponent(_))
        ));
        assert!(matches!(
            GrowthModel::bobwhite(f64::NAN, 1.0, 1.0),
            Err(ModelError::NotFinite { name: "alpha" })
        ));
    }

    #[test]
    fn pielou_equilibria() {
        assert_eq!(GrowthModel::pielou(2.0, 1.0).unwrap().x_bar(), 1.0);
        let m = GrowthModel::pielou(3.0, 1.0).unwrap();
        assert_eq!(m.x_bar(), 2.0);
        assert_eq!(m.alpha_inf(), 0.0);
        assert_eq!(m.c_sup(), 3.0);
        assert_eq!(m.eval(2.0).unwrap(), 1.0);
        assert_eq!(m.eval(5.0).unwrap(), 0.5);
    }

    #[test]
    fn pielou_domain_errors() {
        let err = GrowthModel::pielou(1.0, 1.0).unwrap_err();
        assert_eq!(err, ModelError::BetaTooSmall(1.0));
        assert!(err.to_string().contains("beta must exceed 1"));
        assert!(matches!(
            GrowthModel::pielou(2.0, 0.0),
            Err(ModelError::NonPositiveLambda(_))
        ));
    }

    #[test]
    fn eval_rejects_non_positive() {
        let m = GrowthModel::pielou(2.0, 1.0).unwrap();
        assert!(m.eval(0.0).is_err());
        assert!(m.eval(-1.0).is_err());
    }

    #[test]
    fn bisection_matches_closed_forms() {
        for m in [
            GrowthModel::bobwhite(0.25, 1.0, 1.0).unwrap(),
            GrowthModel::pielou(3.0, 1.0).unwrap(),
            GrowthModel::bobwhite(0.5, 1.0, 7.0).unwrap(),
        ] {
            let root = equilibrium_bisect(&m).unwrap();
            assert!(rel(root, m.x_bar()) < 1e-10, "{m}: {root}");
        }
    }

    #[test]
    fn bisection_handles_tiny_equilibrium() {
        let m = GrowthModel::bobwhite(0.5, 0.51, 0.1).unwrap();
        assert!(m.x_bar() < 1e-12);
        let root = equilibrium_bisect(&m).unwrap();
        assert!(rel(root, m.x_bar()) < 1e-10);
    }

    #[test]
    fn log_growth_consistent_with_growth() {
        let b = GrowthModel::bobwhite(0.3, 1.4, 1.7).unwrap();
        let p = GrowthModel::pielou(2.5, 0.7).unwrap();
        for y in [-5.0, -0.3, 0.0, 0.9, 4.0] {
            for m in [b, p] {
                let direct = m.growth(f64::exp(y)).ln();
                assert!((m.log_growth_at_log(y) - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let b = GrowthModel::bobwhite(0.3, 1.4, 1.7).unwrap();
        let p = GrowthModel::pielou(2.5, 0.7).unwrap();
        for m in [b, p] {
            for x in [0.1, 1.0, 3.0] {
                let h = 1e-6 * x;
                let fd = (m.growth(x + h) - m.growth(x - h)) / (2.0 * h);
                assert!(rel(m.derivative(x), fd) < 1e-6);
                assert!(rel(m.elasticity(x), (x * m.derivative(x) / m.growth(x)).abs()) < 1e-12);
            }
        }
    }
}
