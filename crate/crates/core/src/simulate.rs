//! Orbit iteration in log coordinates and tail diagnostics.
//!
//! The recurrence `A[n+1] = A[n] F(A[n-m])` is advanced as
//! `ln A[n+1] = ln A[n] + ln F(A[n-m])`, so multiplicative excursions stay
//! representable and the stored values are exactly the quantities the
//! stability criteria are phrased in.
//!
//! Histories are ordered oldest first: `history[0] = A[-m]`, ...,
//! `history[m] = A[0]`.

use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::model::GrowthModel;
use crate::numfmt::fmt_sig;

/// An orbit is abandoned once `|ln A|` exceeds this bound.
pub const DIVERGENCE_LOG_BOUND: f64 = 700.0;

/// Number of equal windows the tail is split into.
pub const TAIL_WINDOWS: usize = 10;

/// Trailing windows used for the liminf/limsup estimates.
pub const ESTIMATE_WINDOWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("history must hold m + 1 = {expected} values (got {got})")]
    HistoryLength { expected: usize, got: usize },
    #[error("history value A[{index}] = {value} is not a positive finite number")]
    NonPositiveHistory { index: i64, value: f64 },
    #[error("orbit diverged at step {step} (|ln A| > {DIVERGENCE_LOG_BOUND})")]
    Divergent { step: usize },
    #[error("burn-in {burn_in} leaves no tail in {steps} steps")]
    BurnInTooLarge { burn_in: usize, steps: usize },
    #[error("tail of {len} steps is shorter than the required {required}")]
    TailTooShort { len: usize, required: usize },
    #[error("window {window} must be between 1 and the {steps} recorded steps")]
    BadWindow { window: usize, steps: usize },
}

/// Where and how an orbit left the representable range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    /// Step `n` whose value `A[n]` overflowed the guard; not stored.
    pub step: usize,
    pub log_value: f64,
}

/// A simulated orbit, stored as `ln A[n]` for `n = -m ..= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    m: usize,
    history: Vec<f64>,
    log_values: Vec<f64>,
    requested_steps: usize,
    divergence: Option<Divergence>,
}

impl OrbitTrace {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// `ln A[n]` for `n = -m ..= N`.
    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Number of recorded steps `N` (less than requested if divergent).
    pub fn steps(&self) -> usize {
        self.log_values.len() - (self.m + 1)
    }

    pub fn requested_steps(&self) -> usize {
        self.requested_steps
    }

    pub fn divergence(&self) -> Option<Divergence> {
        self.divergence
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence.is_some()
    }

    /// First stored index, `-m`.
    pub fn first_index(&self) -> i64 {
        -(self.m as i64)
    }

    /// `ln A[n]`, if recorded.
    pub fn log_at(&self, n: i64) -> Option<f64> {
        let k = n + self.m as i64;
        usize::try_from(k)
            .ok()
            .and_then(|k| self.log_values.get(k).copied())
    }

    pub fn value_at(&self, n: i64) -> Option<f64> {
        self.log_at(n).map(f64::exp)
    }

    /// `(n, ln A[n])` pairs in order.
    pub fn indexed(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let first = self.first_index();
        self.log_values
            .iter()
            .enumerate()
            .map(move |(k, &y)| (first + k as i64, y))
    }

    pub fn last_value(&self) -> f64 {
        self.log_values
            .last()
            .copied()
            .expect("non-empty trace")
            .exp()
    }

    /// Writes `n,A_n,log_A_n` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,A_n,log_A_n")?;
        for (n, y) in self.indexed() {
            writeln!(out, "{},{},{}", n, fmt_sig(y.exp(), 17), fmt_sig(y, 17))?;
        }
        out.flush()
    }
}

/// Iterates the delayed recurrence for `n_steps` steps.
///
/// A step whose log-value leaves `[-700, 700]` ends the orbit; the trace is
/// then truncated and [`OrbitTrace::divergence`] is set.
///
/// ```
/// use delaypop::model::GrowthModel;
/// use delaypop::simulate::iterate;
///
/// let pielou = GrowthModel::pielou(2.0, 1.0).unwrap();
/// let trace = iterate(&pielou, 1, &[2.0, 1.0], 2).unwrap();
/// assert!((trace.value_at(1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
/// assert!((trace.value_at(2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
/// ```
pub fn iterate(
    model: &GrowthModel,
    m: usize,
    history: &[f64],
    n_steps: usize,
) -> Result<OrbitTrace, SimError> {
    if n_steps == 0 {
        return Err(SimError::NoSteps);
    }
    if history.len() != m + 1 {
        return Err(SimError::HistoryLength {
            expected: m + 1,
            got: history.len(),
        });
    }
    let mut log_values = Vec::with_capacity(m + 1 + n_steps);
    for (i, &a) in history.iter().enumerate() {
        if !(a > 0.0 && a.is_finite()) {
            return Err(SimError::NonPositiveHistory {
                index: i as i64 - m as i64,
                value: a,
            });
        }
        log_values.push(a.ln());
    }

    let mut divergence = None;
    for step in 1..=n_steps {
        let len = log_values.len();
        // log_values[len - 1] is A[n], log_values[len - 1 - m] is A[n - m]
        let next = log_values[len - 1] + model.log_growth_at_log(log_values[len - 1 - m]);
        if !next.is_finite() || next.abs() > DIVERGENCE_LOG_BOUND {
            divergence = Some(Divergence {
                step,
                log_value: next,
            });
            break;
        }
        log_values.push(next);
    }

    Ok(OrbitTrace {
        m,
        history: history.to_vec(),
        log_values,
        requested_steps: n_steps,
        divergence,
    })
}

/// Largest `|ln A[n+1] - ln A[n] - ln F(A[n-m])|` over the recorded steps,
/// with `F` evaluated directly in the original coordinates.
pub fn recurrence_residual(model: &GrowthModel, trace: &OrbitTrace) -> f64 {
    let m = trace.m;
    trace
        .log_values
        .windows(m + 2)
        .map(|w| {
            let lagged = w[0].exp();
            (w[m + 1] - w[m] - model.growth(lagged).ln()).abs()
        })
        .fold(0.0, f64::max)
}

/// Empirical extrema over the post-burn-in tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStats {
    pub burn_in: usize,
    pub tail_len: usize,
    pub tail_min: f64,
    pub tail_max: f64,
    /// Minimum over the final three of ten tail windows.
    pub liminf_est: f64,
    /// Maximum over the final three of ten tail windows.
    pub limsup_est: f64,
    /// First index `n` of the region the estimates are taken over.
    pub estimate_from: i64,
    pub last_value: f64,
}

/// Tail extrema and windowed liminf/limsup estimates over `n > burn_in`.
pub fn tail_stats(trace: &OrbitTrace, burn_in: usize) -> Result<TailStats, SimError> {
    if let Some(d) = trace.divergence {
        return Err(SimError::Divergent { step: d.step });
    }
    let steps = trace.steps();
    if burn_in >= steps {
        return Err(SimError::BurnInTooLarge { burn_in, steps });
    }
    let len = steps - burn_in;
    let required = TAIL_WINDOWS * (trace.m + 1);
    if len < required {
        return Err(SimError::TailTooShort { len, required });
    }
    let tail = &trace.log_values[trace.log_values.len() - len..];
    let (lo, hi) = min_max(tail);
    let est_start = (TAIL_WINDOWS - ESTIMATE_WINDOWS) * len / TAIL_WINDOWS;
    let (est_lo, est_hi) = min_max(&tail[est_start..]);
    Ok(TailStats {
        burn_in,
        tail_len: len,
        tail_min: lo.exp(),
        tail_max: hi.exp(),
        liminf_est: est_lo.exp(),
        limsup_est: est_hi.exp(),
        estimate_from: (burn_in + 1 + est_start) as i64,
        last_value: trace.last_value(),
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    /// `max |ln(A[n] / x_bar)|` over the final window.
    pub achieved_tolerance: f64,
    pub steps_used: usize,
}

/// Converged iff every one of the last `window` recorded values lies within
/// `tol` of `x_bar` in log distance. Divergent orbits never converge.
pub fn detect_convergence(
    trace: &OrbitTrace,
    x_bar: f64,
    tol: f64,
    window: usize,
) -> Result<ConvergenceVerdict, SimError> {
    let steps = trace.steps();
    if window == 0 || window > steps {
        return Err(SimError::BadWindow { window, steps });
    }
    let ln_bar = x_bar.ln();
    let achieved = trace.log_values[trace.log_values.len() - window..]
        .iter()
        .map(|y| (y - ln_bar).abs())
        .fold(0.0, f64::max);
    let achieved_tolerance = if trace.is_divergent() {
        f64::INFINITY
    } else {
        achieved
    };
    Ok(ConvergenceVerdict {
        converged: achieved_tolerance <= tol,
        achieved_tolerance,
        steps_used: steps,
    })
}

/// Upward crossings of the equilibrium and per-cycle peak amplitudes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Oscillation {
    /// Indices `t` with `A[t] <= x_bar < A[t+1]`.
    pub crossings: Vec<i64>,
    /// `max |ln(A[t] / x_bar)|` for `t` between consecutive crossings,
    /// both ends included; one entry per pair of crossings.
    pub peaks: Vec<f64>,
}

impl Oscillation {
    pub fn crossings_from(&self, n: i64) -> usize {
        self.crossings.iter().filter(|&&t| t >= n).count()
    }
}

pub fn detect_oscillation(trace: &OrbitTrace, x_bar: f64) -> Oscillation {
    let ln_bar = x_bar.ln();
    let first = trace.first_index();
    let dev: Vec<f64> = trace.log_values.iter().map(|y| y - ln_bar).collect();
    let crossing_pos: Vec<usize> = dev
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] <= 0.0 && w[1] > 0.0)
        .map(|(k, _)| k)
        .collect();
    let peaks = crossing_pos
        .windows(2)
        .map(|p| dev[p[0]..=p[1]].iter().map(|d| d.abs()).fold(0.0, f64::max))
        .collect();
    Oscillation {
        crossings: crossing_pos.iter().map(|&k| first + k as i64).collect(),
        peaks,
    }
}

/// `count` histories of `m + 1` values drawn log-uniformly from
/// `[x_bar / 4, 4 x_bar]`.
pub fn random_histories<R: Rng + ?Sized>(
    x_bar: f64,
    m: usize,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let spread = 4.0_f64.ln();
    (0..count)
        .map(|_| {
            (0..=m)
                .map(|_| x_bar * rng.gen_range(-spread..=spread).exp())
                .collect()
        })
        .collect()
}
