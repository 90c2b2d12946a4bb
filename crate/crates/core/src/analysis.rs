//! Persistence and global-attractivity criteria.
//!
//! Everything here is a pure function of a [`GrowthModel`] and the delay `m`:
//!
//! * the boundedness / limit hypotheses on `F`,
//! * the persistence envelope `(x_bar alpha^(m+1), x_bar c^(m+1))`,
//! * the log-Lipschitz constant `L` in `|ln F(x)| <= L |ln(x / x_bar)|`,
//!   both in closed form and estimated on a grid,
//! * the 3/2-condition `(m + 3/2) L < 3/2` and its contraction factor,
//! * the two classical bobwhite bounds on `r`.
//!
//! [`classify`] gathers all of them, plus optional simulation evidence, into
//! a [`StabilityReport`]. Every inequality is strict; equality fails.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{GrowthModel, ModelError, Params};
use crate::numfmt::{fmt_opt, fmt_sig};
use crate::simulate::{
    self, detect_convergence, iterate, tail_stats, ConvergenceVerdict, Divergence, Oscillation,
    SimError, TailStats,
};

/// Smallest grid accepted by [`estimate_log_lipschitz`].
pub const MIN_GRID_SIZE: usize = 1_000;
pub const DEFAULT_GRID_SIZE: usize = 100_000;

/// Lower end of the estimator grid, relative to `x_bar`.
pub const GRID_LOWER_FACTOR: f64 = 1e-9;
/// Relative neighbourhood of `x_bar` left out of the secant ratio.
pub const SECANT_EXCLUSION: f64 = 1e-6;
/// Relative step of the central difference for the slope at `x_bar`.
pub const LOCAL_FD_STEP: f64 = 1e-6;

/// Significant digits used in report output.
pub const REPORT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("grid size {0} is below the minimum of {MIN_GRID_SIZE}")]
    GridTooSmall(usize),
    #[error("log-Lipschitz ratio is not finite at x = {x:e}")]
    NonFiniteRatio { x: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

/// One hypothesis on `F`, decided analytically and corroborated by sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// The analytic bound or limit the verdict rests on.
    pub analytic: f64,
    /// The matching sampled quantity on `[1e-8, 1e8]`.
    pub sampled: f64,
    /// Whether the sampled quantity agrees with the verdict.
    pub corroborated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypotheses {
    /// `0 < F(x) <= c < inf`.
    pub bounded: HypothesisCheck,
    /// `limsup F(x) < 1` as `x -> inf`.
    pub below_one_at_infinity: HypothesisCheck,
    /// `liminf F(x) > 1` as `x -> 0+`.
    pub above_one_at_zero: HypothesisCheck,
}

impl Hypotheses {
    pub fn all_hold(&self) -> bool {
        self.bounded.holds && self.below_one_at_infinity.holds && self.above_one_at_zero.holds
    }
}

const HYPOTHESIS_SAMPLES: usize = 1_000;

pub fn check_hypotheses(model: &GrowthModel) -> Hypotheses {
    let grid = log_grid(1e-8, 1e8, HYPOTHESIS_SAMPLES - 1);
    let values: Vec<f64> = grid.iter().map(|&x| model.growth(x)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at_top = *values.last().expect("samples");
    let at_bottom = values[0];

    let c = model.c_sup();
    let bounded_holds = c.is_finite() && c > 0.0;
    let inf_limit = model.limit_at_infinity();
    let zero_limit = model.limit_at_zero();
    Hypotheses {
        bounded: HypothesisCheck {
            holds: bounded_holds,
            analytic: c,
            sampled: max,
            corroborated: (min > 0.0 && max <= c) == bounded_holds,
        },
        below_one_at_infinity: HypothesisCheck {
            holds: inf_limit < 1.0,
            analytic: inf_limit,
            sampled: at_top,
            corroborated: (at_top < 1.0) == (inf_limit < 1.0),
        },
        above_one_at_zero: HypothesisCheck {
            holds: zero_limit > 1.0,
            analytic: zero_limit,
            sampled: at_bottom,
            corroborated: (at_bottom > 1.0) == (zero_limit > 1.0),
        },
    }
}

/// `0 < alpha < 1 = F(x_bar) < c < inf`.
pub fn strict_bounds(model: &GrowthModel) -> bool {
    let (a, c) = (model.alpha_inf(), model.c_sup());
    0.0 < a && a < 1.0 && 1.0 < c && c.is_finite()
}

/// Bounds trapping `liminf A` and `limsup A`. `lower` is `None` when
/// `inf F = 0` makes it inapplicable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub lower: Option<f64>,
    pub upper: f64,
}

impl Envelope {
    /// Strict containment of `[min, max]`.
    pub fn contains(&self, min: f64, max: f64) -> bool {
        let above = match self.lower {
            Some(lo) => min > lo,
            None => min > 0.0,
        };
        above && max < self.upper
    }
}

/// `(x_bar alpha^(m+1), x_bar c^(m+1))`.
///
/// ```
/// use delaypop::analysis::persistence_envelope;
/// use delaypop::model::GrowthModel;
///
/// let bob = GrowthModel::bobwhite(0.5, 1.0, 2.0).unwrap();
/// let env = persistence_envelope(&bob, 1);
/// assert_eq!((env.lower, env.upper), (Some(0.25), 2.25));
///
/// let pielou = GrowthModel::pielou(3.0, 1.0).unwrap();
/// assert_eq!(persistence_envelope(&pielou, 1).lower, None);
/// ```
pub fn persistence_envelope(model: &GrowthModel, m: usize) -> Envelope {
    let k = (m + 1) as i32;
    let x_bar = model.x_bar();
    let lower = (model.alpha_inf() > 0.0).then(|| x_bar * model.alpha_inf().powi(k));
    Envelope {
        lower,
        upper: x_bar * model.c_sup().powi(k),
    }
}

/// Grid estimate of the log-Lipschitz constant on `(0, x_bar c^(m+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    /// `max(slope_sup, l_local, l_secant)`.
    pub l_hat: f64,
    /// Grid supremum of the log-log slope `|x F'(x) / F(x)|`.
    pub slope_sup: f64,
    /// `x_bar |F'(x_bar)|` by central difference.
    pub l_local: f64,
    /// Grid supremum of `|ln F(x)| / |ln(x / x_bar)|`.
    pub l_secant: f64,
    pub domain_upper: f64,
    pub grid_size: usize,
    pub argmax_x: f64,
}

/// Estimates `L` on a log-spaced grid of `grid_size` intervals spanning
/// `[x_bar 1e-9, x_bar c^(m+1)]`.
///
/// `l_hat` is driven by the largest log-log slope. By the mean value theorem
/// in `ln x`, that slope bounds `|ln F(x)| / |ln(x / x_bar)|` for every `x` in
/// the domain, so `l_hat` is a valid constant for the Lipschitz-type
/// condition. The secant ratio itself, which is the smallest valid constant,
/// is reported as `l_secant`. Doubling `grid_size` produces a superset of
/// the grid points, so `l_hat` never decreases under that refinement.
pub fn estimate_log_lipschitz(
    model: &GrowthModel,
    m: usize,
    grid_size: usize,
) -> Result<LipschitzEstimate, AnalysisError> {
    if grid_size < MIN_GRID_SIZE {
        return Err(AnalysisError::GridTooSmall(grid_size));
    }
    let x_bar = model.x_bar();
    let ln_bar = x_bar.ln();
    let domain_upper = x_bar * model.c_sup().powi((m + 1) as i32);

    let h = x_bar * LOCAL_FD_STEP;
    let l_local = x_bar * ((model.growth(x_bar + h) - model.growth(x_bar - h)) / (2.0 * h)).abs();

    let mut slope_sup = 0.0_f64;
    let mut slope_arg = x_bar;
    let mut l_secant = 0.0_f64;
    let mut secant_arg = x_bar;
    for x in log_grid(x_bar * GRID_LOWER_FACTOR, domain_upper, grid_size) {
        let slope = model.elasticity(x);
        if !slope.is_finite() {
            return Err(AnalysisError::NonFiniteRatio { x });
        }
        if slope > slope_sup {
            slope_sup = slope;
            slope_arg = x;
        }
        if (x / x_bar - 1.0).abs() > SECANT_EXCLUSION {
            let ratio = model.growth(x).ln().abs() / (x.ln() - ln_bar).abs();
            if !ratio.is_finite() {
                return Err(AnalysisError::NonFiniteRatio { x });
            }
            if ratio > l_secant {
                l_secant = ratio;
                secant_arg = x;
            }
        }
    }

    let (mut l_hat, mut argmax_x) = (slope_sup, slope_arg);
    if l_local > l_hat {
        l_hat = l_local;
        argmax_x = x_bar;
    }
    if l_secant > l_hat {
        l_hat = l_secant;
        argmax_x = secant_arg;
    }
    Ok(LipschitzEstimate {
        l_hat,
        slope_sup,
        l_local,
        l_secant,
        domain_upper,
        grid_size,
        argmax_x,
    })
}

/// `grid_size + 1` points `exp(ln lo + i (ln hi - ln lo) / grid_size)`.
fn log_grid(lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / intervals as f64;
    (0..=intervals)
        .map(|i| match i {
            0 => lo,
            i if i == intervals => hi,
            i => (a + i as f64 * step).exp(),
        })
        .collect()
}

/// Closed-form constants: `beta r / (2 alpha + beta + 2 sqrt(alpha^2 + alpha beta))`
/// for bobwhite and `1 / (lambda x_bar) = 1 / (beta - 1)` for Pielou.
///
/// The Pielou value is smaller than the slope `(beta - 1) / beta` of
/// `ln F` at `x_bar` once `beta > 2`, so it does not satisfy the
/// Lipschitz-type condition there. Compare with [`estimate_log_lipschitz`].
pub fn closed_form_l(model: &GrowthModel) -> f64 {
    match model.params() {
        Params::Bobwhite { alpha, beta, r } => beta * r / bobwhite_denominator(alpha, beta),
        Params::Pielou { beta, .. } => 1.0 / (beta - 1.0),
    }
}

fn bobwhite_denominator(alpha: f64, beta: f64) -> f64 {
    2.0 * alpha + beta + 2.0 * (alpha * alpha + alpha * beta).sqrt()
}

/// Outcome of the 3/2-condition for one `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeHalves {
    pub l: f64,
    pub holds: bool,
    /// `3/2 - (m + 3/2) L`; positive iff the condition holds.
    pub margin: f64,
    /// `max(0, L (m + 3/2) - 1/2)`, present when the condition holds.
    pub q: Option<f64>,
}

/// `(m + 3/2) L < 3/2`, with the predicted per-cycle contraction factor.
///
/// ```
/// use delaypop::analysis::three_halves_check;
///
/// let t = three_halves_check(0.5, 1);
/// assert!(t.holds);
/// assert_eq!(t.q, Some(0.75));
/// assert!(!three_halves_check(1.0, 0).holds);
/// ```
pub fn three_halves_check(l: f64, m: usize) -> ThreeHalves {
    let weighted = (m as f64 + 1.5) * l;
    let holds = weighted < 1.5;
    ThreeHalves {
        l,
        holds,
        margin: 1.5 - weighted,
        q: holds.then(|| (weighted - 0.5).max(0.0)),
    }
}

fn check_bobwhite_pair(alpha: f64, beta: f64) -> Result<(), ModelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ModelError::AlphaOutOfRange(alpha));
    }
    if (alpha + beta).partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return Err(ModelError::NoPositiveEquilibrium(alpha + beta));
    }
    Ok(())
}

fn delay_factor(m: usize) -> f64 {
    let m = m as f64;
    (3.0 * m + 4.0) / (2.0 * (m + 1.0) * (m + 1.0))
}

/// Largest `r` admitted by the earlier bobwhite bound,
/// `(2 alpha + beta + 2 sqrt(alpha^2 + alpha beta)) / beta * (3m + 4) / (2 (m + 1)^2)`.
pub fn graef_r_max(alpha: f64, beta: f64, m: usize) -> Result<f64, ModelError> {
    check_bobwhite_pair(alpha, beta)?;
    Ok(bobwhite_denominator(alpha, beta) / beta * delay_factor(m))
}

/// Largest `r` admitted by the sharpened bobwhite bound,
/// `beta / ((alpha + beta - 1)(1 - alpha)) * (3m + 4) / (2 (m + 1)^2)`.
pub fn liz_r_max(alpha: f64, beta: f64, m: usize) -> Result<f64, ModelError> {
    check_bobwhite_pair(alpha, beta)?;
    Ok(beta / ((alpha + beta - 1.0) * (1.0 - alpha)) * delay_factor(m))
}

/// Per-cycle amplitude contraction measured against a predicted factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCheck {
    pub factor: f64,
    pub cycles_checked: usize,
    /// `(k, peak[k], peak[k + 1])` for each violation.
    pub violations: Vec<(usize, f64, f64)>,
}

/// Cycles before this index are treated as transient.
pub const CONTRACTION_SKIP_CYCLES: usize = 3;
pub const CONTRACTION_SLACK: f64 = 1e-9;

/// Checks `peak[k+1] <= max(q, 1/2) peak[k] + 1e-9` for `k >= 3`.
pub fn check_contraction(osc: &Oscillation, q: f64) -> ContractionCheck {
    let factor = q.max(0.5);
    let mut violations = Vec::new();
    let mut cycles_checked = 0;
    for (k, pair) in osc
        .peaks
        .windows(2)
        .enumerate()
        .skip(CONTRACTION_SKIP_CYCLES)
    {
        cycles_checked += 1;
        if pair[1] > factor * pair[0] + CONTRACTION_SLACK {
            violations.push((k, pair[0], pair[1]));
        }
    }
    ContractionCheck {
        factor,
        cycles_checked,
        violations,
    }
}

/// Where simulation histories come from.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySource {
    /// `count` histories drawn log-uniformly from `[x_bar / 4, 4 x_bar]`.
    Random {
        count: usize,
        seed: u64,
    },
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub n_steps: usize,
    pub burn_in: usize,
    pub tol: f64,
    /// Final window checked by [`detect_convergence`].
    pub window: usize,
    pub histories: HistorySource,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            n_steps: 20_000,
            burn_in: 10_000,
            tol: 1e-6,
            window: 100,
            histories: HistorySource::Random { count: 3, seed: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub grid_size: usize,
    pub simulation: Option<SimOptions>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            grid_size: DEFAULT_GRID_SIZE,
            simulation: Some(SimOptions::default()),
        }
    }
}

/// One simulated orbit as seen by the report.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub history: Vec<f64>,
    pub verdict: ConvergenceVerdict,
    pub tail: Option<TailStats>,
    pub divergence: Option<Divergence>,
    /// Tail extrema strictly inside the envelope, when the tail exists.
    pub in_envelope: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub runs: Vec<SimRun>,
    pub converged: bool,
    pub divergent: bool,
    pub achieved_tolerance: f64,
    pub liminf_est: Option<f64>,
    pub limsup_est: Option<f64>,
    pub tail_min: Option<f64>,
    pub tail_max: Option<f64>,
    pub in_envelope: Option<bool>,
}

/// Every criterion for one `(model, m)`, side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub model: GrowthModel,
    pub m: usize,
    pub hypotheses: Hypotheses,
    pub strict_bounds: bool,
    pub envelope: Envelope,
    pub l_closed: f64,
    pub lipschitz: LipschitzEstimate,
    /// 3/2-condition with the closed-form `L`.
    pub three_halves_closed: ThreeHalves,
    /// 3/2-condition with the grid estimate `l_hat`.
    pub three_halves_numeric: ThreeHalves,
    pub graef_r_max: Option<f64>,
    pub liz_r_max: Option<f64>,
    pub simulation: Option<SimulationSummary>,
}

/// Column order of [`StabilityReport::csv_row`].
pub const CSV_HEADER: &str = "family,alpha,beta,r,lambda,m,x_bar,graef_ok,liz_ok,thm3_paper,\
thm3_numeric,L_paper,L_hat,q,converged,liminf_est,limsup_est,in_envelope,skipped";

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn fmt_opt_bool(b: Option<bool>) -> &'static str {
    b.map(fmt_bool).unwrap_or("")
}

impl StabilityReport {
    fn bobwhite_r(&self) -> Option<f64> {
        match self.model.params() {
            Params::Bobwhite { r, .. } => Some(r),
            Params::Pielou { .. } => None,
        }
    }

    /// `r < graef_r_max`, bobwhite only.
    pub fn graef_ok(&self) -> Option<bool> {
        Some(self.bobwhite_r()? < self.graef_r_max?)
    }

    /// `r < liz_r_max`, bobwhite only.
    pub fn liz_ok(&self) -> Option<bool> {
        Some(self.bobwhite_r()? < self.liz_r_max?)
    }

    /// Contraction factor of the grid-certified `L` if it passes the
    /// 3/2-condition, otherwise that of the closed-form `L`.
    pub fn q(&self) -> Option<f64> {
        self.three_halves_numeric.q.or(self.three_halves_closed.q)
    }

    /// One CSV row in [`CSV_HEADER`] order, no trailing newline.
    pub fn csv_row(&self) -> String {
        let d = REPORT_DIGITS;
        let [alpha, beta, r, lambda] = self.model.param_columns();
        let sim = self.simulation.as_ref();
        [
            self.model.family().name().to_string(),
            fmt_opt(alpha, d),
            fmt_opt(beta, d),
            fmt_opt(r, d),
            fmt_opt(lambda, d),
            self.m.to_string(),
            fmt_sig(self.model.x_bar(), d),
            fmt_opt_bool(self.graef_ok()).to_string(),
            fmt_opt_bool(self.liz_ok()).to_string(),
            fmt_bool(self.three_halves_closed.holds).to_string(),
            fmt_bool(self.three_halves_numeric.holds).to_string(),
            fmt_sig(self.l_closed, d),
            fmt_sig(self.lipschitz.l_hat, d),
            fmt_opt(self.q(), d),
            fmt_opt_bool(sim.map(|s| s.converged)).to_string(),
            fmt_opt(sim.and_then(|s| s.liminf_est), d),
            fmt_opt(sim.and_then(|s| s.limsup_est), d),
            fmt_opt_bool(sim.and_then(|s| s.in_envelope)).to_string(),
            "false".to_string(),
        ]
        .join(",")
    }

    /// `key=value` lines; absent values print as `n/a`.
    pub fn to_key_value(&self) -> String {
        let d = REPORT_DIGITS;
        let num = |v: f64| fmt_sig(v, d);
        let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "n/a".to_string());
        let optb = |v: Option<bool>| {
            v.map(|b| fmt_bool(b).to_string())
                .unwrap_or_else(|| "n/a".to_string())
        };
        let [alpha, beta, r, lambda] = self.model.param_columns();
        let h = &self.hypotheses;
        let lip = &self.lipschitz;
        let mut kv: Vec<(&str, String)> = vec![
            ("family", self.model.family().name().to_string()),
            ("alpha", opt(alpha)),
            ("beta", opt(beta)),
            ("r", opt(r)),
            ("lambda", opt(lambda)),
            ("m", self.m.to_string()),
            ("x_bar", num(self.model.x_bar())),
            ("alpha_inf", num(self.model.alpha_inf())),
            ("c_sup", num(self.model.c_sup())),
            ("bounded", fmt_bool(h.bounded.holds).to_string()),
            ("bounded_sampled_sup", num(h.bounded.sampled)),
            (
                "below_one_at_infinity",
                fmt_bool(h.below_one_at_infinity.holds).to_string(),
            ),
            ("limit_at_infinity", num(h.below_one_at_infinity.analytic)),
            (
                "above_one_at_zero",
                fmt_bool(h.above_one_at_zero.holds).to_string(),
            ),
            ("limit_at_zero", num(h.above_one_at_zero.analytic)),
            (
                "hypotheses_corroborated",
                fmt_bool(
                    h.bounded.corroborated
                        && h.below_one_at_infinity.corroborated
                        && h.above_one_at_zero.corroborated,
                )
                .to_string(),
            ),
            ("strict_bounds", fmt_bool(self.strict_bounds).to_string()),
            ("envelope_lower", opt(self.envelope.lower)),
            ("envelope_upper", num(self.envelope.upper)),
            ("L_paper", num(self.l_closed)),
            ("L_hat", num(lip.l_hat)),
            ("L_slope_sup", num(lip.slope_sup)),
            ("L_local", num(lip.l_local)),
            ("L_secant", num(lip.l_secant)),
            ("L_argmax_x", num(lip.argmax_x)),
            ("L_domain_upper", num(lip.domain_upper)),
            ("L_grid_size", lip.grid_size.to_string()),
            (
                "thm3_paper",
                fmt_bool(self.three_halves_closed.holds).to_string(),
            ),
            ("thm3_paper_margin", num(self.three_halves_closed.margin)),
            ("q_paper", opt(self.three_halves_closed.q)),
            (
                "thm3_numeric",
                fmt_bool(self.three_halves_numeric.holds).to_string(),
            ),
            ("thm3_numeric_margin", num(self.three_halves_numeric.margin)),
            ("q_numeric", opt(self.three_halves_numeric.q)),
            ("q", opt(self.q())),
            ("graef_r_max", opt(self.graef_r_max)),
            ("graef_ok", optb(self.graef_ok())),
            ("liz_r_max", opt(self.liz_r_max)),
            ("liz_ok", optb(self.liz_ok())),
        ];
        if let Some(sim) = &self.simulation {
            kv.extend([
                ("sim_runs", sim.runs.len().to_string()),
                ("sim_converged", fmt_bool(sim.converged).to_string()),
                ("sim_achieved_tol", num(sim.achieved_tolerance)),
                ("sim_divergent", fmt_bool(sim.divergent).to_string()),
                ("liminf_est", opt(sim.liminf_est)),
                ("limsup_est", opt(sim.limsup_est)),
                ("tail_min", opt(sim.tail_min)),
                ("tail_max", opt(sim.tail_max)),
                ("in_envelope", optb(sim.in_envelope)),
            ]);
        }
        kv.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Evaluates every criterion for `(model, m)` and, if requested, simulates.
///
/// Divergent orbits are recorded in the summary, not returned as errors.
pub fn classify(
    model: &GrowthModel,
    m: usize,
    options: &ClassifyOptions,
) -> Result<StabilityReport, AnalysisError> {
    let lipschitz = estimate_log_lipschitz(model, m, options.grid_size)?;
    let l_closed = closed_form_l(model);
    let envelope = persistence_envelope(model, m);
    let (graef, liz) = match model.params() {
        Params::Bobwhite { alpha, beta, .. } => (
            Some(graef_r_max(alpha, beta, m)?),
            Some(liz_r_max(alpha, beta, m)?),
        ),
        Params::Pielou { .. } => (None, None),
    };
    let simulation = options
        .simulation
        .as_ref()
        .map(|sim| simulate_summary(model, m, &envelope, sim))
        .transpose()?;
    Ok(StabilityReport {
        model: *model,
        m,
        hypotheses: check_hypotheses(model),
        strict_bounds: strict_bounds(model),
        envelope,
        l_closed,
        three_halves_closed: three_halves_check(l_closed, m),
        three_halves_numeric: three_halves_check(lipschitz.l_hat, m),
        lipschitz,
        graef_r_max: graef,
        liz_r_max: liz,
        simulation,
    })
}

fn simulate_summary(
    model: &GrowthModel,
    m: usize,
    envelope: &Envelope,
    opts: &SimOptions,
) -> Result<SimulationSummary, AnalysisError> {
    let histories = match &opts.histories {
        HistorySource::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            simulate::random_histories(model.x_bar(), m, *count, &mut rng)
        }
        HistorySource::Explicit(h) => h.clone(),
    };
    let mut runs = Vec::with_capacity(histories.len());
    for history in histories {
        let trace = iterate(model, m, &history, opts.n_steps)?;
        let verdict = if trace.is_divergent() || trace.steps() < opts.window {
            ConvergenceVerdict {
                converged: false,
                achieved_tolerance: f64::INFINITY,
                steps_used: trace.steps(),
            }
        } else {
            detect_convergence(&trace, model.x_bar(), opts.tol, opts.window)?
        };
        let tail = tail_stats(&trace, opts.burn_in).ok();
        let in_envelope = tail.map(|t| envelope.contains(t.tail_min, t.tail_max));
        runs.push(SimRun {
            history,
            verdict,
            tail,
            divergence: trace.divergence(),
            in_envelope,
        });
    }

    let tails: Vec<&TailStats> = runs.iter().filter_map(|r| r.tail.as_ref()).collect();
    let fold = |f: fn(&TailStats) -> f64, pick: fn(f64, f64) -> f64| {
        tails.iter().map(|t| f(t)).reduce(pick)
    };
    let any_tail_missing = tails.len() < runs.len();
    Ok(SimulationSummary {
        converged: !runs.is_empty() && runs.iter().all(|r| r.verdict.converged),
        divergent: runs.iter().any(|r| r.divergence.is_some()),
        achieved_tolerance: runs
            .iter()
            .map(|r| r.verdict.achieved_tolerance)
            .fold(0.0, f64::max),
        liminf_est: fold(|t| t.liminf_est, f64::min),
        limsup_est: fold(|t| t.limsup_est, f64::max),
        tail_min: fold(|t| t.tail_min, f64::min),
        tail_max: fold(|t| t.tail_max, f64::max),
        in_envelope: if any_tail_missing || runs.is_empty() {
            None
        } else {
            Some(runs.iter().all(|r| r.in_envelope == Some(true)))
        },
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bob(a: f64, b: f64, r: f64) -> GrowthModel {
        GrowthModel::bobwhite(a, b, r).unwrap()
    }

    fn pielou(b: f64, l: f64) -> GrowthModel {
        GrowthModel::pielou(b, l).unwrap()
    }

    #[test]
    fn hypotheses_hold_for_both_families() {
        for model in [bob(0.5, 1.0, 2.0), pielou(3.0, 1.0)] {
            let h = check_hypotheses(&model);
            assert!(h.all_hold(), "{model}");
            assert!(h.bounded.corroborated);
            assert!(h.below_one_at_infinity.corroborated);
            assert!(h.above_one_at_zero.corroborated);
        }
        let h = check_hypotheses(&bob(0.5, 1.0, 2.0));
        assert_eq!(h.bounded.analytic, 1.5);
        assert_eq!(h.below_one_at_infinity.analytic, 0.5);
        assert_eq!(h.above_one_at_zero.analytic, 1.5);
        assert_eq!(
            check_hypotheses(&pielou(3.0, 1.0))
                .below_one_at_infinity
                .analytic,
            0.0
        );
    }

    #[test]
    fn condition_26_fails_only_for_pielou() {
        assert!(strict_bounds(&bob(0.5, 1.0, 2.0)));
        assert!(!strict_bounds(&pielou(3.0, 1.0)));
    }

    #[test]
    fn envelopes() {
        let e0 = persistence_envelope(&bob(0.5, 1.0, 2.0), 0);
        assert_eq!((e0.lower, e0.upper), (Some(0.5), 1.5));
        let e1 = persistence_envelope(&bob(0.5, 1.0, 2.0), 1);
        assert_eq!((e1.lower, e1.upper), (Some(0.25), 2.25));
        let p = persistence_envelope(&pielou(3.0, 1.0), 1);
        assert_eq!((p.lower, p.upper), (None, 18.0));
        assert!(e1.contains(0.3, 2.0));
        assert!(!e1.contains(0.25, 2.0));
        assert!(!e1.contains(0.3, 2.25));
    }

    #[test]
    fn closed_form_constants() {
        assert!((closed_form_l(&bob(0.5, 1.0, 1.0)) - 0.267949192431).abs() < 1e-12);
        assert!((closed_form_l(&bob(0.5, 1.0, 2.0)) - 0.535898384862).abs() < 1e-12);
        assert_eq!(closed_form_l(&pielou(3.0, 1.0)), 0.5);
    }

    #[test]
    fn estimator_examples() {
        let e = estimate_log_lipschitz(&bob(0.5, 1.0, 1.0), 1, 100_000).unwrap();
        let closed = closed_form_l(&bob(0.5, 1.0, 1.0));
        assert!((e.l_hat - closed).abs() / closed < 0.01);
        assert!(e.l_hat <= closed + 1e-12);
        assert!(e.l_secant < e.l_hat);
        assert_eq!(e.domain_upper, 2.25);

        // Pielou slope lambda x / (1 + lambda x) peaks at the domain top 0.75
        let p = estimate_log_lipschitz(&pielou(1.5, 1.0), 0, 100_000).unwrap();
        assert!((p.l_hat - 0.75 / 1.75).abs() < 1e-9);
        assert!((p.argmax_x - 0.75).abs() < 1e-12);

        let p = estimate_log_lipschitz(&pielou(3.0, 1.0), 1, 100_000).unwrap();
        assert!((p.l_hat - 18.0 / 19.0).abs() < 1e-9);
        assert!(p.l_hat > 0.5);
        assert!((p.l_local - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn estimator_rejects_small_grid() {
        assert_eq!(
            estimate_log_lipschitz(&pielou(3.0, 1.0), 1, 999),
            Err(AnalysisError::GridTooSmall(999))
        );
    }

    #[test]
    fn estimator_refinement_is_monotone() {
        for model in [bob(0.3, 1.2, 1.7), bob(0.8, 0.5, 0.6), pielou(2.5, 3.0)] {
            for m in 0..3 {
                let mut prev = 0.0;
                for g in [1_000, 2_000, 4_000, 8_000, 16_000] {
                    let e = estimate_log_lipschitz(&model, m, g).unwrap();
                    assert!(e.l_hat >= prev, "{model} m={m} g={g}");
                    assert!(e.l_hat >= e.l_local - 1e-4);
                    prev = e.l_hat;
                }
            }
        }
    }

    #[test]
    fn three_halves_examples() {
        let t = three_halves_check(0.267949, 1);
        assert!(t.holds);
        assert!((t.q.unwrap() - 0.1698725).abs() < 1e-9);
        let t = three_halves_check(1.0, 0);
        assert!(!t.holds);
        assert_eq!(t.margin, 0.0);
        assert_eq!(t.q, None);
        assert_eq!(three_halves_check(0.5, 1).q, Some(0.75));
        // weighted L below 1/2 reports a zero factor
        assert_eq!(three_halves_check(0.1, 1).q, Some(0.0));
    }

    #[test]
    fn classical_bounds() {
        let g0 = graef_r_max(0.5, 1.0, 0).unwrap();
        assert!((g0 - 7.464101615).abs() < 1e-8);
        let g1 = graef_r_max(0.5, 1.0, 1).unwrap();
        assert!((g1 - 3.265544457).abs() < 1e-8);
        assert_eq!(liz_r_max(0.5, 1.0, 0).unwrap(), 8.0);
        assert_eq!(liz_r_max(0.5, 1.0, 1).unwrap(), 3.5);
        assert!(graef_r_max(1.0, 1.0, 0).is_err());
        assert!(liz_r_max(0.5, 0.5, 0).is_err());
        let mut prev = f64::INFINITY;
        for m in 0..200 {
            let g = graef_r_max(0.5, 1.0, m).unwrap();
            assert!(g < prev);
            prev = g;
        }
        assert!(prev < 0.04);
    }

    #[test]
    fn liz_dominates_graef_on_grid() {
        for i in 1..20 {
            let alpha = i as f64 * 0.05;
            for j in 1..30 {
                let beta = (1.0 - alpha) + j as f64 * 0.1;
                for m in 0..6 {
                    assert!(
                        liz_r_max(alpha, beta, m).unwrap() >= graef_r_max(alpha, beta, m).unwrap(),
                        "alpha={alpha} beta={beta} m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn classify_bobwhite_reference() {
        let report = classify(&bob(0.5, 1.0, 1.0), 1, &ClassifyOptions::default()).unwrap();
        assert!(report.three_halves_closed.holds);
        assert!(report.three_halves_numeric.holds);
        assert!((report.graef_r_max.unwrap() - 3.26555).abs() < 1e-5);
        assert_eq!(report.liz_r_max, Some(3.5));
        assert_eq!(report.graef_ok(), Some(true));
        assert_eq!(report.liz_ok(), Some(true));
        let sim = report.simulation.as_ref().unwrap();
        assert!(sim.converged);
        assert_eq!(sim.in_envelope, Some(true));
        assert!((sim.liminf_est.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn classify_pielou_discrepancy() {
        let report = classify(&pielou(3.0, 1.0), 1, &ClassifyOptions::default()).unwrap();
        assert_eq!(report.l_closed, 0.5);
        assert!(report.lipschitz.l_hat > 0.9);
        assert!(report.three_halves_closed.holds);
        assert!(!report.three_halves_numeric.holds);
        assert_eq!(report.q(), Some(0.75));
        assert_eq!(report.graef_ok(), None);
        assert_eq!(report.envelope.lower, None);
    }

    #[test]
    fn classify_equilibrium_seed() {
        let opts = ClassifyOptions {
            simulation: Some(SimOptions {
                histories: HistorySource::Explicit(vec![vec![1.0, 1.0]]),
                ..SimOptions::default()
            }),
            ..ClassifyOptions::default()
        };
        let report = classify(&bob(0.5, 1.0, 2.0), 1, &opts).unwrap();
        let sim = report.simulation.unwrap();
        assert!(sim.converged);
        assert_eq!(sim.achieved_tolerance, 0.0);
    }

    #[test]
    fn classify_records_divergence() {
        let opts = ClassifyOptions {
            simulation: Some(SimOptions {
                histories: HistorySource::Explicit(vec![vec![1e300, 1e300, 1e300, 1e-300]]),
                ..SimOptions::default()
            }),
            ..ClassifyOptions::default()
        };
        let report = classify(&bob(0.01, 40.0, 1.0), 3, &opts).unwrap();
        let sim = report.simulation.unwrap();
        assert!(sim.divergent);
        assert!(!sim.converged);
        assert_eq!(sim.in_envelope, None);
        let row = classify(&bob(0.01, 40.0, 1.0), 3, &opts).unwrap().csv_row();
        assert!(row.contains(",false,,,,false"), "{row}");
    }

    #[test]
    fn classify_rejects_bad_history() {
        let opts = ClassifyOptions {
            simulation: Some(SimOptions {
                histories: HistorySource::Explicit(vec![vec![1.0]]),
                ..SimOptions::default()
            }),
            ..ClassifyOptions::default()
        };
        assert!(matches!(
            classify(&bob(0.5, 1.0, 2.0), 1, &opts),
            Err(AnalysisError::Simulation(SimError::HistoryLength { .. }))
        ));
    }

    #[test]
    fn contraction_check_flags_growth() {
        let osc = Oscillation {
            crossings: vec![],
            peaks: vec![1.0, 0.5, 0.25, 0.12, 0.06, 0.05],
        };
        let ok = check_contraction(&osc, 0.2);
        assert_eq!(ok.factor, 0.5);
        assert_eq!(ok.cycles_checked, 2);
        assert_eq!(ok.violations.len(), 1);
        assert_eq!(ok.violations[0].0, 4);
    }

    #[test]
    fn report_serializations() {
        let opts = ClassifyOptions {
            simulation: None,
            ..ClassifyOptions::default()
        };
        let report = classify(&bob(0.5, 1.0, 1.0), 1, &opts).unwrap();
        let kv = report.to_key_value();
        assert!(kv.contains("thm3_paper=true\n"));
        assert!(kv.contains("liz_r_max=3.5\n"));
        assert!(kv.contains("lambda=n/a\n"));
        assert!(!kv.contains("sim_converged"));
        let row = report.csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("bobwhite,0.5,1,1,,1,1,true,true,true,true,0.267949192,"));
        assert!(row.ends_with(",,,,,false"));
    }
}
