//! Built-in property suites run by `delaypop verify`.
//!
//! Each suite draws its cases from a seeded generator, so a given seed always
//! produces the same report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    check_contraction, closed_form_l, estimate_log_lipschitz, persistence_envelope,
    three_halves_check, DEFAULT_GRID_SIZE,
};
use crate::model::{equilibrium_bisect, GrowthModel, EQUILIBRIUM_RESIDUAL_TOL};
use crate::simulate::{
    detect_convergence, detect_oscillation, iterate, random_histories, recurrence_residual,
    tail_stats,
};

/// Names accepted by `--only`, in run order.
pub const SUITES: &[&str] = &[
    "equilibrium",
    "residual",
    "envelope",
    "scaling",
    "lipschitz",
    "criteria",
    "contraction",
];

/// Failure messages kept per suite.
const MAX_MESSAGES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub messages: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport {
            name,
            cases: 0,
            failures: 0,
            messages: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.messages.len() < MAX_MESSAGES {
                self.messages.push(msg());
            }
        }
    }
}

/// Bobwhite draw with `alpha` in `[0.1, 0.9]`, `alpha + beta` in `[1.1, 3]`
/// and `r` in `[0.5, 2]`.
pub fn random_bobwhite<R: Rng + ?Sized>(rng: &mut R) -> GrowthModel {
    let alpha = rng.gen_range(0.1..=0.9);
    let total = rng.gen_range(1.1..=3.0);
    let r = rng.gen_range(0.5..=2.0);
    GrowthModel::bobwhite(alpha, total - alpha, r).expect("draw lies in the domain")
}

/// Pielou draw with `beta` in `[1.1, 6]` and `lambda` log-uniform in
/// `[0.01, 100]`.
pub fn random_pielou<R: Rng + ?Sized>(rng: &mut R) -> GrowthModel {
    let beta = rng.gen_range(1.1..=6.0);
    let lambda = rng.gen_range(0.01_f64.ln()..=100.0_f64.ln()).exp();
    GrowthModel::pielou(beta, lambda).expect("draw lies in the domain")
}

/// Runs the named suites (all of them for `None`). Unknown names are an
/// error naming the first offender.
pub fn run_suites(seed: u64, only: Option<&[String]>) -> Result<Vec<SuiteReport>, String> {
    let selected: Vec<&str> = match only {
        None => SUITES.to_vec(),
        Some(names) => {
            for n in names {
                if !SUITES.contains(&n.as_str()) {
                    return Err(format!(
                        "unknown suite `{n}` (known: {})",
                        SUITES.join(", ")
                    ));
                }
            }
            SUITES
                .iter()
                .copied()
                .filter(|s| names.iter().any(|n| n == s))
                .collect()
        }
    };
    Ok(selected
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            match name {
                "equilibrium" => equilibrium_suite(&mut rng),
                "residual" => residual_suite(&mut rng),
                "envelope" => envelope_suite(&mut rng),
                "scaling" => scaling_suite(&mut rng),
                "lipschitz" => lipschitz_suite(&mut rng),
                "criteria" => criteria_suite(&mut rng),
                "contraction" => contraction_suite(&mut rng),
                _ => unreachable!("validated above"),
            }
        })
        .collect())
}

fn equilibrium_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("equilibrium");
    for i in 0..2_000 {
        let model = if i % 2 == 0 {
            random_bobwhite(rng)
        } else {
            random_pielou(rng)
        };
        let residual = (model.growth(model.x_bar()) - 1.0).abs();
        report.check(residual <= EQUILIBRIUM_RESIDUAL_TOL, || {
            format!("{model}: |F(x_bar) - 1| = {residual:e}")
        });
        let agree = equilibrium_bisect(&model)
            .map(|root| (root - model.x_bar()).abs() / model.x_bar())
            .unwrap_or(f64::INFINITY);
        report.check(agree <= 1e-10, || {
            format!("{model}: bisection rel. error {agree:e}")
        });
    }
    report
}

fn residual_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("residual");
    for i in 0..100 {
        let model = if i % 2 == 0 {
            random_bobwhite(rng)
        } else {
            random_pielou(rng)
        };
        let m = rng.gen_range(0..=4);
        let history = &random_histories(model.x_bar(), m, 1, rng)[0];
        let trace = iterate(&model, m, history, 2_000).expect("valid history");
        let res = recurrence_residual(&model, &trace);
        report.check(res <= 1e-12, || format!("{model}, m={m}: residual {res:e}"));
    }
    report
}

fn envelope_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("envelope");
    for _ in 0..100 {
        let model = random_bobwhite(rng);
        let m = rng.gen_range(0..=3);
        let env = persistence_envelope(&model, m);
        for history in random_histories(model.x_bar(), m, 3, rng) {
            let trace = iterate(&model, m, &history, 20_000).expect("valid history");
            let Ok(tail) = tail_stats(&trace, 10_000) else {
                report.check(false, || format!("{model}, m={m}: no tail"));
                continue;
            };
            report.check(env.contains(tail.tail_min, tail.tail_max), || {
                format!(
                    "{model}, m={m}: tail [{}, {}] outside {:?}",
                    tail.tail_min, tail.tail_max, env
                )
            });
            let osc = detect_oscillation(&trace, model.x_bar());
            if osc.crossings_from(tail.estimate_from) > 0 {
                let x_bar = model.x_bar();
                report.check(tail.liminf_est <= x_bar && x_bar <= tail.limsup_est, || {
                    format!("{model}, m={m}: x_bar not bracketed by liminf/limsup estimates")
                });
            }
        }
    }
    report
}

/// Pielou orbits under `x -> lambda x` compared against the `lambda = 1`
/// system.
pub fn scaling_deviation(beta: f64, lambda: f64, m: usize, history: &[f64], steps: usize) -> f64 {
    let scaled = GrowthModel::pielou(beta, lambda).expect("valid");
    let unit = GrowthModel::pielou(beta, 1.0).expect("valid");
    let mapped: Vec<f64> = history.iter().map(|h| lambda * h).collect();
    let a = iterate(&scaled, m, history, steps).expect("valid history");
    let b = iterate(&unit, m, &mapped, steps).expect("valid history");
    a.log_values()
        .iter()
        .zip(b.log_values())
        .map(|(ya, yb)| {
            let va = ya.exp();
            let vb = yb.exp() / lambda;
            (va - vb).abs() / va
        })
        .fold(0.0, f64::max)
}

fn scaling_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("scaling");
    for _ in 0..50 {
        let model = random_pielou(rng);
        let crate::model::Params::Pielou { beta, lambda } = model.params() else {
            unreachable!()
        };
        let m = rng.gen_range(0..=3);
        let history = &random_histories(model.x_bar(), m, 1, rng)[0];
        let dev = scaling_deviation(beta, lambda, m, history, 1_000);
        report.check(dev <= 1e-12, || {
            format!("{model}, m={m}: rel. deviation {dev:e}")
        });
    }
    report
}

/// Log-log slope maximiser `((alpha + beta) / alpha)^(1 / (2r))` of a
/// bobwhite model, when it lies inside the grid domain for delay `m`.
pub fn bobwhite_slope_peak_inside(model: &GrowthModel, m: usize) -> bool {
    let crate::model::Params::Bobwhite { alpha, beta, r } = model.params() else {
        return false;
    };
    let peak = ((alpha + beta) / alpha).powf(0.5 / r);
    let upper = model.x_bar() * model.c_sup().powi((m + 1) as i32);
    peak > model.x_bar() * crate::analysis::GRID_LOWER_FACTOR && peak < upper
}

fn lipschitz_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("lipschitz");
    let mut agreeing = 0;
    while agreeing < 20 {
        let model = random_bobwhite(rng);
        let est = estimate_log_lipschitz(&model, 1, DEFAULT_GRID_SIZE).expect("grid");
        let closed = closed_form_l(&model);
        // the closed form is a supremum over all x > 0, so it always dominates
        report.check(est.l_hat <= closed * (1.0 + 1e-9), || {
            format!("{model}: L_hat {} above closed form {closed}", est.l_hat)
        });
        if bobwhite_slope_peak_inside(&model, 1) {
            agreeing += 1;
            let rel = (est.l_hat - closed).abs() / closed;
            report.check(rel <= 0.01, || format!("{model}: |L_hat - L| / L = {rel}"));
        }
    }
    let pielou = GrowthModel::pielou(3.0, 1.0).expect("valid");
    let est = estimate_log_lipschitz(&pielou, 1, DEFAULT_GRID_SIZE).expect("grid");
    report.check(est.l_hat >= 0.9 && closed_form_l(&pielou) == 0.5, || {
        format!(
            "pielou(3, 1): L_hat {} / closed form {}",
            est.l_hat,
            closed_form_l(&pielou)
        )
    });
    report
}

fn criteria_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("criteria");
    for _ in 0..1_000 {
        let alpha = rng.gen_range(0.01..0.99);
        let beta = rng.gen_range((1.0 - alpha + 1e-3)..5.0);
        let r = rng.gen_range(0.05..10.0);
        let m = rng.gen_range(0..=10);
        let model = GrowthModel::bobwhite(alpha, beta, r).expect("valid");
        let direct = three_halves_check(closed_form_l(&model), m).holds;
        let restated = {
            let d = 2.0 * alpha + beta + 2.0 * (alpha * alpha + alpha * beta).sqrt();
            (m as f64 + 1.5) < d / (beta * r) * 1.5
        };
        report.check(direct == restated, || {
            format!("{model}, m={m}: {direct} vs {restated}")
        });
    }
    report
}

fn contraction_suite(rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut report = SuiteReport::new("contraction");
    let mut models = 0;
    while models < 20 {
        let model = random_bobwhite(rng);
        let m = rng.gen_range(0..=2);
        let est = estimate_log_lipschitz(&model, m, DEFAULT_GRID_SIZE).expect("grid");
        let t3 = three_halves_check(est.l_hat, m);
        let Some(q) = t3.q else { continue };
        models += 1;
        for history in random_histories(model.x_bar(), m, 5, rng) {
            let trace = iterate(&model, m, &history, 5_000).expect("valid history");
            let conv = detect_convergence(&trace, model.x_bar(), 1e-6, 100).expect("window");
            report.check(conv.converged, || {
                format!(
                    "{model}, m={m}: not converged ({:e})",
                    conv.achieved_tolerance
                )
            });
            let check = check_contraction(&detect_oscillation(&trace, model.x_bar()), q);
            report.check(check.violations.is_empty(), || {
                format!(
                    "{model}, m={m}: contraction violated at {:?}",
                    check.violations[0]
                )
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_rejected() {
        let err = run_suites(0, Some(&["nope".to_string()])).unwrap_err();
        assert!(err.contains("nope"));
    }

    #[test]
    fn subset_runs_one_suite() {
        let out = run_suites(42, Some(&["criteria".to_string()])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].name, "criteria");
        assert!(out[0].passed());
    }

    #[test]
    fn slope_peak_location() {
        let inside = GrowthModel::bobwhite(0.5, 1.0, 1.0).unwrap();
        assert!(bobwhite_slope_peak_inside(&inside, 1));
        // x_bar^r = 0.2, far below the slope peak
        let outside = GrowthModel::bobwhite(0.5, 0.6, 0.5).unwrap();
        assert!(!bobwhite_slope_peak_inside(&outside, 1));
    }
}
