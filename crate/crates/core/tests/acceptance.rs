//! Acceptance criteria, one `[PASS]`/`[FAIL]` line each.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::collections::HashMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use delaypop::analysis::{
    check_contraction, closed_form_l, estimate_log_lipschitz, persistence_envelope,
    three_halves_check, DEFAULT_GRID_SIZE,
};
use delaypop::model::GrowthModel;
use delaypop::simulate::{detect_oscillation, iterate, random_histories, tail_stats};
use delaypop::verify::{
    bobwhite_slope_peak_inside, random_bobwhite, random_pielou, scaling_deviation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_060_116;

struct Outcome {
    ok: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn delaypop(args: &[&str]) -> (std::process::Output, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_delaypop"))
        .args(args)
        .output()
        .expect("spawn delaypop");
    (out, start.elapsed())
}

fn close(kv: &HashMap<&str, &str>, key: &str, want: f64, tol: f64) -> Result<(), String> {
    let got: f64 = kv
        .get(key)
        .ok_or_else(|| format!("{key} missing"))?
        .parse()
        .map_err(|_| format!("{key} not numeric"))?;
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{key}={got}, want {want} +/- {tol}"))
    }
}

fn bobwhite_reproduction() -> Outcome {
    let (out, elapsed) = delaypop(&[
        "analyze", "--model", "bobwhite", "--alpha", "0.5", "--beta", "1", "--r", "1", "--m", "1",
    ]);
    if !out.status.success() {
        return outcome(false, String::from_utf8_lossy(&out.stderr));
    }
    let text = String::from_utf8(out.stdout).unwrap();
    let kv: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let checks = [
        close(&kv, "graef_r_max", 3.265545, 1e-5),
        close(&kv, "liz_r_max", 3.5, 1e-9),
        close(&kv, "L_paper", 0.2679492, 1e-6),
        close(&kv, "q", 0.169873, 1e-5),
        if kv.get("thm3_paper") == Some(&"true") {
            Ok(())
        } else {
            Err("thm3_paper".into())
        },
        if elapsed < Duration::from_secs(1) {
            Ok(())
        } else {
            Err(format!("{elapsed:?}"))
        },
    ];
    let errors: Vec<String> = checks.into_iter().filter_map(Result::err).collect();
    outcome(
        errors.is_empty(),
        format!("{elapsed:.2?} {}", errors.join("; ")),
    )
}

fn convergence_from_fixed_histories() -> Outcome {
    let model = GrowthModel::bobwhite(0.5, 1.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for history in [[0.3, 0.4], [2.0, 0.1], [1.5, 1.5]] {
        let start = Instant::now();
        let trace = iterate(&model, 1, &history, 100_000).unwrap();
        let dev = trace.log_values()[trace.log_values().len() - 100..]
            .iter()
            .map(|y| (y - model.x_bar().ln()).abs())
            .fold(0.0, f64::max);
        slowest = slowest.max(start.elapsed());
        worst = worst.max(dev);
    }
    outcome(
        worst <= 1e-6 && slowest < Duration::from_secs(1),
        format!("max |ln(A/x_bar)| {worst:.1e}, slowest {slowest:.2?}"),
    )
}

fn envelope_and_bracketing() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut failures, mut bracketed) = (Vec::new(), 0);
    for _ in 0..100 {
        let model = random_bobwhite(&mut rng);
        let m = rng.gen_range(0..=3);
        let env = persistence_envelope(&model, m);
        for history in random_histories(model.x_bar(), m, 3, &mut rng) {
            let trace = iterate(&model, m, &history, 20_000).unwrap();
            let tail = tail_stats(&trace, 10_000).unwrap();
            if !env.contains(tail.tail_min, tail.tail_max) {
                failures.push(format!("{model} m={m}: outside envelope"));
            }
            let osc = detect_oscillation(&trace, model.x_bar());
            if osc.crossings_from(tail.estimate_from) > 0 {
                bracketed += 1;
                let x_bar = model.x_bar();
                if !(tail.liminf_est <= x_bar && x_bar <= tail.limsup_est) {
                    failures.push(format!("{model} m={m}: x_bar not bracketed"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "300 orbits, {bracketed} bracket checks, {elapsed:.2?} {}",
            failures.join("; ")
        ),
    )
}

fn bobwhite_closed_form_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut draws, mut worst) = (0, 0.0f64);
    while draws < 20 {
        let model = random_bobwhite(&mut rng);
        if !bobwhite_slope_peak_inside(&model, 1) {
            continue;
        }
        draws += 1;
        let est = estimate_log_lipschitz(&model, 1, DEFAULT_GRID_SIZE).unwrap();
        let closed = closed_form_l(&model);
        worst = worst.max((est.l_hat - closed).abs() / closed);
    }
    outcome(worst <= 0.01, format!("worst relative error {worst:.2e}"))
}

fn pielou_discrepancy() -> Outcome {
    let model = GrowthModel::pielou(3.0, 1.0).unwrap();
    let est = estimate_log_lipschitz(&model, 1, DEFAULT_GRID_SIZE).unwrap();
    let closed = closed_form_l(&model);
    let by_closed = three_halves_check(closed, 1).holds;
    let by_grid = three_halves_check(est.l_hat, 1).holds;
    outcome(
        est.l_hat >= 0.9 && closed == 0.5 && by_closed && !by_grid,
        format!(
            "L_hat {:.6}, L {closed}, closed {by_closed}, numeric {by_grid}",
            est.l_hat
        ),
    )
}

fn contraction_rate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut models, mut cycles, mut violations) = (0, 0, Vec::new());
    while models < 20 {
        let model = random_bobwhite(&mut rng);
        let m = rng.gen_range(0..=2);
        let est = estimate_log_lipschitz(&model, m, DEFAULT_GRID_SIZE).unwrap();
        let Some(q) = three_halves_check(est.l_hat, m).q else {
            continue;
        };
        models += 1;
        for history in random_histories(model.x_bar(), m, 3, &mut rng) {
            let trace = iterate(&model, m, &history, 5_000).unwrap();
            let check = check_contraction(&detect_oscillation(&trace, model.x_bar()), q);
            cycles += check.cycles_checked;
            if let Some(v) = check.violations.first() {
                violations.push(format!("{model} m={m}: cycle {} {} -> {}", v.0, v.1, v.2));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{cycles} cycles checked {}", violations.join("; ")),
    )
}

fn scaling_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let model = random_pielou(&mut rng);
        let delaypop::model::Params::Pielou { beta, lambda } = model.params() else {
            unreachable!()
        };
        let m = rng.gen_range(0..=3);
        let history = &random_histories(model.x_bar(), m, 1, &mut rng)[0];
        worst = worst.max(scaling_deviation(beta, lambda, m, history, 1_000));
    }
    outcome(
        worst <= 1e-12,
        format!("worst relative deviation {worst:.1e}"),
    )
}

fn sweep_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/boundary_sweep.json"
    );
    let mut csvs = Vec::new();
    for jobs in ["1", "8"] {
        let path = dir.path().join(format!("jobs{jobs}.csv"));
        let (out, _) = delaypop(&[
            "sweep",
            "--config",
            config,
            "--out",
            path.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        if !out.status.success() {
            return outcome(false, String::from_utf8_lossy(&out.stderr));
        }
        csvs.push(std::fs::read(&path).unwrap());
    }
    if csvs[0] != csvs[1] {
        return outcome(false, "CSV differs between --jobs 1 and --jobs 8");
    }
    let text = String::from_utf8(csvs.swap_remove(0)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (r, m, graef, liz) = (col("r"), col("m"), col("graef_ok"), col("liz_ok"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let verdict = |r_val: &str, c: usize| {
        rows.iter()
            .find(|row| row[m] == "0" && row[r] == r_val)
            .map(|row| row[c])
    };
    let flips = [
        verdict("7", graef) == Some("true"),
        verdict("7.5", graef) == Some("false"),
        verdict("7.5", liz) == Some("true"),
        verdict("8", liz) == Some("false"),
    ];
    outcome(
        rows.len() == 48 && flips.iter().all(|&f| f),
        format!("{} rows, flips {flips:?}", rows.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "bobwhite reference values from analyze",
            bobwhite_reproduction,
        ),
        (
            "convergence from three fixed histories",
            convergence_from_fixed_histories,
        ),
        (
            "persistence envelope and x_bar bracketing",
            envelope_and_bracketing,
        ),
        (
            "bobwhite grid estimate matches closed form",
            bobwhite_closed_form_agreement,
        ),
        (
            "pielou closed form and grid estimate disagree",
            pielou_discrepancy,
        ),
        ("per-cycle contraction rate", contraction_rate),
        ("pielou scaling equivariance", scaling_equivariance),
        ("sweep determinism and boundary flips", sweep_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let tag = if result.ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {} {name}: {}", i + 1, result.detail.trim_end());
        failed += usize::from(!result.ok);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
