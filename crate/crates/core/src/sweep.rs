//! Deterministic parameter-grid studies.
//!
//! A [`SweepConfig`] spans one or two parameter axes plus a list of delays.
//! Every cell is classified with simulation; invalid parameter points are
//! kept as skipped rows. Cells are independent, so they are spread over a
//! worker pool, and rows are emitted in row-major order (first axis
//! outermost, delay innermost) whatever the completion order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    self, classify, AnalysisError, ClassifyOptions, HistorySource, SimOptions, StabilityReport,
    CSV_HEADER, DEFAULT_GRID_SIZE, REPORT_DIGITS,
};
use crate::model::{Family, GrowthModel, ModelError};
use crate::numfmt::fmt_opt;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("every cell of the grid lies outside the {0} parameter domain")]
    AllCellsInvalid(Family),
    #[error("cell {index}: {source}")]
    Cell {
        index: usize,
        #[source]
        source: AnalysisError,
    },
    #[error("cannot parse sweep configuration: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    /// Grid values with both ends hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let last = self.count - 1;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == last {
                    return self.max;
                }
                let t = i as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * t).exp(),
                }
            })
            .collect()
    }
}

/// `"default"` or an explicit list of histories (oldest value first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistorySpec {
    Keyword(String),
    Explicit(Vec<Vec<f64>>),
}

impl Default for HistorySpec {
    fn default() -> Self {
        HistorySpec::Keyword("default".to_string())
    }
}

/// Number of seeded histories per cell when none are given.
pub const DEFAULT_HISTORIES_PER_CELL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSim {
    pub n_steps: usize,
    pub burn_in: usize,
    pub tolerance: f64,
    pub window: usize,
    pub histories: HistorySpec,
}

impl Default for SweepSim {
    fn default() -> Self {
        let d = SimOptions::default();
        SweepSim {
            n_steps: d.n_steps,
            burn_in: d.burn_in,
            tolerance: d.tol,
            window: d.window,
            histories: HistorySpec::default(),
        }
    }
}

fn default_m() -> Vec<usize> {
    vec![0]
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: Family,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub axes: Vec<Axis>,
    #[serde(default = "default_m")]
    pub m: Vec<usize>,
    #[serde(default)]
    pub sim: SweepSim,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        Ok(serde_json::from_str(text)?)
    }

    fn param_names(&self) -> &'static [&'static str] {
        match self.family {
            Family::Bobwhite => &["alpha", "beta", "r"],
            Family::Pielou => &["beta", "lambda"],
        }
    }

    fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::Config(msg));
        let names = self.param_names();
        if self.axes.is_empty() || self.axes.len() > 2 {
            return bad(format!("expected 1 or 2 axes, got {}", self.axes.len()));
        }
        for axis in &self.axes {
            if !names.contains(&axis.param.as_str()) {
                return bad(format!("{} has no parameter `{}`", self.family, axis.param));
            }
            if axis.count < 2 {
                return bad(format!("axis `{}` needs count >= 2", axis.param));
            }
            if !(axis.min.is_finite() && axis.max.is_finite()) {
                return bad(format!("axis `{}` bounds must be finite", axis.param));
            }
            if axis.spacing == Spacing::Log && !(axis.min > 0.0 && axis.max > 0.0) {
                return bad(format!("log axis `{}` needs positive bounds", axis.param));
            }
            if self.fixed.contains_key(&axis.param) {
                return bad(format!("`{}` is both fixed and an axis", axis.param));
            }
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return bad(format!("axis `{}` given twice", self.axes[0].param));
        }
        for name in self.fixed.keys() {
            if !names.contains(&name.as_str()) {
                return bad(format!("{} has no parameter `{name}`", self.family));
            }
        }
        for name in names {
            if !self.fixed.contains_key(*name) && !self.axes.iter().any(|a| a.param == *name) {
                return bad(format!("parameter `{name}` is neither fixed nor an axis"));
            }
        }
        if self.m.is_empty() {
            return bad("delay list `m` is empty".to_string());
        }
        if self.sim.n_steps == 0 || self.sim.burn_in >= self.sim.n_steps {
            return bad("sim.burn_in must be below sim.n_steps".to_string());
        }
        if self.sim.window == 0 || self.sim.window > self.sim.n_steps {
            return bad("sim.window must lie in 1..=sim.n_steps".to_string());
        }
        match &self.sim.histories {
            HistorySpec::Keyword(k) if k == "default" => {}
            HistorySpec::Keyword(k) => return bad(format!("unknown histories keyword `{k}`")),
            HistorySpec::Explicit(hs) => {
                if hs.is_empty() {
                    return bad("explicit history list is empty".to_string());
                }
                for &m in &self.m {
                    if let Some(h) = hs.iter().find(|h| h.len() != m + 1) {
                        return bad(format!(
                            "history of length {} does not fit m = {m}",
                            h.len()
                        ));
                    }
                }
            }
        }
        if self.grid_size < analysis::MIN_GRID_SIZE {
            return bad(format!(
                "grid_size must be at least {}",
                analysis::MIN_GRID_SIZE
            ));
        }
        Ok(())
    }
}

/// One grid cell: a parameter point and a delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    /// Index of the parameter point, shared by all delays at that point.
    pub point: usize,
    pub params: BTreeMap<String, f64>,
    pub m: usize,
}

impl Cell {
    fn model(&self, family: Family) -> Result<GrowthModel, ModelError> {
        let p = |k: &str| self.params[k];
        match family {
            Family::Bobwhite => GrowthModel::bobwhite(p("alpha"), p("beta"), p("r")),
            Family::Pielou => GrowthModel::pielou(p("beta"), p("lambda")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepRow {
    Evaluated {
        cell: Cell,
        report: Box<StabilityReport>,
    },
    Skipped {
        cell: Cell,
        reason: ModelError,
    },
}

impl SweepRow {
    pub fn cell(&self) -> &Cell {
        match self {
            SweepRow::Evaluated { cell, .. } | SweepRow::Skipped { cell, .. } => cell,
        }
    }

    pub fn report(&self) -> Option<&StabilityReport> {
        match self {
            SweepRow::Evaluated { report, .. } => Some(report),
            SweepRow::Skipped { .. } => None,
        }
    }

    fn csv_line(&self, family: Family) -> String {
        match self {
            SweepRow::Evaluated { report, .. } => report.csv_row(),
            SweepRow::Skipped { cell, .. } => {
                let p = |k: &str| fmt_opt(cell.params.get(k).copied(), REPORT_DIGITS);
                format!(
                    "{},{},{},{},{},{},,,,,,,,,,,,,true",
                    family.name(),
                    p("alpha"),
                    p("beta"),
                    p("r"),
                    p("lambda"),
                    cell.m
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn evaluated(&self) -> impl Iterator<Item = &StabilityReport> {
        self.rows.iter().filter_map(SweepRow::report)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.csv_line(self.config.family));
        }
        out
    }

    /// Cases where a classical bound holds at some delay but fails at a
    /// smaller one at the same parameter point. Always empty in exact
    /// arithmetic, since `(3m + 4) / (2 (m + 1)^2)` decreases in `m`.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let mut by_point: BTreeMap<usize, Vec<&StabilityReport>> = BTreeMap::new();
        for row in &self.rows {
            if let Some(r) = row.report() {
                by_point.entry(row.cell().point).or_default().push(r);
            }
        }
        let mut out = Vec::new();
        for (point, reports) in by_point {
            for hi in &reports {
                for lo in reports.iter().filter(|r| r.m < hi.m) {
                    if hi.graef_ok() == Some(true) && lo.graef_ok() != Some(true) {
                        out.push(format!(
                            "point {point}: graef holds at m={} not m={}",
                            hi.m, lo.m
                        ));
                    }
                    if hi.liz_ok() == Some(true) && lo.liz_ok() != Some(true) {
                        out.push(format!(
                            "point {point}: liz holds at m={} not m={}",
                            hi.m, lo.m
                        ));
                    }
                }
            }
        }
        out
    }
}

fn cells(config: &SweepConfig) -> Vec<Cell> {
    let axes: Vec<(String, Vec<f64>)> = config
        .axes
        .iter()
        .map(|a| (a.param.clone(), a.values()))
        .collect();
    let mut points: Vec<BTreeMap<String, f64>> = vec![config.fixed.clone()];
    for (name, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(name.clone(), v);
                    q
                })
            })
            .collect();
    }
    let mut out = Vec::with_capacity(points.len() * config.m.len());
    for (point, params) in points.into_iter().enumerate() {
        for &m in &config.m {
            out.push(Cell {
                index: out.len(),
                point,
                params: params.clone(),
                m,
            });
        }
    }
    out
}

/// splitmix64 finaliser; decorrelates per-cell seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_options(config: &SweepConfig, cell: &Cell) -> ClassifyOptions {
    let histories = match &config.sim.histories {
        HistorySpec::Explicit(hs) => HistorySource::Explicit(hs.clone()),
        HistorySpec::Keyword(_) => HistorySource::Random {
            count: DEFAULT_HISTORIES_PER_CELL,
            seed: mix(config.seed ^ mix(cell.index as u64)),
        },
    };
    ClassifyOptions {
        grid_size: config.grid_size,
        simulation: Some(SimOptions {
            n_steps: config.sim.n_steps,
            burn_in: config.sim.burn_in,
            tol: config.sim.tolerance,
            window: config.sim.window,
            histories,
        }),
    }
}

fn evaluate(config: &SweepConfig, cell: Cell) -> Result<SweepRow, SweepError> {
    match cell.model(config.family) {
        Err(reason) => Ok(SweepRow::Skipped { cell, reason }),
        Ok(model) => {
            let report =
                classify(&model, cell.m, &cell_options(config, &cell)).map_err(|source| {
                    SweepError::Cell {
                        index: cell.index,
                        source,
                    }
                })?;
            Ok(SweepRow::Evaluated {
                cell,
                report: Box::new(report),
            })
        }
    }
}

/// Evaluates every cell on `jobs` worker threads (at least one). The result
/// does not depend on `jobs`.
pub fn run_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepResult, SweepError> {
    config.validate()?;
    let cells = cells(config);
    let jobs = jobs.clamp(1, cells.len().max(1));

    let next = AtomicUsize::new(0);
    let mut results: Vec<(usize, Result<SweepRow, SweepError>)> = thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(cell) = cells.get(i) else { break };
                        done.push((i, evaluate(config, cell.clone())));
                    }
                    done
                })
            })
            .collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("sweep worker panicked"))
            .collect()
    });
    results.sort_by_key(|(i, _)| *i);

    let rows = results
        .into_iter()
        .map(|(_, r)| r)
        .collect::<Result<Vec<_>, _>>()?;
    if rows.iter().all(|r| r.report().is_none()) {
        return Err(SweepError::AllCellsInvalid(config.family));
    }
    Ok(SweepResult {
        config: config.clone(),
        rows,
    })
}
