//! Simulation and stability analysis for the delayed population model
//!
//! ```text
//! A[n+1] = A[n] F(A[n-m]),   n = 0, 1, 2, ...
//! ```
//!
//! where `F` is a strictly decreasing growth factor with a unique positive
//! equilibrium `x_bar`, `F(x_bar) = 1`.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: the bobwhite and Pielou families, equilibria and bounds.
//! * [`simulate`]: log-coordinate iteration, tail statistics, convergence
//!   and oscillation detection.
//! * [`analysis`]: the persistence envelope, the log-Lipschitz constant, the
//!   3/2-condition and the classical bobwhite bounds, gathered by
//!   [`analysis::classify`] into a [`analysis::StabilityReport`].
//! * [`sweep`]: deterministic parameter grids over a worker pool.
//! * [`cli`], [`plot`], [`verify`]: the `delaypop` binary.
//!
//! ```
//! use delaypop::analysis::{classify, ClassifyOptions};
//! use delaypop::model::GrowthModel;
//!
//! let model = GrowthModel::bobwhite(0.5, 1.0, 1.0).unwrap();
//! let report = classify(&model, 1, &ClassifyOptions::default()).unwrap();
//! assert!(report.three_halves_closed.holds && report.three_halves_numeric.holds);
//! assert_eq!(report.liz_r_max, Some(3.5));
//! assert!(report.simulation.unwrap().converged);
//! ```
//!
//! A longer walk-through lives in the guide under `book/`.

pub mod analysis;
pub mod cli;
pub mod model;
pub mod numfmt;
pub mod plot;
pub mod simulate;
pub mod sweep;
pub mod verify;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/models.md")]
    pub struct Models;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/persistence.md")]
    pub struct Persistence;
    #[doc = include_str!("../../../book/src/lipschitz.md")]
    pub struct Lipschitz;
    #[doc = include_str!("../../../book/src/stability.md")]
    pub struct Stability;
    #[doc = include_str!("../../../book/src/sweeps.md")]
    pub struct Sweeps;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
