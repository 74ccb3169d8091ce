//! Adaptive batch-size SGD.
//!
//! The crate sizes each mini-batch of a stochastic gradient method with one of
//! two variance tests:
//!
//! - the **norm test**, `tr Σ / b ≤ ε² ‖∇F‖²`;
//! - the **inner-product/orthogonality test**, which splits the same error into
//!   the component along `∇F` (`Σ:P∇ / b ≤ θ² ‖∇F‖²`) and the component
//!   orthogonal to it (`Σ:P⊥ / b ≤ ν² ‖∇F‖²`).
//!
//! With `ε² = θ² + ν²` and `θ²/ν² = Σ:P∇ / Σ:P⊥` both tests ask for the same
//! number of samples. [`batch::optimal_split`] computes that split.
//!
//! Modules, bottom up:
//!
//! - [`linalg`]: small symmetric matrices, projectors, the error split.
//! - [`objectives`]: the [`StochasticObjective`] trait and two quadratic test problems.
//! - [`batch`]: the tests, their sample sizes, step size and rate bound.
//! - [`sgd`]: the SGD loop with cost accounting.
//! - [`experiment`]: replicated runs, percentile bands, CSV/SVG output.
//! - [`verify`]: the numerical checks run by `adabatch verify`.
//! - [`cli`]: the `adabatch` command line.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example <name>`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod objectives;
pub mod sampling;
pub mod sgd;
pub mod verify;

pub use batch::{BatchDecision, BatchLimits, DecisionMode, GradientBatchStats, ToleranceConfig};
pub use error::{Error, Result};
pub use linalg::{ErrorSplit, ProjectorPair, SymMatrix, Vector};
pub use objectives::{Quadratic2, Quadratic3, Smoothness, StochasticObjective};
pub use sgd::{run_sgd, Controller, ControllerKind, RunRecord, SgdConfig, Termination};
