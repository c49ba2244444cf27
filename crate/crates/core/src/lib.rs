//! Factor-graph estimation for GNSS positioning.
//!
//! The crate models a GNSS trajectory as a bipartite graph of variables
//! (per-epoch receiver states and optional switch variables) and factors
//! (priors, motion constraints, pseudorange and carrier-phase measurements).
//! Maximum-a-posteriori estimation under Gaussian noise reduces to a sparse
//! nonlinear least-squares problem which is solved by Gauss-Newton or
//! Levenberg-Marquardt over a block-sparse normal system.
//!
//! On top of that sit the robust estimators ([`robust`]): M-estimators via
//! IRLS, switch constraints, dynamic covariance scaling, max-mixtures and
//! graduated non-convexity. [`window`] provides fixed-lag smoothing with
//! square-root-information marginalization and [`ekf`] a standard and
//! iterated EKF baseline over the same measurement models. [`sim`] generates
//! synthetic scenarios with labelled multipath outliers.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ekf;
mod error;
pub mod factor;
pub mod graph;
pub mod key;
pub(crate) mod math;
pub mod models;
pub mod noise;
pub mod robust;
pub mod sim;
pub mod solver;
pub mod state;
pub mod window;

pub use error::{Error, Result};
pub use factor::{Factor, FactorId, FactorKind};
pub use graph::{FactorGraph, FactorRows, LinearizedSystem};
pub use key::{SatId, VariableKey, VariableKind};
pub use noise::Gaussian;
pub use robust::RobustKernel;
pub use solver::{SolveReport, SolverOptions};
pub use state::{EpochState, Value, Values};
