//! Robust estimation: M-estimator kernels solved by IRLS, switch
//! constraints, dynamic covariance scaling, max-mixtures and graduated
//! non-convexity.
//!
//! Internally every kernel is expressed as a loss `φ(χ²)` of the whitened
//! squared residual `χ² = ‖r‖²`, normalised so `φ(χ²) = χ²` for small
//! residuals. Its IRLS weight is `dφ/dχ²`, which equals `ρ'(z)/z` for the
//! classic `ρ(z)` form (Huber `ρ(z) = z²/2` near zero and `φ = 2ρ`).

mod kernels;
mod solve;
mod switch;

pub use kernels::{
    cauchy_rho, dcs_scale, geman_mcclure_rho, gnc_weight, huber_rho, kernel_cost, kernel_weight,
    maxmix_evaluate, MixtureComponent, RobustKernel, DEFAULT_HUBER_DELTA,
};
pub(crate) use kernels::{loss_and_weight, switch_scale};
pub use solve::{gnc_solve, irls_solve, robust_weights, GncReport, GncSchedule};
pub use switch::{augment_with_switches, SwitchConfig};
