use alloc::vec::Vec;
use nalgebra::DVector;

use crate::key::VariableKey;
use crate::math;
use crate::{Error, Result};

/// 95% asymptotic efficiency under Gaussian noise, in whitened units.
pub const DEFAULT_HUBER_DELTA: f64 = 1.345;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MixtureComponent {
    pub weight: f64,
    /// Variance scale applied to the factor's noise model.
    pub variance: f64,
}

/// Robust-kernel binding of a factor.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RobustKernel {
    #[default]
    L2,
    Huber {
        delta: f64,
    },
    Cauchy {
        c: f64,
    },
    /// Residual scaled by a jointly estimated switch variable.
    SwitchLinked(VariableKey),
    /// Dynamic covariance scaling.
    Dcs {
        phi: f64,
    },
    MaxMixture(Vec<MixtureComponent>),
    /// Geman-McClure target cost for graduated non-convexity.
    Gnc {
        c: f64,
    },
}

impl RobustKernel {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self {
            RobustKernel::L2 | RobustKernel::SwitchLinked(_) => Ok(()),
            RobustKernel::Huber { delta } if !positive(*delta) => {
                Err(Error::InvalidConfig("Huber delta must be positive"))
            }
            RobustKernel::Cauchy { c } | RobustKernel::Gnc { c } if !positive(*c) => {
                Err(Error::InvalidConfig("kernel scale must be positive"))
            }
            RobustKernel::Dcs { phi } if !positive(*phi) => {
                Err(Error::InvalidConfig("DCS phi must be positive"))
            }
            RobustKernel::MaxMixture(components) => {
                if components.is_empty() {
                    return Err(Error::KernelMisuse("max-mixture needs at least one component"));
                }
                if components.iter().any(|c| !positive(c.weight) || !positive(c.variance)) {
                    return Err(Error::InvalidConfig(
                        "mixture weights and variances must be positive",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RobustKernel::L2 => "l2",
            RobustKernel::Huber { .. } => "huber",
            RobustKernel::Cauchy { .. } => "cauchy",
            RobustKernel::SwitchLinked(_) => "switch",
            RobustKernel::Dcs { .. } => "dcs",
            RobustKernel::MaxMixture(_) => "maxmix",
            RobustKernel::Gnc { .. } => "gnc",
        }
    }
}

pub fn huber_rho(z: f64, delta: f64) -> f64 {
    let a = z.abs();
    if a <= delta {
        0.5 * z * z
    } else {
        delta * a - 0.5 * delta * delta
    }
}

/// `c²/2 · ln(1 + (z/c)²)`.
pub fn cauchy_rho(z: f64, c: f64) -> f64 {
    0.5 * c * c * math::ln(1.0 + (z / c) * (z / c))
}

/// `c²·χ² / (c² + χ²)`, written in terms of the squared residual.
pub fn geman_mcclure_rho(residual_sq: f64, c: f64) -> f64 {
    let c2 = c * c;
    c2 * residual_sq / (c2 + residual_sq)
}

/// IRLS weight `ρ'(z)/z` of a weight-representable kernel.
pub fn kernel_weight(kernel: &RobustKernel, z: f64) -> Result<f64> {
    let a = z.abs();
    match kernel {
        RobustKernel::L2 => Ok(1.0),
        RobustKernel::Huber { delta } => Ok(if a <= *delta { 1.0 } else { delta / a }),
        RobustKernel::Cauchy { c } => Ok(1.0 / (1.0 + (a / c) * (a / c))),
        RobustKernel::Dcs { phi } => {
            let s = dcs_scale(a * a, *phi);
            Ok(s * s)
        }
        RobustKernel::SwitchLinked(_) => Err(Error::KernelMisuse(
            "switch constraints act through the switch variable, not a weight",
        )),
        RobustKernel::MaxMixture(_) => Err(Error::KernelMisuse(
            "max-mixture weights depend on the full residual vector",
        )),
        RobustKernel::Gnc { .. } => Err(Error::KernelMisuse(
            "GNC weights depend on the continuation parameter; use gnc_weight",
        )),
    }
}

/// Closed-form DCS scale `min(1, 2Φ/(Φ + χ²))`.
pub fn dcs_scale(residual_sq: f64, phi: f64) -> f64 {
    (2.0 * phi / (phi + residual_sq)).min(1.0)
}

/// Picks the component maximizing `w_k·N(r; 0, v_k·I)` and returns it with
/// the cost `‖r‖²/v_k + d·ln v_k − 2 ln w_k`, shifted by the smallest
/// normalizer so the cost is nonnegative.
pub fn maxmix_evaluate(residual: &DVector<f64>, components: &[MixtureComponent]) -> Result<(usize, f64)> {
    if components.is_empty() {
        return Err(Error::KernelMisuse("max-mixture needs at least one component"));
    }
    let d = residual.len() as f64;
    let chi2 = residual.norm_squared();
    let normalizer = |c: &MixtureComponent| d * math::ln(c.variance) - 2.0 * math::ln(c.weight);
    let shift = components.iter().map(normalizer).fold(f64::INFINITY, f64::min);
    let mut best = (0, f64::INFINITY);
    for (k, c) in components.iter().enumerate() {
        let cost = chi2 / c.variance + normalizer(c) - shift;
        if cost < best.1 {
            best = (k, cost);
        }
    }
    Ok(best)
}

/// Minimizer over `w ∈ [0, 1]` of `w·χ² + μc²(√w − 1)²`, the Geman-McClure
/// surrogate at continuation parameter `mu`.
pub fn gnc_weight(residual_sq: f64, mu: f64, c: f64) -> f64 {
    let mc2 = mu * c * c;
    let root = mc2 / (residual_sq + mc2);
    root * root
}

/// Cost contribution of one factor with whitened residual `r`.
///
/// L2 and switch-linked factors contribute `‖r‖²`; Huber and Cauchy
/// contribute `ρ(‖r‖)`; DCS the scaled `s²‖r‖²`; max-mixture its shifted
/// component cost; GNC the Geman-McClure target cost.
pub fn kernel_cost(kernel: &RobustKernel, residual: &DVector<f64>) -> f64 {
    let chi2 = residual.norm_squared();
    match kernel {
        RobustKernel::L2 | RobustKernel::SwitchLinked(_) => chi2,
        RobustKernel::Huber { delta } => huber_rho(math::sqrt(chi2), *delta),
        RobustKernel::Cauchy { c } => cauchy_rho(math::sqrt(chi2), *c),
        RobustKernel::Dcs { phi } => {
            let s = dcs_scale(chi2, *phi);
            s * s * chi2
        }
        RobustKernel::MaxMixture(components) => {
            maxmix_evaluate(residual, components).map(|(_, c)| c).unwrap_or(chi2)
        }
        RobustKernel::Gnc { c } => geman_mcclure_rho(chi2, *c),
    }
}

/// Loss `φ(χ²)` minimized by the solvers and its IRLS weight `dφ/dχ²`.
pub(crate) fn loss_and_weight(kernel: &RobustKernel, residual: &DVector<f64>) -> (f64, f64) {
    let chi2 = residual.norm_squared();
    match kernel {
        RobustKernel::L2 | RobustKernel::SwitchLinked(_) => (chi2, 1.0),
        RobustKernel::Huber { delta } => {
            let z = math::sqrt(chi2);
            (2.0 * huber_rho(z, *delta), if z <= *delta { 1.0 } else { delta / z })
        }
        RobustKernel::Cauchy { c } => {
            let c2 = c * c;
            (c2 * math::ln(1.0 + chi2 / c2), 1.0 / (1.0 + chi2 / c2))
        }
        RobustKernel::Dcs { phi } => {
            // Integral of s(χ²)² in χ²; equals χ² up to χ² = Φ.
            let s = dcs_scale(chi2, *phi);
            let loss = if chi2 <= *phi {
                chi2
            } else {
                3.0 * phi - 4.0 * phi * phi / (phi + chi2)
            };
            (loss, s * s)
        }
        RobustKernel::MaxMixture(components) => match maxmix_evaluate(residual, components) {
            Ok((k, cost)) => (cost, 1.0 / components[k].variance),
            Err(_) => (chi2, 1.0),
        },
        RobustKernel::Gnc { c } => (geman_mcclure_rho(chi2, *c), gnc_weight(chi2, 1.0, *c)),
    }
}

/// Switch function `Ψ(s) = clamp(s, 0, 1)` and its derivative.
pub(crate) fn switch_scale(s: f64) -> (f64, f64) {
    if s < 0.0 {
        (0.0, 0.0)
    } else if s > 1.0 {
        (1.0, 0.0)
    } else {
        (s, 1.0)
    }
}
