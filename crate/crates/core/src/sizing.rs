//! Closed-form battery sizing.
//!
//! Given the arrival ratio `gamma` and acceptable depletion/overflow
//! probabilities `(alpha, beta)`, the minimal real-valued capacities are
//!
//! ```text
//! K_alpha = ln((1-gamma)/alpha) / ln((1-alpha)/gamma)
//! K_beta  = ln((z+beta-1)/beta) / ln(z) - 1,    z = gamma/(1-alpha)
//! ```
//!
//! with removable special cases `K_alpha = 1/alpha - 1` at `gamma = 1-alpha`
//! and `K_beta = 1/beta - 1` at `z = 1`. `K_beta` only exists when
//! `(1-alpha)(1-beta) < gamma`; below that, `beta` is under its lower bound
//! `1-z` and no capacity can meet it. Which constraint binds is decided by
//! the sign of `beta + gamma - 1`: below one the overflow constraint needs
//! the larger battery, above one the depletion constraint does.

use serde::Serialize;
use thiserror::Error;

/// Relative width of the removable-singularity branch switches
/// (`gamma = 1-alpha` for `K_alpha`, `z = 1` for `K_beta`).
pub const BRANCH_EPS: f64 = 1e-9;
/// Half-width of the tie band on `beta + gamma - 1`.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SizingError {
    #[error(
        "overflow target beta={beta} is unachievable at gamma={gamma}, alpha={alpha}: \
         beta must exceed its lower bound {beta_lower_bound}"
    )]
    InfeasibleOverflowTarget {
        gamma: f64,
        alpha: f64,
        beta: f64,
        beta_lower_bound: f64,
    },
    #[error("gamma must lie in (0, 1), got {gamma}")]
    GammaNotLessThanOne { gamma: f64 },
    #[error("{name} must lie in (0, 1), got {value}")]
    TargetOutOfRange { name: &'static str, value: f64 },
}

/// Acceptable long-run depletion (`alpha`) and overflow (`beta`)
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignTargets {
    alpha: f64,
    beta: f64,
}

impl DesignTargets {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, SizingError> {
        for (name, value) in [("alpha", alpha), ("beta", beta)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(SizingError::TargetOutOfRange { name, value });
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Which of the two probability targets forces the larger battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingConstraint {
    Depletion,
    Overflow,
    Tie,
}

impl std::fmt::Display for BindingConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BindingConstraint::Depletion => write!(f, "depletion"),
            BindingConstraint::Overflow => write!(f, "overflow"),
            BindingConstraint::Tie => write!(f, "tie"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizingResult {
    /// Real-valued capacity meeting the depletion target.
    pub k_alpha_real: Option<f64>,
    /// Real-valued capacity meeting the overflow target, when feasible.
    pub k_beta_real: Option<f64>,
    /// Integer capacity: ceiling of the binding real value.
    pub capacity: u32,
    pub binding: BindingConstraint,
}

fn check_gamma(gamma: f64) -> Result<(), SizingError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(SizingError::GammaNotLessThanOne { gamma })
    }
}

/// Real-valued capacity at which the depletion probability equals `alpha`.
pub fn k_alpha(gamma: f64, alpha: f64) -> f64 {
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let pivot = 1.0 - alpha;
    if (gamma - pivot).abs() < BRANCH_EPS * pivot {
        1.0 / alpha - 1.0
    } else {
        ((1.0 - gamma) / alpha).ln() / ((1.0 - alpha) / gamma).ln()
    }
}

/// Real-valued capacity at which the overflow probability equals `beta`,
/// or an error when `beta` is below its lower bound `1 - z`.
pub fn k_beta(gamma: f64, alpha: f64, beta: f64) -> Result<f64, SizingError> {
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    debug_assert!(beta > 0.0 && beta < 1.0);
    let z = gamma / (1.0 - alpha);
    if (z - 1.0).abs() < BRANCH_EPS {
        return Ok(1.0 / beta - 1.0);
    }
    if z + beta <= 1.0 {
        return Err(SizingError::InfeasibleOverflowTarget {
            gamma,
            alpha,
            beta,
            beta_lower_bound: 1.0 - z,
        });
    }
    Ok(((z + beta - 1.0) / beta).ln() / z.ln() - 1.0)
}

/// Which constraint binds, from the sign of `beta + gamma - 1`.
pub fn binding_constraint(gamma: f64, beta: f64) -> BindingConstraint {
    let s = beta + gamma - 1.0;
    if s.abs() <= TIE_EPS {
        BindingConstraint::Tie
    } else if s < 0.0 {
        BindingConstraint::Overflow
    } else {
        BindingConstraint::Depletion
    }
}

/// Integer capacity from a real-valued solution: the ceiling, with values
/// within 1e-9 of an integer snapped first so the exact-integer special
/// cases are not bumped by floating-point noise.
fn ceil_capacity(k_real: f64) -> u32 {
    let snapped = if (k_real - k_real.round()).abs() < 1e-9 {
        k_real.round()
    } else {
        k_real.ceil()
    };
    snapped.max(1.0) as u32
}

/// Minimal integer battery capacity meeting both targets: the overflow
/// formula decides when `beta + gamma < 1`, the depletion formula otherwise.
pub fn size_battery(gamma: f64, targets: &DesignTargets) -> Result<SizingResult, SizingError> {
    check_gamma(gamma)?;
    let binding = binding_constraint(gamma, targets.beta());
    let ka = k_alpha(gamma, targets.alpha());
    match binding {
        BindingConstraint::Overflow => {
            let kb = k_beta(gamma, targets.alpha(), targets.beta())?;
            Ok(SizingResult {
                k_alpha_real: Some(ka),
                k_beta_real: Some(kb),
                capacity: ceil_capacity(kb),
                binding,
            })
        }
        BindingConstraint::Depletion | BindingConstraint::Tie => {
            // The overflow value is informational here; report it when it
            // exists but never fail on it.
            let kb = k_beta(gamma, targets.alpha(), targets.beta()).ok();
            Ok(SizingResult {
                k_alpha_real: Some(ka),
                k_beta_real: kb,
                capacity: ceil_capacity(ka),
                binding,
            })
        }
    }
}

/// Convenience wrapper deriving `gamma` from node rates.
pub fn size_battery_for_rates(
    rates: &crate::queue_analytics::NodeRates,
    targets: &DesignTargets,
) -> Result<SizingResult, SizingError> {
    size_battery(rates.gamma(), targets)
}

/// Physical capacity of `capacity` energy packets of `ep_size` units each.
/// The unit is whatever `ep_size` is expressed in; it is not interpreted.
pub fn to_physical_capacity(capacity: u32, ep_size: f64) -> f64 {
    assert!(capacity >= 1, "capacity must be >= 1");
    assert!(ep_size > 0.0, "ep_size must be positive");
    capacity as f64 * ep_size
}
