//! Input-constrained funnel control for systems of the form
//! `y^{(r)} = f(d(t), T(y, ẏ, …, y^{(r-1)})(t), u(t))` with `u = sat(v)`.
//!
//! The crate is organised around the closed loop:
//!
//! * [`controller`], [`chain`], [`saturation`], [`surjection`], [`params`]:
//!   the control law and its design parameters.
//! * [`plant`]: the mass-on-car benchmark, causal operators and generic
//!   functional plants.
//! * [`ode`]: an adaptive Dormand–Prince 5(4) integrator with dense output.
//! * [`sim`]: assembles plant, reference and controller into one ODE and
//!   records trajectories.
//! * [`bounds`]: checks the guaranteed properties along recorded trajectories.
//! * [`scenario`], [`report`]: scenario files, built-in scenarios, CSV and
//!   report serialisation.
//!
//! A guided tour with runnable listings lives in the `book/` directory.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::result_large_err
)]

pub mod bounds;
pub mod chain;
pub mod controller;
pub mod ode;
pub mod params;
pub mod plant;
pub mod report;
pub mod saturation;
pub mod scenario;
pub mod sim;
pub mod surjection;

pub use chain::ErrorChain;
pub use controller::{ControllerOutput, FunnelController};
pub use params::{ControllerParams, ParamErrors, ParamViolation};
pub use saturation::{SaturationKind, SaturationSpec};
pub use surjection::Surjection;

/// Errors raised while evaluating the control law.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    /// `‖e_r‖` reached `ψ`; the current trial point lies outside the funnel.
    #[error("funnel violated: ‖e_r‖ = {norm} ≥ ψ = {psi}")]
    FunnelViolation { norm: f64, psi: f64 },
    /// Saturation active although `‖e_r‖` is numerically zero.
    #[error("degenerate funnel ratio: κ = {kappa} with ‖e_r‖ = {norm}")]
    DegenerateRatio { kappa: f64, norm: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Euclidean norm.
#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}
