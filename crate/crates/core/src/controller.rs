//! The input-constrained funnel controller.
//!
//! ```text
//! e_1 = e,  e_{i+1} = ė_i + k_i e_i
//! ψ̇ = −αψ + β + ψ·κ(v)/‖e_r‖
//! κ(v) = ‖v − sat(v)‖
//! k = 1 / (1 − ‖e_r‖²/ψ²)
//! v = N(k)·e_r
//! ```
//!
//! `ψ` widens while the saturation is active and relaxes towards `β/α`
//! otherwise. The funnel ODE is part of the closed loop, so this module only
//! evaluates the right-hand side; integrating `ψ` is the simulator's job.

use crate::chain::ErrorChain;
use crate::params::{ControllerParams, ParamErrors};
use crate::saturation::{saturation_defect, SaturationSpec};
use crate::surjection::Surjection;
use crate::{norm, ControlError};

/// Relative margin below `ψ` at which the funnel boundary counts as reached.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

/// Below this `‖e_r‖` the quotient `κ/‖e_r‖` is not evaluated.
pub const RATIO_GUARD: f64 = 1e-12;

/// `k = 1/(1 − ‖e_r‖²/ψ²)`.
///
/// Fails with [`ControlError::FunnelViolation`] once `‖e_r‖ ≥ ψ(1 − 10⁻¹²)`,
/// which the integrator treats as a rejected trial step.
pub fn gain(e_r: &[f64], psi: f64) -> Result<f64, ControlError> {
    gain_from_norm(norm(e_r), psi)
}

pub(crate) fn gain_from_norm(n: f64, psi: f64) -> Result<f64, ControlError> {
    if !(psi > 0.0) || !(n < psi * (1.0 - BOUNDARY_MARGIN)) {
        return Err(ControlError::FunnelViolation { norm: n, psi });
    }
    let q = n / psi;
    Ok(1.0 / (1.0 - q * q))
}

/// `v = N(k)·e_r`, written into `v`.
pub fn control_signal(e_r: &[f64], k: f64, n: &Surjection, v: &mut [f64]) {
    let g = n.eval(k);
    for (vi, &ei) in v.iter_mut().zip(e_r) {
        *vi = g * ei;
    }
}

/// `ψ̇ = −αψ + β + ψ·κ/‖e_r‖`, with the quotient taken as zero when `κ = 0`.
pub fn funnel_derivative(
    psi: f64,
    e_r_norm: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64, ControlError> {
    let ratio = if kappa == 0.0 {
        0.0
    } else if e_r_norm <= RATIO_GUARD {
        return Err(ControlError::DegenerateRatio {
            kappa,
            norm: e_r_norm,
        });
    } else {
        kappa / e_r_norm
    };
    Ok(-alpha * psi + beta + psi * ratio)
}

/// Everything the controller produces at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    pub chain: ErrorChain,
    /// Unsaturated control `v`.
    pub v: Vec<f64>,
    /// Applied input `u = sat(v)`.
    pub u: Vec<f64>,
    pub kappa: f64,
    pub k: f64,
    pub psi_dot: f64,
}

impl ControllerOutput {
    pub fn e_r_norm(&self) -> f64 {
        norm(self.chain.last())
    }
}

/// Validated parameters plus the saturation the loop is subject to.
#[derive(Debug, Clone, PartialEq)]
pub struct FunnelController {
    params: ControllerParams,
    saturation: SaturationSpec,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Params(#[from] ParamErrors),
    #[error("saturation level must be positive and finite, got {0}")]
    Saturation(f64),
}

impl FunnelController {
    pub fn new(params: ControllerParams, saturation: SaturationSpec) -> Result<Self, SetupError> {
        params.validate()?;
        if !saturation.is_valid() {
            return Err(SetupError::Saturation(saturation.level));
        }
        Ok(Self { params, saturation })
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn saturation(&self) -> &SaturationSpec {
        &self.saturation
    }

    pub fn order(&self) -> usize {
        self.params.order()
    }

    pub fn outputs(&self) -> usize {
        self.params.m
    }

    /// Evaluates the full law from `(e, ė, …, e^{(r-1)})` and the current `ψ`.
    pub fn step(&self, err_derivs: &[Vec<f64>], psi: f64) -> Result<ControllerOutput, ControlError> {
        let chain = ErrorChain::build(err_derivs, &self.params.gains)?;
        if chain.last().len() != self.params.m {
            return Err(ControlError::DimensionMismatch {
                what: "output dimension",
                expected: self.params.m,
                found: chain.last().len(),
            });
        }
        let n = norm(chain.last());
        let k = gain_from_norm(n, psi)?;
        let mut v = vec![0.0; self.params.m];
        control_signal(chain.last(), k, &self.params.surjection, &mut v);
        let u = self.saturation.saturate(&v);
        let kappa = saturation_defect(&v, &u);
        let psi_dot = funnel_derivative(psi, n, kappa, self.params.alpha, self.params.beta)?;
        Ok(ControllerOutput {
            chain,
            v,
            u,
            kappa,
            k,
            psi_dot,
        })
    }

    /// Allocation-light variant used inside the integrator: takes the flat
    /// derivative-major stack, writes `u` and returns `ψ̇`.
    pub(crate) fn rhs_into(
        &self,
        err_stack: &[f64],
        psi: f64,
        scratch: &mut Scratch,
        u: &mut [f64],
    ) -> Result<f64, ControlError> {
        let m = self.params.m;
        ErrorChain::build_flat(err_stack, m, &self.params.gains, &mut scratch.chain)?;
        let r = self.order();
        let e_r = &scratch.chain[(r - 1) * m..r * m];
        let n = norm(e_r);
        let k = gain_from_norm(n, psi)?;
        control_signal(e_r, k, &self.params.surjection, &mut scratch.v);
        self.saturation.apply(&scratch.v, u);
        let kappa = saturation_defect(&scratch.v, u);
        funnel_derivative(psi, n, kappa, self.params.alpha, self.params.beta)
    }
}

/// Reusable buffers for [`FunnelController::rhs_into`].
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    pub chain: Vec<f64>,
    pub v: Vec<f64>,
}

impl Scratch {
    pub fn new(r: usize, m: usize) -> Self {
        Self {
            chain: vec![0.0; r * m],
            v: vec![0.0; m],
        }
    }
}
