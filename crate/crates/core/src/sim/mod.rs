//! The closed loop: plant, reference, controller and funnel in one ODE.
//!
//! The augmented state is `(plant state, ψ)`. Each right-hand-side call reads
//! the exact output derivatives from the plant, subtracts the reference,
//! evaluates the control law and feeds `u` back to the plant. Trial points
//! outside the funnel are rejected and retried with a smaller step.

mod reference;
mod trajectory;

use std::fmt;

use serde::Serialize;

pub use reference::Reference;
pub use trajectory::{Sample, Trajectory};

use crate::bounds::{self, VerificationReport, VerifyOptions, INACTIVE_KAPPA};
use crate::controller::{FunnelController, Scratch};
use crate::ode::{integrate, DenseTrajectory, IntegrateError, IntegratorConfig, OdeSystem, Rejection, Stats};
use crate::plant::{Plant, PlantError};
use crate::{norm, ControlError};

/// Why the closed-loop right-hand side refused a point.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoopError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("plant has order {plant_r} with {plant_m} outputs, controller expects order {ctrl_r} with {ctrl_m}")]
    Mismatch {
        plant_r: usize,
        plant_m: usize,
        ctrl_r: usize,
        ctrl_m: usize,
    },
    #[error("initial condition outside the funnel: ‖e_r(0)‖ = {norm} ≥ ψ⁰ = {psi0}")]
    InitialCondition { norm: f64, psi0: f64 },
    #[error("invalid reference signal")]
    Reference,
    #[error("invalid time span [{0}, {1}]")]
    Span(f64, f64),
    #[error("resampling step must be positive, got {0}")]
    Resample(f64),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("integration failed: {error}")]
    Integration {
        error: IntegrateError<LoopError>,
        /// Samples at the nodes accepted before the failure.
        partial: Box<Trajectory>,
    },
    #[error("controller failed at an interpolated point t = {t}: {error}")]
    Interpolation { t: f64, error: LoopError },
}

/// The augmented closed-loop right-hand side.
pub struct ClosedLoop<'a> {
    plant: &'a dyn Plant,
    controller: &'a FunnelController,
    reference: &'a Reference,
    r: usize,
    m: usize,
    nx: usize,
    y: Vec<f64>,
    e: Vec<f64>,
    u: Vec<f64>,
    scratch: Scratch,
}

impl fmt::Debug for ClosedLoop<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedLoop")
            .field("plant", &self.plant.name())
            .field("r", &self.r)
            .field("m", &self.m)
            .finish()
    }
}

/// Builds the closed loop and checks `‖e_r(t0)‖ < ψ⁰`.
pub fn assemble<'a>(
    plant: &'a dyn Plant,
    controller: &'a FunnelController,
    reference: &'a Reference,
    t0: f64,
) -> Result<(ClosedLoop<'a>, Vec<f64>), SimError> {
    let (r, m) = (controller.order(), controller.outputs());
    if plant.order() != r || plant.outputs() != m {
        return Err(SimError::Mismatch {
            plant_r: plant.order(),
            plant_m: plant.outputs(),
            ctrl_r: r,
            ctrl_m: m,
        });
    }
    if !reference.is_finite() {
        return Err(SimError::Reference);
    }
    let nx = plant.state_dim();
    let mut sys = ClosedLoop {
        plant,
        controller,
        reference,
        r,
        m,
        nx,
        y: vec![0.0; r * m],
        e: vec![0.0; r * m],
        u: vec![0.0; m],
        scratch: Scratch::new(r, m),
    };
    let mut x0 = plant.initial_state(t0);
    x0.push(controller.params().psi0);
    sys.errors(t0, &x0[..nx])?;
    let mut chain = vec![0.0; r * m];
    crate::chain::ErrorChain::build_flat(&sys.e, m, &controller.params().gains, &mut chain)
        .expect("dimensions checked above");
    let n = norm(&chain[(r - 1) * m..]);
    let psi0 = controller.params().psi0;
    if !(n < psi0) {
        return Err(SimError::InitialCondition { norm: n, psi0 });
    }
    Ok((sys, x0))
}

impl ClosedLoop<'_> {
    pub fn plant_dim(&self) -> usize {
        self.nx
    }

    /// Fills `self.y` and `self.e` from the plant state.
    fn errors(&mut self, t: f64, xp: &[f64]) -> Result<(), PlantError> {
        self.plant.output_derivatives(t, xp, &mut self.y)?;
        self.reference.derivatives(t, self.m, &mut self.e);
        for (e, y) in self.e.iter_mut().zip(&self.y) {
            *e = y - *e;
        }
        Ok(())
    }

    /// All closed-loop signals at `(t, x)`.
    pub fn sample(&mut self, t: f64, x: &[f64]) -> Result<Sample, LoopError> {
        self.errors(t, &x[..self.nx])?;
        let psi = x[self.nx];
        let derivs: Vec<Vec<f64>> = self.e.chunks(self.m).map(<[f64]>::to_vec).collect();
        let out = self.controller.step(&derivs, psi)?;
        Ok(Sample {
            t,
            y: self.y.clone(),
            e: out.chain.e.concat(),
            psi,
            k: out.k,
            v: out.v,
            u: out.u,
            kappa: out.kappa,
        })
    }
}

impl OdeSystem for ClosedLoop<'_> {
    type Error = LoopError;

    fn dim(&self) -> usize {
        self.nx + 1
    }

    fn eval(
        &mut self,
        t: f64,
        x: &[f64],
        past: &DenseTrajectory,
        dx: &mut [f64],
    ) -> Result<(), Rejection<LoopError>> {
        let nx = self.nx;
        self.errors(t, &x[..nx]).map_err(|e| Rejection::Fatal(e.into()))?;
        let psi = x[nx];
        let psi_dot = match self.controller.rhs_into(&self.e, psi, &mut self.scratch, &mut self.u) {
            Ok(p) => p,
            Err(e @ ControlError::FunnelViolation { .. }) => return Err(Rejection::Retry(e.into())),
            Err(e) => return Err(Rejection::Fatal(e.into())),
        };
        self.plant
            .dynamics(t, &x[..nx], &self.u, past, &mut dx[..nx])
            .map_err(|e| Rejection::Fatal(e.into()))?;
        dx[nx] = psi_dot;
        Ok(())
    }
}

/// Summary numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// `max ‖e_r‖/ψ`.
    pub eps_hat: f64,
    /// Fraction of samples with active saturation.
    pub sat_duty: f64,
    /// Last sample time with `κ > 10⁻¹²`.
    pub last_sat_time: Option<f64>,
    /// `max ‖u‖`.
    pub max_abs_u: f64,
    /// `max (ψ − ψ_des)`.
    pub funnel_excess: f64,
    /// Samples with `‖e‖ ≥ ψ_des`.
    pub desired_funnel_violations: usize,
    /// Of those, the ones after the last saturation.
    pub violations_after_saturation: usize,
    pub samples: usize,
}

impl Metrics {
    pub fn compute(traj: &Trajectory, params: &crate::ControllerParams) -> Self {
        let n = traj.len();
        let last_sat_time = bounds::last_saturation_time(traj, INACTIVE_KAPPA);
        let mut m = Metrics {
            eps_hat: 0.0,
            sat_duty: 0.0,
            last_sat_time,
            max_abs_u: 0.0,
            funnel_excess: f64::NEG_INFINITY,
            desired_funnel_violations: 0,
            violations_after_saturation: 0,
            samples: n,
        };
        let mut saturated = 0usize;
        for (i, s) in traj.samples.iter().enumerate() {
            m.eps_hat = m.eps_hat.max(traj.e_r_norm(i) / s.psi);
            if s.kappa > INACTIVE_KAPPA {
                saturated += 1;
            }
            m.max_abs_u = m.max_abs_u.max(norm(&s.u));
            let des = params.desired_funnel(s.t);
            m.funnel_excess = m.funnel_excess.max(s.psi - des);
            if !(traj.error_norm(i) < des) {
                m.desired_funnel_violations += 1;
                if last_sat_time.is_none_or(|ts| s.t > ts) {
                    m.violations_after_saturation += 1;
                }
            }
        }
        if n > 0 {
            m.sat_duty = saturated as f64 / n as f64;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub span: (f64, f64),
    pub integrator: IntegratorConfig,
    /// Resampling step in seconds.
    pub resample: f64,
    pub verify: VerifyOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            span: (0.0, 20.0),
            integrator: IntegratorConfig::default(),
            resample: 1e-3,
            verify: VerifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Uniformly resampled trajectory.
    pub trajectory: Trajectory,
    /// Samples at the accepted integrator nodes.
    pub nodes: Trajectory,
    pub metrics: Metrics,
    pub report: VerificationReport,
    pub stats: Stats,
}

/// Uniform grid `t0, t0 + dt, …, t1` with the last point exactly `t1`.
pub fn resample_times(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt).round() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| (t0 + k as f64 * dt).min(t1)).collect();
    if let Some(last) = ts.last_mut() {
        *last = t1;
    }
    ts.dedup();
    ts
}

/// Integrates the closed loop, samples it and checks the guarantees.
pub fn run(
    plant: &dyn Plant,
    controller: &FunnelController,
    reference: &Reference,
    opts: &RunOptions,
) -> Result<RunOutput, SimError> {
    let (t0, t1) = opts.span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(SimError::Span(t0, t1));
    }
    if !(opts.resample > 0.0) {
        return Err(SimError::Resample(opts.resample));
    }
    let (mut sys, x0) = assemble(plant, controller, reference, t0)?;
    let mut cfg = opts.integrator;
    if let Some(h) = plant.max_step() {
        cfg.h_max = cfg.h_max.min(h);
        cfg.h_init = cfg.h_init.min(cfg.h_max);
    }
    let (r, m) = (controller.order(), controller.outputs());
    let sol = match integrate(&mut sys, &x0, (t0, t1), &cfg) {
        Ok(sol) => sol,
        Err(failure) => {
            let mut partial = Trajectory::new(r, m);
            for k in 0..failure.partial.len() {
                if let Ok(s) = sys.sample(failure.partial.times()[k], failure.partial.state(k)) {
                    partial.samples.push(s);
                }
            }
            return Err(SimError::Integration {
                error: failure.error,
                partial: Box::new(partial),
            });
        }
    };

    let mut nodes = Trajectory::new(r, m);
    for k in 0..sol.dense.len() {
        let t = sol.dense.times()[k];
        let s = sys
            .sample(t, sol.dense.state(k))
            .map_err(|error| SimError::Interpolation { t, error })?;
        nodes.samples.push(s);
    }
    let mut trajectory = Trajectory::new(r, m);
    let mut x = vec![0.0; sys.dim()];
    for t in resample_times(t0, t1, opts.resample) {
        sol.dense.eval(t, &mut x).expect("grid lies inside the span");
        let s = sys.sample(t, &x).map_err(|error| SimError::Interpolation { t, error })?;
        trajectory.samples.push(s);
    }
    let metrics = Metrics::compute(&trajectory, controller.params());
    let report = bounds::verify(&trajectory, controller.params(), controller.saturation(), &opts.verify);
    Ok(RunOutput {
        trajectory,
        nodes,
        metrics,
        report,
        stats: sol.stats,
    })
}
