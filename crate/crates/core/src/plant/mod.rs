//! Plants of the form `y^{(r)} = f(d(t), T(y, …, y^{(r-1)})(t), u(t))`.

mod functional;
mod moc;
mod operator;
mod path;

pub use functional::{Disturbance, FunctionalPlant, InitialHistory, OutputMap};
pub use moc::MassOnCar;
pub use operator::{CausalOperator, Kernel, LinearFilter, OperatorError, PointwiseMap};
pub use path::{FnPath, Path, SampledPath};

use crate::ode::{DenseTrajectory, OdeSystem, Rejection};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("invalid plant parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),
    #[error("mass matrix is singular (determinant {det})")]
    SingularMassMatrix { det: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// A plant driven by `u` whose output derivatives are available exactly.
pub trait Plant: Send + Sync {
    fn name(&self) -> &str;
    /// Relative degree `r`.
    fn order(&self) -> usize;
    /// Output dimension `m`.
    fn outputs(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn initial_state(&self, t0: f64) -> Vec<f64>;
    /// Writes `(y, ẏ, …, y^{(r-1)})`, derivative-major, into `out`.
    fn output_derivatives(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), PlantError>;
    /// `ẋ` given the input. `past` holds accepted states of the enclosing
    /// integration; the plant state occupies its leading components.
    fn dynamics(
        &self,
        t: f64,
        x: &[f64],
        u: &[f64],
        past: &DenseTrajectory,
        dx: &mut [f64],
    ) -> Result<(), PlantError>;
    /// Upper bound on integrator steps, e.g. a delay length.
    fn max_step(&self) -> Option<f64> {
        None
    }
}

/// The derivative-stack path seen from inside an integration step.
///
/// Before the first accepted node it reads the initial history, between
/// accepted nodes the dense output, and on the step in progress a quadratic
/// through the last node, its slope and the current trial value. Given the
/// slope at the trial point as well, the step in progress becomes a cubic
/// Hermite segment.
pub struct HistoryView<'a> {
    past: &'a DenseTrajectory,
    width: usize,
    initial: Option<&'a InitialHistory>,
    t: f64,
    x: &'a [f64],
    slope: Option<&'a [f64]>,
}

impl<'a> HistoryView<'a> {
    pub fn new(
        past: &'a DenseTrajectory,
        width: usize,
        initial: Option<&'a InitialHistory>,
        t: f64,
        x: &'a [f64],
    ) -> Self {
        Self {
            past,
            width,
            initial,
            t,
            x,
            slope: None,
        }
    }

    pub fn with_slope(self, slope: &'a [f64]) -> Self {
        Self {
            slope: Some(slope),
            ..self
        }
    }

    fn start_time(&self) -> f64 {
        if self.past.is_empty() {
            self.t
        } else {
            self.past.start()
        }
    }
}

impl Path for HistoryView<'_> {
    fn dim(&self) -> usize {
        self.width
    }

    fn start(&self) -> f64 {
        if self.initial.is_some() {
            f64::NEG_INFINITY
        } else {
            self.start_time()
        }
    }

    fn end(&self) -> f64 {
        self.t
    }

    fn eval(&self, s: f64, out: &mut [f64]) {
        let t_start = self.start_time();
        if s < t_start {
            if let Some(h) = self.initial {
                h(s, out);
                return;
            }
        }
        if self.past.is_empty() {
            out.copy_from_slice(&self.x[..self.width]);
            return;
        }
        let t_last = self.past.end();
        if s <= t_last {
            // in range by construction
            let _ = self.past.eval_range(s.max(t_start), 0, out);
            return;
        }
        let xl = &self.past.last_state().unwrap_or_default()[..self.width];
        let dl = &self.past.last_derivative().unwrap_or_default()[..self.width];
        let span = self.t - t_last;
        let tau = s - t_last;
        match self.slope {
            None => {
                let q = (tau / span) * (tau / span);
                for j in 0..self.width {
                    out[j] = xl[j] + dl[j] * tau + (self.x[j] - xl[j] - dl[j] * span) * q;
                }
            }
            Some(dr) => {
                let u = tau / span;
                let (u2, u3) = (u * u, u * u * u);
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                for j in 0..self.width {
                    out[j] = h00 * xl[j] + span * h10 * dl[j] + h01 * self.x[j] + span * h11 * dr[j];
                }
            }
        }
    }

    fn breakpoints(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        out.extend(self.past.times().iter().copied().filter(|&t| t > a && t < b));
        let t0 = self.start_time();
        if t0 > a && t0 < b {
            out.push(t0);
        }
    }
}

/// A plant driven by a prescribed input signal.
pub struct OpenLoop<'a, P: ?Sized, U> {
    plant: &'a P,
    input: U,
    u: Vec<f64>,
}

impl<'a, P: Plant + ?Sized, U: FnMut(f64, &mut [f64])> OpenLoop<'a, P, U> {
    pub fn new(plant: &'a P, input: U) -> Self {
        Self {
            plant,
            input,
            u: vec![0.0; plant.outputs()],
        }
    }
}

impl<P: Plant + ?Sized, U: FnMut(f64, &mut [f64])> OdeSystem for OpenLoop<'_, P, U> {
    type Error = PlantError;

    fn dim(&self) -> usize {
        self.plant.state_dim()
    }

    fn eval(
        &mut self,
        t: f64,
        x: &[f64],
        past: &DenseTrajectory,
        dx: &mut [f64],
    ) -> Result<(), Rejection<PlantError>> {
        (self.input)(t, &mut self.u);
        self.plant.dynamics(t, x, &self.u, past, dx).map_err(Rejection::Fatal)
    }
}
