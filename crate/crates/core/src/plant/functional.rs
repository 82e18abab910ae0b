use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::operator::{CausalOperator, LinearFilter};
use super::{HistoryView, MassOnCar, Plant, PlantError};
use crate::ode::DenseTrajectory;

/// A bounded disturbance signal, applied to every output channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Disturbance {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `amplitude · sin(omega·t + phase)`.
    Sine { amplitude: f64, omega: f64, phase: f64 },
}

impl Disturbance {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Disturbance::Zero => 0.0,
            Disturbance::Constant { value } => value,
            Disturbance::Sine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
        }
    }
}

/// `f(d, w, u, out)` giving `y^{(r)}`.
pub type OutputMap = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Values of `(y, …, y^{(r-1)})` for `t` up to the start time.
pub type InitialHistory = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// `y^{(r)}(t) = f(d(t), T(y, ẏ, …, y^{(r-1)})(t), u(t))`.
///
/// State layout: the derivative stack `(y, …, y^{(r-1)})`, derivative-major,
/// followed by the internal state of a [`LinearFilter`] operator if any.
/// The initial stack is read from the history at the start time, so the
/// two always agree.
#[derive(Clone)]
pub struct FunctionalPlant {
    name: String,
    r: usize,
    m: usize,
    f: OutputMap,
    op: CausalOperator,
    disturbance: Disturbance,
    history: InitialHistory,
}

impl fmt::Debug for FunctionalPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalPlant")
            .field("name", &self.name)
            .field("r", &self.r)
            .field("m", &self.m)
            .field("op", &self.op)
            .field("disturbance", &self.disturbance)
            .finish()
    }
}

impl FunctionalPlant {
    /// Starts with a constant history equal to `initial_stack`.
    pub fn new(
        name: impl Into<String>,
        r: usize,
        m: usize,
        op: CausalOperator,
        initial_stack: Vec<f64>,
        f: impl Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self, PlantError> {
        if r == 0 || m == 0 {
            return Err(PlantError::InvalidParameter("order and output dimension must be at least 1".into()));
        }
        if initial_stack.len() != r * m {
            return Err(PlantError::InvalidParameter(format!(
                "initial stack has {} entries, expected {}",
                initial_stack.len(),
                r * m
            )));
        }
        if let CausalOperator::LinearFilter(filter) = &op {
            if filter.input_dim != r * m {
                return Err(PlantError::InvalidParameter(format!(
                    "filter reads {} inputs, the derivative stack has {}",
                    filter.input_dim,
                    r * m
                )));
            }
        }
        if !(op.horizon() >= 0.0 && op.horizon().is_finite()) {
            return Err(PlantError::InvalidParameter(format!("delay must be finite and ≥ 0, got {}", op.horizon())));
        }
        Ok(Self {
            name: name.into(),
            r,
            m,
            f: Arc::new(f),
            op,
            disturbance: Disturbance::Zero,
            history: Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&initial_stack)),
        })
    }

    /// `y^{(r)} = u`.
    pub fn integrator_chain(r: usize, m: usize, initial_stack: Vec<f64>) -> Result<Self, PlantError> {
        Self::new("integrator-chain", r, m, CausalOperator::identity(), initial_stack, |_, _, u, out| {
            out.copy_from_slice(u)
        })
    }

    /// `y^{(r)} = d(t) + Σ_j c_j w_j + b u` for a scalar output.
    pub fn linear(
        r: usize,
        op: CausalOperator,
        feedback: Vec<f64>,
        input_gain: f64,
        initial_stack: Vec<f64>,
    ) -> Result<Self, PlantError> {
        let q = op.output_dim(r);
        if feedback.len() != q {
            return Err(PlantError::InvalidParameter(format!(
                "{} feedback coefficients for an operator with {q} outputs",
                feedback.len()
            )));
        }
        Self::new("functional", r, 1, op, initial_stack, move |d, w, u, out| {
            out[0] = d[0] + feedback.iter().zip(w).map(|(c, x)| c * x).sum::<f64>() + input_gain * u[0];
        })
    }

    /// The flat mass-on-car system written as a third-order functional plant.
    ///
    /// With `w = s` driven by `ṡ = −(k/d) s − (m2/d) ÿ`, the output obeys
    /// `y''' = −(k/m2) ṡ − d(m1+m2)/(m1 m2) ÿ + d/(m1 m2) u`. The operator
    /// returns `(ṡ, ÿ)`.
    pub fn mass_on_car(p: &MassOnCar) -> Result<Self, PlantError> {
        let stack = p.output_triple(&p.initial)?.to_vec();
        let (k, d, m1, m2) = (p.k_spring, p.d_damp, p.m1, p.m2);
        let filter = LinearFilter::new(
            vec![-k / d],
            vec![0.0, 0.0, -m2 / d],
            vec![-k / d, 0.0],
            vec![0.0, 0.0, -m2 / d, 0.0, 0.0, 1.0],
            vec![p.initial[1]],
            3,
        );
        let a_s = -k / m2;
        let a_y = -d * (m1 + m2) / (m1 * m2);
        let b = d / (m1 * m2);
        Self::new("mass-on-car-functional", 3, 1, CausalOperator::LinearFilter(filter), stack, move |_, w, u, out| {
            out[0] = a_s * w[0] + a_y * w[1] + b * u[0];
        })
    }

    pub fn with_disturbance(mut self, d: Disturbance) -> Self {
        self.disturbance = d;
        self
    }

    /// Replaces the history; the initial stack becomes `history(t0)`.
    pub fn with_history(mut self, history: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.history = Arc::new(history);
        self
    }

    pub fn operator(&self) -> &CausalOperator {
        &self.op
    }

    fn filter_dim(&self) -> usize {
        match &self.op {
            CausalOperator::LinearFilter(f) => f.state_dim(),
            _ => 0,
        }
    }
}

impl Plant for FunctionalPlant {
    fn name(&self) -> &str {
        &self.name
    }
    fn order(&self) -> usize {
        self.r
    }
    fn outputs(&self) -> usize {
        self.m
    }
    fn state_dim(&self) -> usize {
        self.r * self.m + self.filter_dim()
    }

    fn initial_state(&self, t0: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.state_dim()];
        (self.history)(t0, &mut x[..self.r * self.m]);
        if let CausalOperator::LinearFilter(f) = &self.op {
            x[self.r * self.m..].copy_from_slice(&f.w0);
        }
        x
    }

    fn output_derivatives(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), PlantError> {
        out.copy_from_slice(&x[..self.r * self.m]);
        Ok(())
    }

    fn dynamics(
        &self,
        t: f64,
        x: &[f64],
        u: &[f64],
        past: &DenseTrajectory,
        dx: &mut [f64],
    ) -> Result<(), PlantError> {
        let (r, m) = (self.r, self.m);
        let n = r * m;
        let stack = &x[..n];
        dx[..n - m].copy_from_slice(&stack[m..]);
        let mut w = vec![0.0; self.op.output_dim(n)];
        let d = vec![self.disturbance.eval(t); m];
        match &self.op {
            CausalOperator::LinearFilter(filter) => {
                let state = &x[n..];
                filter.output(state, stack, &mut w);
                filter.state_derivative(state, stack, &mut dx[n..]);
            }
            CausalOperator::DiscreteDelay { h } if *h == 0.0 => w.copy_from_slice(stack),
            op => {
                let view = HistoryView::new(past, n, Some(&self.history), t, stack);
                op.apply(&view, t, &mut w)?;
                let reads_current_step = matches!(op, CausalOperator::DistributedDelay { .. })
                    && !past.is_empty()
                    && t > past.end();
                if reads_current_step {
                    // second pass with the slope at t from the first
                    (self.f)(&d, &w, u, &mut dx[n - m..n]);
                    let slope = dx[..n].to_vec();
                    let view = view.with_slope(&slope);
                    op.apply(&view, t, &mut w)?;
                }
            }
        }
        (self.f)(&d, &w, u, &mut dx[n - m..n]);
        Ok(())
    }

    fn max_step(&self) -> Option<f64> {
        let h = self.op.horizon();
        (h > 0.0).then_some(h)
    }
}
