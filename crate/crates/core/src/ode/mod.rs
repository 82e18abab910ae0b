//! Adaptive explicit integration with the Dormand–Prince 5(4) pair.
//!
//! The right-hand side may refuse a trial point with [`Rejection::Retry`]
//! (the funnel controller does this when a stage lands outside the funnel).
//! Such a step is discarded and retried with half the step size, separately
//! from the usual tolerance-based rejection. Every right-hand side also sees
//! the dense trajectory accepted so far, which is how delay operators read
//! their history.

mod dense;

use std::convert::Infallible;
use std::fmt;

pub use dense::{DenseTrajectory, OutOfRange};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous extension weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    /// Consecutive right-hand-side rejections tolerated before giving up.
    pub max_retries: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-8,
            h_init: 1e-4,
            h_min: 1e-12,
            h_max: 0.5,
            safety: 0.9,
            max_retries: 60,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            ));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(format!(
                "step bounds must satisfy 0 < h_min ≤ h_init ≤ h_max (got {}, {}, {})",
                self.h_min, self.h_init, self.h_max
            ));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(format!("safety factor must lie in (0, 1], got {}", self.safety));
        }
        Ok(())
    }
}

/// Why a right-hand side refused to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection<E> {
    /// The trial point is inadmissible; a smaller step may succeed.
    Retry(E),
    /// Evaluation is impossible; integration stops.
    Fatal(E),
}

/// A first-order system `ẋ = F(t, x, history)`.
pub trait OdeSystem {
    type Error;

    fn dim(&self) -> usize;

    fn eval(
        &mut self,
        t: f64,
        x: &[f64],
        past: &DenseTrajectory,
        dx: &mut [f64],
    ) -> Result<(), Rejection<Self::Error>>;
}

/// Adapts a plain closure `(t, x, dx)` into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: FnMut(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    type Error = Infallible;

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, t: f64, x: &[f64], _: &DenseTrajectory, dx: &mut [f64]) -> Result<(), Rejection<Infallible>> {
        (self.f)(t, x, dx);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError<E> {
    InvalidConfig(String),
    /// The right-hand side refused the initial point.
    InitialPoint(E),
    /// The step size fell below `h_min` or too many consecutive retries occurred.
    StepUnderflow {
        t: f64,
        h: f64,
        state: Vec<f64>,
        last_rejection: Option<E>,
    },
    Fatal { t: f64, error: E },
    NonFinite { t: f64 },
    TooManySteps { t: f64 },
}

impl<E: fmt::Display> fmt::Display for IntegrateError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig(msg) => write!(f, "invalid integrator configuration: {msg}"),
            Self::InitialPoint(e) => write!(f, "initial point rejected: {e}"),
            Self::StepUnderflow {
                t, h, last_rejection, ..
            } => {
                write!(f, "step size underflow at t = {t} (h = {h:e})")?;
                if let Some(e) = last_rejection {
                    write!(f, "; last rejection: {e}")?;
                }
                Ok(())
            }
            Self::Fatal { t, error } => write!(f, "right-hand side failed at t = {t}: {error}"),
            Self::NonFinite { t } => write!(f, "non-finite state encountered at t = {t}"),
            Self::TooManySteps { t } => write!(f, "step budget exhausted at t = {t}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for IntegrateError<E> {}

/// A failed integration together with everything accepted before the failure.
#[derive(Debug, Clone)]
pub struct IntegrationFailure<E> {
    pub error: IntegrateError<E>,
    pub partial: DenseTrajectory,
    pub stats: Stats,
}

impl<E: fmt::Display> fmt::Display for IntegrationFailure<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} accepted steps)", self.error, self.stats.accepted)
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for IntegrationFailure<E> {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct Stats {
    pub accepted: usize,
    /// Steps refused by the error test.
    pub rejected: usize,
    /// Steps refused by the right-hand side.
    pub retried: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub dense: DenseTrajectory,
    pub stats: Stats,
}

/// Outcome of a single trial step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome<E> {
    /// Weighted error norm ≤ 1; the new state is in [`Stepper::new_state`].
    Accepted { error: f64, next_h: f64 },
    /// Weighted error norm > 1.
    Rejected { error: f64, next_h: f64 },
    /// A stage was refused with [`Rejection::Retry`]; `next_h = h/2`.
    Retry { error: E, next_h: f64 },
    Fatal(E),
}

/// Stage storage and one-step logic of the Dormand–Prince pair.
#[derive(Debug, Clone)]
pub struct Stepper {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    x_new: Vec<f64>,
    err: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Stepper {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            x_new: vec![0.0; dim],
            err: vec![0.0; dim],
            coeffs: vec![0.0; 5 * dim],
        }
    }

    pub fn new_state(&self) -> &[f64] {
        &self.x_new
    }

    /// Derivative at the new state (first stage of the next step).
    pub fn new_derivative(&self) -> &[f64] {
        &self.k[6]
    }

    fn stages<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t: f64,
        x: &[f64],
        f0: &[f64],
        h: f64,
        past: &DenseTrajectory,
    ) -> Result<(), Rejection<S::Error>> {
        self.k[0].copy_from_slice(f0);
        for s in 1..7 {
            for i in 0..x.len() {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.stage[i] = x[i] + h * acc;
            }
            sys.eval(t + C[s] * h, &self.stage, past, &mut self.k[s])?;
        }
        // the seventh stage is evaluated at the fifth-order solution
        self.x_new.copy_from_slice(&self.stage);
        for i in 0..x.len() {
            let mut acc = 0.0;
            for (s, e) in E.iter().enumerate() {
                acc += e * self.k[s][i];
            }
            self.err[i] = h * acc;
        }
        Ok(())
    }

    fn error_norm(&self, x: &[f64], cfg: &IntegratorConfig) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let sum: f64 = x
            .iter()
            .zip(&self.x_new)
            .zip(&self.err)
            .map(|((&a, &b), &e)| {
                let sc = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
                (e / sc) * (e / sc)
            })
            .sum();
        (sum / x.len() as f64).sqrt()
    }

    /// Attempts one step of size `h` from `(t, x)` with `f0 = F(t, x)`.
    pub fn step<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t: f64,
        x: &[f64],
        f0: &[f64],
        h: f64,
        cfg: &IntegratorConfig,
        past: &DenseTrajectory,
    ) -> StepOutcome<S::Error> {
        match self.stages(sys, t, x, f0, h, past) {
            Err(Rejection::Retry(error)) => {
                return StepOutcome::Retry {
                    error,
                    next_h: 0.5 * h,
                }
            }
            Err(Rejection::Fatal(e)) => return StepOutcome::Fatal(e),
            Ok(()) => {}
        }
        let error = self.error_norm(x, cfg);
        let factor = if error == 0.0 {
            5.0
        } else {
            (cfg.safety * error.powf(-0.2)).clamp(0.2, 5.0)
        };
        if error <= 1.0 {
            StepOutcome::Accepted {
                error,
                next_h: (h * factor).min(cfg.h_max),
            }
        } else if error.is_finite() {
            StepOutcome::Rejected {
                error,
                next_h: h * factor.min(1.0),
            }
        } else {
            StepOutcome::Rejected {
                error,
                next_h: 0.2 * h,
            }
        }
    }

    /// Dense-output coefficients of the step just taken.
    fn fill_coeffs(&mut self, x: &[f64], h: f64) {
        let d = x.len();
        for i in 0..d {
            let dy = self.x_new[i] - x[i];
            let bspl = h * self.k[0][i] - dy;
            self.coeffs[i] = x[i];
            self.coeffs[d + i] = dy;
            self.coeffs[2 * d + i] = bspl;
            self.coeffs[3 * d + i] = dy - h * self.k[6][i] - bspl;
            let mut acc = 0.0;
            for (s, dc) in D.iter().enumerate() {
                acc += dc * self.k[s][i];
            }
            self.coeffs[4 * d + i] = h * acc;
        }
    }
}

/// Integrates over `[t0, t1]` and returns the dense trajectory.
pub fn integrate<S: OdeSystem>(
    sys: &mut S,
    x0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Solution, IntegrationFailure<S::Error>> {
    integrate_observed(sys, x0, span, cfg, |_, _| {})
}

/// As [`integrate`], calling `observer(t, x)` at the initial point and after every accepted step.
pub fn integrate_observed<S: OdeSystem>(
    sys: &mut S,
    x0: &[f64],
    (t0, t1): (f64, f64),
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<Solution, IntegrationFailure<S::Error>> {
    let dim = sys.dim();
    let mut dense = DenseTrajectory::new(dim);
    let mut stats = Stats::default();
    let fail = |error, dense, stats| Err(IntegrationFailure {
        error,
        partial: dense,
        stats,
    });
    if let Err(msg) = cfg.validate() {
        return fail(IntegrateError::InvalidConfig(msg), dense, stats);
    }
    if x0.len() != dim || !(t1 > t0) {
        return fail(
            IntegrateError::InvalidConfig(format!(
                "state length {} for a system of dimension {dim} over [{t0}, {t1}]",
                x0.len()
            )),
            dense,
            stats,
        );
    }

    let mut x = x0.to_vec();
    let mut f = vec![0.0; dim];
    stats.evaluations += 1;
    match sys.eval(t0, &x, &dense, &mut f) {
        Ok(()) => {}
        Err(Rejection::Retry(e) | Rejection::Fatal(e)) => {
            return fail(IntegrateError::InitialPoint(e), dense, stats)
        }
    }
    dense.push_initial(t0, &x, &f);
    observer(t0, &x);

    let mut stepper = Stepper::new(dim);
    let mut t = t0;
    let mut h = cfg.h_init.min(cfg.h_max).min(t1 - t0);
    let mut retries = 0usize;
    let mut last_rejection = None;
    let mut just_rejected = false;

    while t < t1 {
        if stats.accepted + stats.rejected + stats.retried >= cfg.max_steps {
            return fail(IntegrateError::TooManySteps { t }, dense, stats);
        }
        let mut last = false;
        if t + h >= t1 - 1e-12 * t1.abs().max(1.0) {
            h = t1 - t;
            last = true;
        }
        if h < cfg.h_min && !last {
            return fail(
                IntegrateError::StepUnderflow {
                    t,
                    h,
                    state: x,
                    last_rejection,
                },
                dense,
                stats,
            );
        }
        stats.evaluations += 6;
        match stepper.step(sys, t, &x, &f, h, cfg, &dense) {
            StepOutcome::Accepted { next_h, .. } => {
                if stepper.new_state().iter().any(|v| !v.is_finite()) {
                    return fail(IntegrateError::NonFinite { t: t + h }, dense, stats);
                }
                stepper.fill_coeffs(&x, h);
                let t_new = if last { t1 } else { t + h };
                x.copy_from_slice(stepper.new_state());
                f.copy_from_slice(stepper.new_derivative());
                dense.push_step(t_new, &x, &f, &stepper.coeffs);
                observer(t_new, &x);
                stats.accepted += 1;
                t = t_new;
                h = if just_rejected { h.min(next_h) } else { next_h };
                just_rejected = false;
                retries = 0;
                last_rejection = None;
            }
            StepOutcome::Rejected { next_h, .. } => {
                stats.rejected += 1;
                h = next_h;
                just_rejected = true;
            }
            StepOutcome::Retry { error, next_h } => {
                stats.retried += 1;
                retries += 1;
                last_rejection = Some(error);
                h = next_h;
                just_rejected = true;
                if retries > cfg.max_retries || h < cfg.h_min {
                    return fail(
                        IntegrateError::StepUnderflow {
                            t,
                            h,
                            state: x,
                            last_rejection,
                        },
                        dense,
                        stats,
                    );
                }
            }
            StepOutcome::Fatal(error) => {
                return fail(IntegrateError::Fatal { t, error }, dense, stats);
            }
        }
    }
    Ok(Solution { dense, stats })
}

/// Fixed-step integration with the fifth-order solution of the pair; no
/// error control, no dense output. Returns the final state.
pub fn integrate_fixed<S: OdeSystem>(
    sys: &mut S,
    x0: &[f64],
    (t0, t1): (f64, f64),
    steps: usize,
) -> Result<Vec<f64>, Rejection<S::Error>> {
    let dim = sys.dim();
    let empty = DenseTrajectory::new(dim);
    let cfg = IntegratorConfig {
        rel_tol: f64::INFINITY,
        abs_tol: f64::INFINITY,
        ..IntegratorConfig::default()
    };
    let h = (t1 - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut f = vec![0.0; dim];
    let mut stepper = Stepper::new(dim);
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        sys.eval(t, &x, &empty, &mut f)?;
        match stepper.step(sys, t, &x, &f, h, &cfg, &empty) {
            StepOutcome::Accepted { .. } | StepOutcome::Rejected { .. } => {
                x.copy_from_slice(stepper.new_state());
            }
            StepOutcome::Retry { error, .. } => return Err(Rejection::Retry(error)),
            StepOutcome::Fatal(e) => return Err(Rejection::Fatal(e)),
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests;
