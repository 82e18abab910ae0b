//! Causal operators acting on the output-derivative path.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::path::Path;
use crate::ode::{integrate, FnSystem, IntegratorConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("history underflow: need the path from t = {needed}, available from t = {available}")]
    HistoryUnderflow { needed: f64, available: f64 },
    #[error("t = {t} lies beyond the end of the path ({end})")]
    BeyondPath { t: f64, end: f64 },
    #[error("operator expects a path of dimension {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("filter integration failed: {0}")]
    Filter(String),
}

/// Weight `g(τ)` of a distributed delay, `τ = t − s ∈ [0, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kernel {
    Constant { value: f64 },
    /// `weight · e^{−rate·τ}`.
    Exponential { weight: f64, rate: f64 },
}

impl Kernel {
    pub fn eval(&self, tau: f64) -> f64 {
        match *self {
            Kernel::Constant { value } => value,
            Kernel::Exponential { weight, rate } => weight * (-rate * tau).exp(),
        }
    }

    /// `sup_{τ∈[0,h]} |g(τ)|`.
    pub fn sup_abs(&self, h: f64) -> f64 {
        match *self {
            Kernel::Constant { value } => value.abs(),
            Kernel::Exponential { weight, rate } => weight.abs() * (-rate * h).exp().max(1.0),
        }
    }
}

type MapFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A static map applied to the current path value.
#[derive(Clone)]
pub struct PointwiseMap {
    pub name: String,
    pub out_dim: usize,
    /// Global Lipschitz constant, if known.
    pub lipschitz: Option<f64>,
    f: MapFn,
}

impl PointwiseMap {
    pub fn new(
        name: impl Into<String>,
        out_dim: usize,
        lipschitz: Option<f64>,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            out_dim,
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

impl fmt::Debug for PointwiseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointwiseMap")
            .field("name", &self.name)
            .field("out_dim", &self.out_dim)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// `ẇ = A w + B ζ`, output `C w + D ζ`, started from `w0` at the beginning
/// of the path. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFilter {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub w0: Vec<f64>,
    /// Input dimension.
    pub input_dim: usize,
    /// Output dimension.
    pub output_dim: usize,
}

fn mat_vec_acc(mat: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += mat[i * cols..(i + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl LinearFilter {
    /// Panics if the matrix sizes disagree.
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: Vec<f64>, w0: Vec<f64>, input_dim: usize) -> Self {
        let n = w0.len();
        assert_eq!(a.len(), n * n, "A must be n×n");
        assert_eq!(b.len(), n * input_dim, "B must be n×p");
        let output_dim = c.len().checked_div(n).unwrap_or(d.len() / input_dim);
        assert_eq!(c.len(), output_dim * n, "C must be q×n");
        assert_eq!(d.len(), output_dim * input_dim, "D must be q×p");
        Self {
            a,
            b,
            c,
            d,
            w0,
            input_dim,
            output_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.w0.len()
    }

    /// `dw = A w + B ζ`.
    pub fn state_derivative(&self, w: &[f64], zeta: &[f64], dw: &mut [f64]) {
        dw.fill(0.0);
        mat_vec_acc(&self.a, w.len(), w, dw);
        mat_vec_acc(&self.b, self.input_dim, zeta, dw);
    }

    /// `C w + D ζ`.
    pub fn output(&self, w: &[f64], zeta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        mat_vec_acc(&self.c, w.len(), w, out);
        mat_vec_acc(&self.d, self.input_dim, zeta, out);
    }
}

/// An operator `T` mapping the path `(y, ẏ, …, y^{(r-1)})` to a signal.
#[derive(Debug, Clone)]
pub enum CausalOperator {
    Pointwise(PointwiseMap),
    /// `T(ζ)(t) = ζ(t − h)`.
    DiscreteDelay { h: f64 },
    /// `T(ζ)(t) = ∫_{t−h}^{t} g(t − s) ζ(s) ds`.
    DistributedDelay { h: f64, kernel: Kernel },
    LinearFilter(LinearFilter),
}

// 5-point Gauss–Legendre rule on [0, 1].
const GL_NODES: [f64; 5] = [
    0.046_910_077_030_668_0,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
const GL_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_44,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

/// Pieces of the delay window are split to at most this fraction of `h`.
const MAX_PANEL_FRACTION: f64 = 1.0 / 8.0;

impl CausalOperator {
    /// The identity, as a zero delay.
    pub fn identity() -> Self {
        CausalOperator::DiscreteDelay { h: 0.0 }
    }

    /// How far back the operator reads the path.
    pub fn horizon(&self) -> f64 {
        match self {
            CausalOperator::DiscreteDelay { h } | CausalOperator::DistributedDelay { h, .. } => *h,
            CausalOperator::Pointwise(_) | CausalOperator::LinearFilter(_) => 0.0,
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            CausalOperator::Pointwise(p) => p.out_dim,
            CausalOperator::LinearFilter(f) => f.output_dim,
            _ => input_dim,
        }
    }

    /// `c0` with `sup‖T(ζ₁) − T(ζ₂)‖ ≤ c0 · sup‖ζ₁ − ζ₂‖`, when known.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            CausalOperator::Pointwise(p) => p.lipschitz,
            CausalOperator::DiscreteDelay { .. } => Some(1.0),
            CausalOperator::DistributedDelay { h, kernel } => Some(h * kernel.sup_abs(*h)),
            CausalOperator::LinearFilter(_) => None,
        }
    }

    /// Output sup-norm bound for inputs with sup-norm at most `c1`, when known.
    pub fn output_bound(&self, c1: f64) -> Option<f64> {
        match self {
            CausalOperator::DiscreteDelay { .. } => Some(c1),
            CausalOperator::DistributedDelay { h, kernel } => Some(c1 * h * kernel.sup_abs(*h)),
            _ => None,
        }
    }

    /// Evaluates `T(path)(t)`.
    pub fn apply(&self, path: &dyn Path, t: f64, out: &mut [f64]) -> Result<(), OperatorError> {
        let dim = path.dim();
        let h = self.horizon();
        if t > path.end() {
            return Err(OperatorError::BeyondPath { t, end: path.end() });
        }
        if t - h < path.start() {
            return Err(OperatorError::HistoryUnderflow {
                needed: t - h,
                available: path.start(),
            });
        }
        match self {
            CausalOperator::Pointwise(p) => {
                let mut x = vec![0.0; dim];
                path.eval(t, &mut x);
                p.apply(&x, out);
            }
            CausalOperator::DiscreteDelay { h } => {
                check_dim(dim, out.len())?;
                path.eval(t - h, out);
            }
            CausalOperator::DistributedDelay { h, kernel } => {
                check_dim(dim, out.len())?;
                distributed(path, t, *h, kernel, out);
            }
            CausalOperator::LinearFilter(filter) => {
                check_dim(filter.input_dim, dim)?;
                filtered(filter, path, t, out)?;
            }
        }
        Ok(())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), OperatorError> {
    if expected == found {
        Ok(())
    } else {
        Err(OperatorError::Dimension { expected, found })
    }
}

/// Composite Gauss–Legendre quadrature aligned with the path's breakpoints.
fn distributed(path: &dyn Path, t: f64, h: f64, kernel: &Kernel, out: &mut [f64]) {
    out.fill(0.0);
    if h <= 0.0 {
        return;
    }
    let a = t - h;
    let mut knots = vec![a];
    path.breakpoints(a, t, &mut knots);
    knots.push(t);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut x = vec![0.0; out.len()];
    let max_panel = h * MAX_PANEL_FRACTION;
    for w in knots.windows(2) {
        let len = w[1] - w[0];
        let panels = (len / max_panel).ceil().max(1.0) as usize;
        let step = len / panels as f64;
        for p in 0..panels {
            let lo = w[0] + p as f64 * step;
            for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let s = lo + node * step;
                path.eval(s, &mut x);
                let g = kernel.eval(t - s) * weight * step;
                for (o, xi) in out.iter_mut().zip(&x) {
                    *o += g * xi;
                }
            }
        }
    }
}

/// Runs the filter along the path from its start.
fn filtered(filter: &LinearFilter, path: &dyn Path, t: f64, out: &mut [f64]) -> Result<(), OperatorError> {
    let mut zeta = vec![0.0; filter.input_dim];
    let t0 = path.start();
    let w = if t > t0 && filter.state_dim() > 0 {
        let mut sys = FnSystem::new(filter.state_dim(), |s, w: &[f64], dw: &mut [f64]| {
            let mut z = vec![0.0; filter.input_dim];
            path.eval(s, &mut z);
            filter.state_derivative(w, &z, dw);
        });
        let cfg = IntegratorConfig {
            h_max: (t - t0).max(f64::MIN_POSITIVE),
            ..IntegratorConfig::default()
        };
        let sol = integrate(&mut sys, &filter.w0, (t0, t), &cfg)
            .map_err(|f| OperatorError::Filter(f.error.to_string()))?;
        sol.dense.last_state().map(<[f64]>::to_vec).unwrap_or_default()
    } else {
        filter.w0.clone()
    };
    path.eval(t, &mut zeta);
    filter.output(&w, &zeta, out);
    Ok(())
}
