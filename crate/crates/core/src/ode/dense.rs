use std::fmt;

/// Accepted nodes of an integration together with the Dormand–Prince
/// continuous extension on every interval between them.
///
/// On `[t_k, t_k + h]` with `s = (t − t_k)/h` the interpolant is
/// `c0 + s(c1 + (1−s)(c2 + s(c3 + (1−s)c4)))`, a fourth-order polynomial that
/// reproduces the node values at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    /// `5·dim` coefficients per interval.
    coeffs: Vec<f64>,
}

/// Query outside the covered time range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutOfRange {
    pub t: f64,
    pub start: f64,
    pub end: f64,
}

impl fmt::Display for OutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t = {} outside [{}, {}]", self.t, self.start, self.end)
    }
}

impl std::error::Error for OutOfRange {}

impl DenseTrajectory {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of accepted nodes, including the initial point.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times.first().copied().unwrap_or(f64::NAN)
    }

    pub fn end(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    pub fn last_derivative(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.derivative(self.len() - 1))
    }

    pub(crate) fn push_initial(&mut self, t: f64, x: &[f64], dx: &[f64]) {
        debug_assert!(self.is_empty());
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.derivs.extend_from_slice(dx);
    }

    /// Appends an accepted step; `coeffs` holds the five coefficient vectors back to back.
    pub(crate) fn push_step(&mut self, t: f64, x: &[f64], dx: &[f64], coeffs: &[f64]) {
        debug_assert!(t > self.end());
        debug_assert_eq!(coeffs.len(), 5 * self.dim);
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.derivs.extend_from_slice(dx);
        self.coeffs.extend_from_slice(coeffs);
    }

    fn interval(&self, t: f64) -> Result<usize, OutOfRange> {
        let (start, end) = (self.start(), self.end());
        if self.is_empty() || !(t >= start && t <= end) {
            return Err(OutOfRange { t, start, end });
        }
        // index of the interval [t_k, t_{k+1}] containing t
        let k = self.times.partition_point(|&tk| tk <= t);
        Ok(k.saturating_sub(1).min(self.len().saturating_sub(2)))
    }

    /// Interpolated state at `t`.
    pub fn eval(&self, t: f64, out: &mut [f64]) -> Result<(), OutOfRange> {
        self.eval_range(t, 0, out)
    }

    /// Interpolates components `offset..offset + out.len()` only.
    pub fn eval_range(&self, t: f64, offset: usize, out: &mut [f64]) -> Result<(), OutOfRange> {
        let k = self.interval(t)?;
        if self.len() == 1 {
            out.copy_from_slice(&self.state(0)[offset..offset + out.len()]);
            return Ok(());
        }
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let s1 = 1.0 - s;
        let c = &self.coeffs[k * 5 * self.dim..(k + 1) * 5 * self.dim];
        let d = self.dim;
        for (j, o) in out.iter_mut().enumerate() {
            let i = offset + j;
            *o = c[i] + s * (c[d + i] + s1 * (c[2 * d + i] + s * (c[3 * d + i] + s1 * c[4 * d + i])));
        }
        Ok(())
    }

    pub fn eval_vec(&self, t: f64) -> Result<Vec<f64>, OutOfRange> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, &mut out)?;
        Ok(out)
    }
}
