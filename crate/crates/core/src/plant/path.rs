use std::sync::Arc;

/// A continuous vector-valued signal on `[start, end]`.
pub trait Path {
    fn dim(&self) -> usize;
    fn start(&self) -> f64;
    fn end(&self) -> f64;
    /// Value at `t`; callers keep `t` within `[start, end]`.
    fn eval(&self, t: f64, out: &mut [f64]);
    /// Points in `(a, b)` where the signal may lose smoothness.
    fn breakpoints(&self, _a: f64, _b: f64, _out: &mut Vec<f64>) {}
}

type PathFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// A path given by a closure.
#[derive(Clone)]
pub struct FnPath {
    dim: usize,
    start: f64,
    end: f64,
    f: PathFn,
}

impl FnPath {
    pub fn new(dim: usize, start: f64, end: f64, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self {
            dim,
            start,
            end,
            f: Arc::new(f),
        }
    }
}

impl Path for FnPath {
    fn dim(&self) -> usize {
        self.dim
    }
    fn start(&self) -> f64 {
        self.start
    }
    fn end(&self) -> f64 {
        self.end
    }
    fn eval(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, out)
    }
}

/// Piecewise cubic Hermite interpolation through knots with given slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl SampledPath {
    /// `values` and `slopes` hold `dim` entries per knot. Panics on
    /// inconsistent lengths or non-increasing knots.
    pub fn new(dim: usize, times: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(!times.is_empty());
        assert_eq!(values.len(), dim * times.len());
        assert_eq!(slopes.len(), dim * times.len());
        assert!(times.windows(2).all(|w| w[1] > w[0]), "knots must increase");
        Self {
            dim,
            times,
            values,
            slopes,
        }
    }

    /// Samples `f` and its derivative `df` at the knots.
    pub fn from_fn(
        dim: usize,
        times: Vec<f64>,
        f: impl Fn(f64, &mut [f64]),
        df: impl Fn(f64, &mut [f64]),
    ) -> Self {
        let n = times.len();
        let mut values = vec![0.0; dim * n];
        let mut slopes = vec![0.0; dim * n];
        for (k, &t) in times.iter().enumerate() {
            f(t, &mut values[k * dim..(k + 1) * dim]);
            df(t, &mut slopes[k * dim..(k + 1) * dim]);
        }
        Self::new(dim, times, values, slopes)
    }

    /// Knot values with finite-difference slopes.
    pub fn from_samples(dim: usize, times: Vec<f64>, values: Vec<f64>) -> Self {
        let n = times.len();
        let mut slopes = vec![0.0; dim * n];
        if n > 1 {
            for k in 0..n {
                let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                let dt = times[b] - times[a];
                for j in 0..dim {
                    slopes[k * dim + j] = (values[b * dim + j] - values[a * dim + j]) / dt;
                }
            }
        }
        Self::new(dim, times, values, slopes)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

impl Path for SampledPath {
    fn dim(&self) -> usize {
        self.dim
    }
    fn start(&self) -> f64 {
        self.times[0]
    }
    fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = self.times.len();
        let d = self.dim;
        if n == 1 {
            out.copy_from_slice(&self.values[..d]);
            return;
        }
        let k = self.times.partition_point(|&tk| tk <= t).clamp(1, n - 1) - 1;
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for j in 0..d {
            out[j] = h00 * self.values[k * d + j]
                + h * h10 * self.slopes[k * d + j]
                + h01 * self.values[(k + 1) * d + j]
                + h * h11 * self.slopes[(k + 1) * d + j];
        }
    }

    fn breakpoints(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        out.extend(self.times.iter().copied().filter(|&t| t > a && t < b));
    }
}
