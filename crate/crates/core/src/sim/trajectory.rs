use crate::norm;

/// Closed-loop signals at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `(y, ẏ, …, y^{(r-1)})`, derivative-major, `r·m` entries.
    pub y: Vec<f64>,
    /// `(e_1, …, e_r)`, derivative-major, `r·m` entries.
    pub e: Vec<f64>,
    pub psi: f64,
    pub k: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub kappa: f64,
}

/// A time-ordered record of closed-loop samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Relative degree.
    pub r: usize,
    /// Output dimension.
    pub m: usize,
    pub samples: Vec<Sample>,
}

impl Sample {
    /// `e_{i+1}` (zero-based `i`).
    pub fn chain(&self, i: usize, m: usize) -> &[f64] {
        &self.e[i * m..(i + 1) * m]
    }

    /// `y^{(j)}`.
    pub fn output_derivative(&self, j: usize, m: usize) -> &[f64] {
        &self.y[j * m..(j + 1) * m]
    }
}

impl Trajectory {
    pub fn new(r: usize, m: usize) -> Self {
        Self {
            r,
            m,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// `‖e_{i+1}(t_n)‖` for sample `n`.
    pub fn chain_norm(&self, n: usize, i: usize) -> f64 {
        norm(self.samples[n].chain(i, self.m))
    }

    /// `‖e_r(t_n)‖`.
    pub fn e_r_norm(&self, n: usize) -> f64 {
        self.chain_norm(n, self.r - 1)
    }

    /// `‖e(t_n)‖`, the plain tracking error.
    pub fn error_norm(&self, n: usize) -> f64 {
        self.chain_norm(n, 0)
    }

    /// True if sample times are strictly increasing.
    pub fn is_time_ordered(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].t > w[0].t)
    }
}
