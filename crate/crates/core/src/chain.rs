//! The filtered error chain `e_1 = e`, `e_{i+1} = ė_i + k_i e_i`.
//!
//! Unrolling the recursion gives `e_i = q_i(d/dt) e` with the partial
//! products `q_i(s) = (s + k_{i-1})⋯(s + k_1)`. The last one is
//! `p(s) = q_r(s) = s^{r-1} + Σ μ_i s^{i-1}` with `μ_r = 1`, so the chain can
//! be formed from the instantaneous error derivatives without differentiating
//! anything numerically.

use crate::ControlError;

/// Coefficients of `∏ (s + k_j)` over the given gains, lowest degree first.
///
/// `monic_product(&[])` is the constant polynomial `1`.
pub fn monic_product(gains: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &k in gains {
        // (s + k)·c(s)
        let mut next = vec![0.0; c.len() + 1];
        for (j, &cj) in c.iter().enumerate() {
            next[j] += k * cj;
            next[j + 1] += cj;
        }
        c = next;
    }
    c
}

/// The filtered errors `e_1, …, e_r` together with the coefficients `μ` of `p(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorChain {
    /// `e[i]` holds `e_{i+1}`, each of length `m`.
    pub e: Vec<Vec<f64>>,
    /// `μ_1, …, μ_r` (lowest degree first, `μ_r = 1`).
    pub mu: Vec<f64>,
}

impl ErrorChain {
    /// Builds the chain from `(e, ė, …, e^{(r-1)})` and `k_1, …, k_{r-1}`.
    pub fn build(err_derivs: &[Vec<f64>], gains: &[f64]) -> Result<Self, ControlError> {
        let m = err_derivs.first().map_or(0, Vec::len);
        let flat: Vec<f64> = err_derivs.iter().flatten().copied().collect();
        if err_derivs.iter().any(|d| d.len() != m) {
            return Err(ControlError::DimensionMismatch {
                what: "error derivative",
                expected: m,
                found: err_derivs.iter().map(Vec::len).find(|&l| l != m).unwrap_or(0),
            });
        }
        let mut e = vec![vec![0.0; m]; err_derivs.len()];
        let mu = Self::fill(&flat, m, gains, &mut e)?;
        Ok(Self { e, mu })
    }

    /// Same as [`build`](Self::build) for a derivative-major flat slice
    /// `[e, ė, …]`, writing `e_1 … e_r` into `out` in the same layout.
    /// Returns `μ`.
    pub fn build_flat(
        err_derivs: &[f64],
        m: usize,
        gains: &[f64],
        out: &mut [f64],
    ) -> Result<Vec<f64>, ControlError> {
        let r = gains.len() + 1;
        if err_derivs.len() != r * m || out.len() != r * m {
            return Err(ControlError::DimensionMismatch {
                what: "flat error derivatives",
                expected: r * m,
                found: err_derivs.len().min(out.len()),
            });
        }
        for i in 0..r {
            let q = monic_product(&gains[..i]);
            let ei = &mut out[i * m..(i + 1) * m];
            ei.fill(0.0);
            for (j, &c) in q.iter().enumerate() {
                for (o, &d) in ei.iter_mut().zip(&err_derivs[j * m..(j + 1) * m]) {
                    *o += c * d;
                }
            }
        }
        Ok(monic_product(gains))
    }

    fn fill(flat: &[f64], m: usize, gains: &[f64], e: &mut [Vec<f64>]) -> Result<Vec<f64>, ControlError> {
        let r = gains.len() + 1;
        if e.len() != r {
            return Err(ControlError::DimensionMismatch {
                what: "derivative count",
                expected: r,
                found: e.len(),
            });
        }
        let mut out = vec![0.0; r * m];
        let mu = Self::build_flat(flat, m, gains, &mut out)?;
        for (i, ei) in e.iter_mut().enumerate() {
            ei.copy_from_slice(&out[i * m..(i + 1) * m]);
        }
        Ok(mu)
    }

    pub fn order(&self) -> usize {
        self.e.len()
    }

    /// `e_r`, the signal the funnel acts on.
    pub fn last(&self) -> &[f64] {
        self.e.last().map_or(&[], Vec::as_slice)
    }
}
