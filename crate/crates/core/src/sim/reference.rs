use serde::{Deserialize, Serialize};

/// Analytic reference signals, applied to every output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    /// `amplitude · cos(omega·t + phase) + offset`.
    Cosine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `Σ c_i t^i`, lowest degree first.
    Polynomial { coeffs: Vec<f64> },
    Constant { value: f64 },
}

impl Reference {
    /// `½ cos t`.
    pub fn benchmark() -> Self {
        Reference::Cosine {
            amplitude: 0.5,
            omega: 1.0,
            phase: 0.0,
            offset: 0.0,
        }
    }

    /// The `j`-th derivative at `t`.
    pub fn derivative(&self, t: f64, j: usize) -> f64 {
        match self {
            Reference::Cosine {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                let arg = omega * t + phase + j as f64 * std::f64::consts::FRAC_PI_2;
                let base = amplitude * omega.powi(j as i32) * arg.cos();
                if j == 0 {
                    base + offset
                } else {
                    base
                }
            }
            Reference::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (i, c) in coeffs.iter().enumerate().skip(j).rev() {
                    let falling: f64 = (i - j + 1..=i).map(|f| f as f64).product();
                    acc = acc * t + c * falling;
                }
                acc
            }
            Reference::Constant { value } => {
                if j == 0 {
                    *value
                } else {
                    0.0
                }
            }
        }
    }

    /// Fills `out` with `(y_ref, ẏ_ref, …)`, each repeated over `m` channels.
    pub fn derivatives(&self, t: f64, m: usize, out: &mut [f64]) {
        for (j, chunk) in out.chunks_mut(m).enumerate() {
            chunk.fill(self.derivative(t, j));
        }
    }

    /// The same signal plus a constant.
    pub fn shifted(&self, c: f64) -> Self {
        match self.clone() {
            Reference::Cosine {
                amplitude,
                omega,
                phase,
                offset,
            } => Reference::Cosine {
                amplitude,
                omega,
                phase,
                offset: offset + c,
            },
            Reference::Polynomial { mut coeffs } => {
                if coeffs.is_empty() {
                    coeffs.push(0.0);
                }
                coeffs[0] += c;
                Reference::Polynomial { coeffs }
            }
            Reference::Constant { value } => Reference::Constant { value: value + c },
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Reference::Cosine {
                amplitude,
                omega,
                phase,
                offset,
            } => [amplitude, omega, phase, offset].iter().all(|v| v.is_finite()),
            Reference::Polynomial { coeffs } => coeffs.iter().all(|v| v.is_finite()),
            Reference::Constant { value } => value.is_finite(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_derivatives() {
        let r = Reference::benchmark();
        let mut out = [0.0; 4];
        r.derivatives(0.0, 1, &mut out);
        assert!((out[0] - 0.5).abs() < 1e-16 && out[1].abs() < 1e-16 && (out[2] + 0.5).abs() < 1e-16);
        assert!(out[3].abs() < 1e-15);
        let t = 0.7;
        assert!((r.derivative(t, 1) + 0.5 * t.sin()).abs() < 1e-15);
        assert!((r.derivative(t, 3) - 0.5 * t.sin()).abs() < 1e-15);
    }

    #[test]
    fn polynomial_derivatives() {
        // 1 + 2t + 3t² + 4t³
        let r = Reference::Polynomial {
            coeffs: vec![1.0, 2.0, 3.0, 4.0],
        };
        let t: f64 = 1.5;
        assert_eq!(r.derivative(t, 0), 1.0 + 2.0 * t + 3.0 * t * t + 4.0 * t.powi(3));
        assert_eq!(r.derivative(t, 1), 2.0 + 6.0 * t + 12.0 * t * t);
        assert_eq!(r.derivative(t, 2), 6.0 + 24.0 * t);
        assert_eq!(r.derivative(t, 3), 24.0);
        assert_eq!(r.derivative(t, 4), 0.0);
    }

    #[test]
    fn shift_moves_only_the_value() {
        for r in [
            Reference::benchmark(),
            Reference::Constant { value: 2.0 },
            Reference::Polynomial { coeffs: vec![0.0, 1.0] },
        ] {
            let s = r.shifted(3.0);
            assert!((s.derivative(0.4, 0) - r.derivative(0.4, 0) - 3.0).abs() < 1e-15);
            assert_eq!(s.derivative(0.4, 1), r.derivative(0.4, 1));
        }
    }
}
