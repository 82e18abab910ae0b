//! Known input saturation maps.
//!
//! Both kinds are continuous, bounded and equal to the identity on the ball
//! of radius `θ = M`, which is all the controller needs from a saturation.

use serde::{Deserialize, Serialize};

use crate::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationKind {
    /// Clamp every component to `[-M, M]`.
    Componentwise,
    /// Scale `v` back onto the sphere of radius `M` when `‖v‖ > M`.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSpec {
    pub kind: SaturationKind,
    /// Saturation level `M`.
    pub level: f64,
}

impl SaturationSpec {
    pub fn componentwise(level: f64) -> Self {
        Self {
            kind: SaturationKind::Componentwise,
            level,
        }
    }

    pub fn radial(level: f64) -> Self {
        Self {
            kind: SaturationKind::Radial,
            level,
        }
    }

    /// Radius of the ball on which the map is the identity.
    pub fn theta(&self) -> f64 {
        self.level
    }

    /// Upper bound on `‖sat(v)‖` for inputs of dimension `m`.
    pub fn bound(&self, m: usize) -> f64 {
        match self.kind {
            SaturationKind::Componentwise => self.level * (m as f64).sqrt(),
            SaturationKind::Radial => self.level,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.level.is_finite() && self.level > 0.0
    }

    /// Writes `sat(v)` into `u`.
    pub fn apply(&self, v: &[f64], u: &mut [f64]) {
        debug_assert_eq!(v.len(), u.len());
        let m = self.level;
        match self.kind {
            SaturationKind::Componentwise => {
                for (ui, &vi) in u.iter_mut().zip(v) {
                    *ui = if vi.abs() <= m { vi } else { m.copysign(vi) };
                }
            }
            SaturationKind::Radial => {
                let n = norm(v);
                if n <= m {
                    u.copy_from_slice(v);
                } else {
                    let mut scale = m / n;
                    loop {
                        for (ui, &vi) in u.iter_mut().zip(v) {
                            *ui = vi * scale;
                        }
                        // rounding may leave ‖u‖ a few ulps above M, which would break idempotence
                        if norm(u) <= m {
                            break;
                        }
                        scale *= 1.0 - f64::EPSILON;
                    }
                }
            }
        }
    }

    pub fn saturate(&self, v: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; v.len()];
        self.apply(v, &mut u);
        u
    }
}

/// `κ = ‖v − u‖`, zero exactly when the saturation is inactive.
pub fn saturation_defect(v: &[f64], u: &[f64]) -> f64 {
    v.iter()
        .zip(u)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_clamp_examples() {
        let sat = SaturationSpec::componentwise(8.0);
        assert_eq!(sat.saturate(&[10.0]), vec![8.0]);
        assert_eq!(sat.saturate(&[5.0]), vec![5.0]);
        assert_eq!(sat.saturate(&[-9.0]), vec![-8.0]);
    }

    #[test]
    fn defect_examples() {
        assert_eq!(saturation_defect(&[10.0], &[8.0]), 2.0);
        assert_eq!(saturation_defect(&[5.0], &[5.0]), 0.0);
        let sat = SaturationSpec::componentwise(8.0);
        let v = [6.0, 6.0];
        assert_eq!(saturation_defect(&v, &sat.saturate(&v)), 0.0);
    }

    #[test]
    fn radial_scales_onto_sphere() {
        let sat = SaturationSpec::radial(5.0);
        let u = sat.saturate(&[6.0, 8.0]);
        assert!((u[0] - 3.0).abs() < 1e-15 && (u[1] - 4.0).abs() < 1e-15);
    }

    fn specs() -> impl Strategy<Value = SaturationSpec> {
        (0.1f64..20.0, any::<bool>()).prop_map(|(level, radial)| {
            if radial {
                SaturationSpec::radial(level)
            } else {
                SaturationSpec::componentwise(level)
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn idempotent_bounded_and_identity_near_zero(
            spec in specs(),
            v in prop::collection::vec(-50.0f64..50.0, 1..4),
        ) {
            let u = spec.saturate(&v);
            prop_assert_eq!(spec.saturate(&u), u.clone());
            prop_assert!(norm(&u) <= spec.bound(v.len()) * (1.0 + 1e-15));
            if norm(&v) <= spec.theta() {
                prop_assert_eq!(&u, &v);
            }
            let kappa = saturation_defect(&v, &u);
            prop_assert_eq!(kappa == 0.0, u == v);
        }
    }
}
