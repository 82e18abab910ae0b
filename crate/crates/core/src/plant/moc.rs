use std::f64::consts::FRAC_PI_2;

use super::{Plant, PlantError};
use crate::ode::DenseTrajectory;

/// A car of mass `m1` carrying a mass `m2` on a ramp of angle `ϑ`, coupled
/// by a spring-damper. Input: force on the car. Output: `y = z + s cos ϑ`.
///
/// ```text
/// [m1+m2       m2 cos ϑ] [z̈]   [    0    ]   [u]
/// [m2 cos ϑ    m2      ] [s̈] + [k s + d ṡ] = [0]
/// ```
///
/// State layout: `(z, s, ż, ṡ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassOnCar {
    pub m1: f64,
    pub m2: f64,
    pub k_spring: f64,
    pub d_damp: f64,
    pub theta: f64,
    pub initial: [f64; 4],
}

impl MassOnCar {
    pub fn new(m1: f64, m2: f64, k_spring: f64, d_damp: f64, theta: f64) -> Result<Self, PlantError> {
        let plant = Self {
            m1,
            m2,
            k_spring,
            d_damp,
            theta,
            initial: [0.0; 4],
        };
        plant.check()?;
        Ok(plant)
    }

    /// `m1 = 4, m2 = 1, k = 2, d = 1, ϑ = 0`, starting at rest.
    pub fn benchmark() -> Self {
        Self {
            m1: 4.0,
            m2: 1.0,
            k_spring: 2.0,
            d_damp: 1.0,
            theta: 0.0,
            initial: [0.0; 4],
        }
    }

    pub fn with_initial(mut self, x0: [f64; 4]) -> Self {
        self.initial = x0;
        self
    }

    fn check(&self) -> Result<(), PlantError> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("k_spring", self.k_spring),
            ("d_damp", self.d_damp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlantError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..FRAC_PI_2).contains(&self.theta) {
            return Err(PlantError::InvalidParameter(format!(
                "ramp angle must lie in [0, π/2), got {}",
                self.theta
            )));
        }
        Ok(())
    }

    /// `[[m1+m2, m2 cos ϑ], [m2 cos ϑ, m2]]`, row-major.
    pub fn mass_matrix(&self) -> [f64; 4] {
        let c = self.m2 * self.theta.cos();
        [self.m1 + self.m2, c, c, self.m2]
    }

    /// `m2 (m1 + m2 sin²ϑ)`.
    pub fn determinant(&self) -> f64 {
        let s = self.theta.sin();
        self.m2 * (self.m1 + self.m2 * s * s)
    }

    /// `(ż, ṡ, z̈, s̈)` for state `(z, s, ż, ṡ)` and force `u`.
    pub fn state_derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) -> Result<(), PlantError> {
        let det = self.determinant();
        if !(det > 0.0) {
            return Err(PlantError::SingularMassMatrix { det });
        }
        let [a, b, _, c] = self.mass_matrix();
        let coupling = self.k_spring * x[1] + self.d_damp * x[3];
        // explicit inverse applied to (u, −coupling)
        dx[0] = x[2];
        dx[1] = x[3];
        dx[2] = (c * u + b * coupling) / det;
        dx[3] = (-b * u - a * coupling) / det;
        Ok(())
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        x[0] + x[1] * self.theta.cos()
    }

    /// `(y, ẏ, ÿ)`; only the flat configuration has relative degree three.
    pub fn output_triple(&self, x: &[f64]) -> Result<[f64; 3], PlantError> {
        if self.theta != 0.0 {
            return Err(PlantError::UnsupportedConfiguration(format!(
                "output derivatives need ramp angle 0, got {}",
                self.theta
            )));
        }
        let ydd = -(self.k_spring * x[1] + self.d_damp * x[3]) / self.m2;
        Ok([x[0] + x[1], x[2] + x[3], ydd])
    }

    /// Coefficient of `u` in `y'''` for the flat configuration, `d/(m1 m2)`.
    pub fn input_gain(&self) -> f64 {
        self.d_damp / (self.m1 * self.m2)
    }
}

impl Plant for MassOnCar {
    fn name(&self) -> &str {
        "mass-on-car"
    }
    fn order(&self) -> usize {
        3
    }
    fn outputs(&self) -> usize {
        1
    }
    fn state_dim(&self) -> usize {
        4
    }
    fn initial_state(&self, _t0: f64) -> Vec<f64> {
        self.initial.to_vec()
    }
    fn output_derivatives(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), PlantError> {
        out.copy_from_slice(&self.output_triple(x)?);
        Ok(())
    }
    fn dynamics(
        &self,
        _t: f64,
        x: &[f64],
        u: &[f64],
        _past: &DenseTrajectory,
        dx: &mut [f64],
    ) -> Result<(), PlantError> {
        self.state_derivative(x, u[0], dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_at_rest() {
        let p = MassOnCar::benchmark();
        let mut dx = [1.0; 4];
        p.state_derivative(&[0.0; 4], 0.0, &mut dx).unwrap();
        assert_eq!(dx, [0.0; 4]);
    }

    #[test]
    fn force_step_solves_mass_system() {
        let p = MassOnCar::benchmark();
        let mut dx = [0.0; 4];
        p.state_derivative(&[0.0; 4], 4.0, &mut dx).unwrap();
        assert!((dx[2] - 1.0).abs() < 1e-15 && (dx[3] + 1.0).abs() < 1e-15);
        assert_eq!(p.determinant(), 4.0);
    }

    #[test]
    fn spring_sets_output_acceleration() {
        let p = MassOnCar::benchmark();
        let x = [0.0, 1.0, 0.0, 0.0];
        let mut dx = [0.0; 4];
        p.state_derivative(&x, 0.0, &mut dx).unwrap();
        assert!((dx[2] + dx[3] + 2.0).abs() < 1e-15);
        assert_eq!(p.output_triple(&x).unwrap(), [1.0, 0.0, -2.0]);
        assert_eq!(p.output_triple(&[0.0; 4]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn initial_error_against_cosine_reference() {
        let p = MassOnCar::benchmark();
        let y = p.output_triple(&[0.0; 4]).unwrap();
        let r = [0.5, 0.0, -0.5];
        let e: Vec<f64> = y.iter().zip(r).map(|(a, b)| a - b).collect();
        assert_eq!(e, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn tilted_ramp_rejects_derivative_extraction() {
        let p = MassOnCar::new(4.0, 1.0, 2.0, 1.0, 0.3).unwrap();
        assert!(matches!(p.output_triple(&[0.0; 4]), Err(PlantError::UnsupportedConfiguration(_))));
        let mut dx = [0.0; 4];
        p.state_derivative(&[0.0, 0.2, 0.0, 0.1], 1.0, &mut dx).unwrap();
        // residual of the mass equation
        let [a, b, _, c] = p.mass_matrix();
        let coupling = 2.0 * 0.2 + 0.1;
        assert!((a * dx[2] + b * dx[3] - 1.0).abs() < 1e-14);
        assert!((b * dx[2] + c * dx[3] + coupling).abs() < 1e-14);
    }

    #[test]
    fn parameters_are_checked() {
        assert!(MassOnCar::new(0.0, 1.0, 2.0, 1.0, 0.0).is_err());
        assert!(MassOnCar::new(4.0, 1.0, 2.0, 1.0, FRAC_PI_2).is_err());
    }

    proptest! {
        #[test]
        fn determinant_matches_direct(
            m1 in 0.1f64..10.0, m2 in 0.1f64..10.0, theta in 0.0f64..1.5,
        ) {
            let p = MassOnCar::new(m1, m2, 1.0, 1.0, theta).unwrap();
            let [a, b, c, d] = p.mass_matrix();
            let direct = a * d - b * c;
            prop_assert!((p.determinant() - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}
