//! Controller design parameters and their admissibility conditions.

use std::fmt;

use crate::surjection::Surjection;

/// Design parameters of the funnel controller.
///
/// Admissible values satisfy `α, β > 0`, `k_i > α` for every gain and
/// `ψ⁰ > β/α`. The relative degree is `r = gains.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub alpha: f64,
    pub beta: f64,
    pub psi0: f64,
    /// `k_1, …, k_{r-1}`.
    pub gains: Vec<f64>,
    pub surjection: Surjection,
    /// Output dimension.
    pub m: usize,
}

/// One failed admissibility condition.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamViolation {
    AlphaNotPositive(f64),
    BetaNotPositive(f64),
    /// `k_index ≤ alpha`, with a 1-based index.
    GainBelowAlpha { index: usize, gain: f64, alpha: f64 },
    Psi0BelowEquilibrium { psi0: f64, equilibrium: f64 },
    ZeroOutputDimension,
    NonFinite(&'static str),
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AlphaNotPositive(a) => write!(f, "alpha ≤ 0 (alpha = {a})"),
            Self::BetaNotPositive(b) => write!(f, "beta ≤ 0 (beta = {b})"),
            Self::GainBelowAlpha { index, gain, alpha } => {
                write!(f, "k_{index} ≤ alpha (k_{index} = {gain}, alpha = {alpha})")
            }
            Self::Psi0BelowEquilibrium { psi0, equilibrium } => {
                write!(f, "psi0 ≤ beta/alpha (psi0 = {psi0}, beta/alpha = {equilibrium})")
            }
            Self::ZeroOutputDimension => f.write_str("m < 1"),
            Self::NonFinite(field) => write!(f, "{field} is not finite"),
        }
    }
}

/// All violations found by [`ControllerParams::validate`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid controller parameters: {}", list(.0))]
pub struct ParamErrors(pub Vec<ParamViolation>);

fn list(v: &[ParamViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ControllerParams {
    pub fn new(alpha: f64, beta: f64, psi0: f64, gains: Vec<f64>) -> Self {
        Self {
            alpha,
            beta,
            psi0,
            gains,
            surjection: Surjection::default(),
            m: 1,
        }
    }

    pub fn with_surjection(mut self, surjection: Surjection) -> Self {
        self.surjection = surjection;
        self
    }

    pub fn with_outputs(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    /// Relative degree `r`.
    pub fn order(&self) -> usize {
        self.gains.len() + 1
    }

    /// `β/α`, the rest point of the unsaturated funnel dynamics.
    pub fn equilibrium(&self) -> f64 {
        self.beta / self.alpha
    }

    /// Checks every admissibility condition and reports each one that fails.
    ///
    /// User surjections built with [`Surjection::unchecked`] are accepted;
    /// the unchecked flag is the caller's assertion.
    pub fn validate(&self) -> Result<(), ParamErrors> {
        let mut errs = Vec::new();
        for (name, x) in [("alpha", self.alpha), ("beta", self.beta), ("psi0", self.psi0)] {
            if !x.is_finite() {
                errs.push(ParamViolation::NonFinite(name));
            }
        }
        if self.gains.iter().any(|k| !k.is_finite()) {
            errs.push(ParamViolation::NonFinite("gains"));
        }
        if !errs.is_empty() {
            return Err(ParamErrors(errs));
        }
        if self.alpha <= 0.0 {
            errs.push(ParamViolation::AlphaNotPositive(self.alpha));
        }
        if self.beta <= 0.0 {
            errs.push(ParamViolation::BetaNotPositive(self.beta));
        }
        for (i, &k) in self.gains.iter().enumerate() {
            if k <= self.alpha {
                errs.push(ParamViolation::GainBelowAlpha {
                    index: i + 1,
                    gain: k,
                    alpha: self.alpha,
                });
            }
        }
        if self.alpha > 0.0 && self.psi0 <= self.equilibrium() {
            errs.push(ParamViolation::Psi0BelowEquilibrium {
                psi0: self.psi0,
                equilibrium: self.equilibrium(),
            });
        }
        if self.m == 0 {
            errs.push(ParamViolation::ZeroOutputDimension);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ParamErrors(errs))
        }
    }

    /// `ψ_des(t) = (ψ⁰ − β/α)e^{−αt} + β/α`.
    pub fn desired_funnel(&self, t: f64) -> f64 {
        let eq = self.equilibrium();
        (self.psi0 - eq) * (-self.alpha * t).exp() + eq
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench(gains: Vec<f64>, psi0: f64) -> ControllerParams {
        ControllerParams::new(1.5, 0.15, psi0, gains)
    }

    #[test]
    fn benchmark_parameters_are_admissible() {
        assert_eq!(bench(vec![2.5, 2.5], 3.1).validate(), Ok(()));
        assert_eq!(bench(vec![2.5, 2.5], 3.1).order(), 3);
    }

    #[test]
    fn small_psi0_is_named() {
        let err = bench(vec![2.5, 2.5], 0.05).validate().unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].to_string().starts_with("psi0 ≤ beta/alpha"));
    }

    #[test]
    fn low_gain_is_named() {
        let err = bench(vec![1.0, 2.5], 3.1).validate().unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].to_string().starts_with("k_1 ≤ alpha"));
    }

    #[test]
    fn every_violation_is_listed() {
        let p = ControllerParams::new(-1.0, 0.0, 1.0, vec![-2.0, 0.5]).with_outputs(0);
        let err = p.validate().unwrap_err();
        // alpha, beta, k_1 and m; psi0 is not compared when alpha ≤ 0
        assert_eq!(err.0.len(), 4, "{err}");
    }

    #[test]
    fn non_finite_short_circuits() {
        let err = bench(vec![f64::NAN], 3.1).validate().unwrap_err();
        assert_eq!(err.0, vec![ParamViolation::NonFinite("gains")]);
    }

    #[test]
    fn desired_funnel_shape() {
        let p = bench(vec![2.5, 2.5], 3.1);
        assert!((p.desired_funnel(0.0) - 3.1).abs() < 1e-15);
        assert!((p.desired_funnel(60.0) - 0.1).abs() < 1e-15);
        let flat = ControllerParams::new(1.5, 0.15, 0.1, vec![]);
        for t in [0.0, 1.0, 7.0] {
            assert!((flat.desired_funnel(t) - 0.1).abs() < 1e-16);
        }
    }
}
