//! Gain modulation functions `N: [0, ∞) → ℝ`.
//!
//! The controller multiplies the filtered error by `N(k)`. Any continuous
//! surjection works, which is what lets the loop cope with an unknown sign of
//! the control direction: as `k` grows, `N(k)` sweeps through arbitrarily
//! large values of both signs until one of them stabilises the error.
//!
//! Surjectivity cannot be checked for an arbitrary closure, so only the
//! registered families below are accepted by name. A user function can still
//! be supplied through [`Surjection::unchecked`].

use std::fmt;
use std::sync::Arc;

/// Signature of a user-supplied gain function.
pub type GainFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Default)]
pub enum Surjection {
    /// `N(s) = s·sin s`, the default.
    #[default]
    SSinS,
    /// `N(s) = s·cos s`.
    SCosS,
    /// A user function whose surjectivity the caller vouches for.
    Unchecked { name: String, f: GainFn },
}

impl Surjection {
    /// Names accepted by [`Surjection::from_name`].
    pub const REGISTERED: [&'static str; 2] = ["s_sin_s", "s_cos_s"];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "s_sin_s" | "s*sin(s)" => Some(Self::SSinS),
            "s_cos_s" | "s*cos(s)" => Some(Self::SCosS),
            _ => None,
        }
    }

    /// Wraps an arbitrary function. Nothing about it is verified.
    pub fn unchecked(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Unchecked {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::SSinS => "s_sin_s",
            Self::SCosS => "s_cos_s",
            Self::Unchecked { name, .. } => name,
        }
    }

    /// True for the built-in families known to be continuous surjections.
    pub fn is_registered(&self) -> bool {
        !matches!(self, Self::Unchecked { .. })
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::SSinS => s * s.sin(),
            Self::SCosS => s * s.cos(),
            Self::Unchecked { f, .. } => f(s),
        }
    }
}

impl fmt::Debug for Surjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unchecked { name, .. } => write!(f, "Unchecked({name})"),
            other => f.write_str(other.name()),
        }
    }
}

impl PartialEq for Surjection {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::SSinS, Self::SSinS) | (Self::SCosS, Self::SCosS) => true,
            (Self::Unchecked { name: a, f: fa }, Self::Unchecked { name: b, f: fb }) => {
                a == b && Arc::ptr_eq(fa, fb)
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registered_names_round_trip() {
        for name in Surjection::REGISTERED {
            let n = Surjection::from_name(name).unwrap();
            assert_eq!(n.name(), name);
            assert!(n.is_registered());
        }
        assert!(Surjection::from_name("tanh").is_none());
    }

    #[test]
    fn s_sin_s_at_one() {
        assert_eq!(Surjection::SSinS.eval(1.0), 1.0_f64.sin());
        assert_eq!(Surjection::SSinS.eval(0.0), 0.0);
    }

    #[test]
    fn registered_families_reach_both_signs_beyond_any_level() {
        // Sampled surjectivity: on [0, 2πn] both extremes exceed ±(2n-1)·π/2 in magnitude.
        for n in [Surjection::SSinS, Surjection::SCosS] {
            for level in [1.0, 10.0, 100.0] {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                let mut s = 0.0;
                while s < 4.0 * level + 10.0 {
                    let v = n.eval(s);
                    lo = lo.min(v);
                    hi = hi.max(v);
                    s += 1e-3;
                }
                assert!(lo < -level && hi > level, "{n:?} at level {level}");
            }
        }
    }

    #[test]
    fn unchecked_is_flagged() {
        let n = Surjection::unchecked("linear", |s| s - 1.0);
        assert!(!n.is_registered());
        assert_eq!(n.eval(3.0), 2.0);
        assert_eq!(format!("{n:?}"), "Unchecked(linear)");
    }
}
