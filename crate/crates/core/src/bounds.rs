//! Runtime checks of the guarantees the controller provides.
//!
//! Along any closed-loop trajectory with `‖e_r‖ < ψ`:
//!
//! * every filtered error obeys `‖e_i(t)‖ < σ_i ψ(t)` with constants that
//!   depend only on the gains, `α` and the initial ratios `‖e_j(0)‖/ψ(0)`;
//! * `‖e_r(t)‖ ≤ ε ψ(t)` for some `ε < 1`;
//! * `ψ(t) ≥ (ψ⁰ − β/α)e^{−αt} + β/α`;
//! * on every interval `[t0, t1)` without saturation,
//!   `ψ(t) = β/α + (ψ(t0) − β/α)e^{−α(t−t0)}`.
//!
//! The functions here evaluate these statements on sampled trajectories and
//! report the worst sample of each.

use std::ops::Range;

use serde::Serialize;

use crate::params::ControllerParams;
use crate::saturation::SaturationSpec;
use crate::sim::Trajectory;
use crate::norm;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("gain k_{index} = {gain} does not exceed alpha = {alpha}")]
    GainBelowAlpha { index: usize, gain: f64, alpha: f64 },
    #[error("expected {expected} initial ratios, got {found}")]
    RatioCount { expected: usize, found: usize },
    #[error("precondition violated at t = {t}: ‖e_r‖ = {norm} ≥ ψ = {psi}")]
    OutsideFunnel { t: f64, norm: f64, psi: f64 },
    #[error("trajectory is empty")]
    Empty,
}

/// How the products inside the bound are indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductIndexing {
    /// The term for `‖e_j(0)‖` carries `∏_{p=i}^{j-1} 1/(k_p − α)`, which is
    /// what unrolling `ℓ_i ≤ max{‖e_i(0)‖/ψ(0), ℓ_{i+1}/(k_i − α)}` yields.
    #[default]
    Recursive,
    /// `∏_{p=r-j+i}^{r-1} 1/(k_p − α)`: the same number of factors, taken
    /// from the top of the gain list. Agrees with `Recursive` when all gains
    /// are equal.
    TopAligned,
}

/// Multipliers `σ_1, …, σ_r` of the bound `‖e_i(t)‖ < σ_i ψ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaConstants {
    /// `σ_i` at index `i − 1`; the last entry is `σ_r = 1`.
    pub sigma: Vec<f64>,
    pub gains: Vec<f64>,
    pub alpha: f64,
    /// `‖e_j(0)‖/ψ(0)` for `j = 1, …, r−1`.
    pub initial_ratios: Vec<f64>,
}

/// Evaluates `σ_i = max{ ∏_{j=i}^{r-1} 1/(k_j−α), max_{j=i..r-1} P_{ij}·‖e_j(0)‖/ψ(0) }`
/// with `P_{ij}` the product selected by `indexing` (empty products are 1).
pub fn lemma_constants_with(
    gains: &[f64],
    alpha: f64,
    initial_ratios: &[f64],
    indexing: ProductIndexing,
) -> Result<LemmaConstants, BoundsError> {
    for (i, &k) in gains.iter().enumerate() {
        if !(k > alpha) {
            return Err(BoundsError::GainBelowAlpha {
                index: i + 1,
                gain: k,
                alpha,
            });
        }
    }
    if initial_ratios.len() != gains.len() {
        return Err(BoundsError::RatioCount {
            expected: gains.len(),
            found: initial_ratios.len(),
        });
    }
    let r = gains.len() + 1;
    // inv[p] = 1/(k_{p+1} − α)
    let inv: Vec<f64> = gains.iter().map(|k| 1.0 / (k - alpha)).collect();
    let prod = |from: usize, to: usize| -> f64 { (from..to).map(|p| inv[p]).product() };
    let mut sigma = Vec::with_capacity(r);
    for i in 0..r - 1 {
        let mut s = prod(i, r - 1);
        for j in i..r - 1 {
            let factor = match indexing {
                ProductIndexing::Recursive => prod(i, j),
                ProductIndexing::TopAligned => prod(r - 1 - (j - i), r - 1),
            };
            s = s.max(factor * initial_ratios[j]);
        }
        sigma.push(s);
    }
    sigma.push(1.0);
    Ok(LemmaConstants {
        sigma,
        gains: gains.to_vec(),
        alpha,
        initial_ratios: initial_ratios.to_vec(),
    })
}

/// [`lemma_constants_with`] using [`ProductIndexing::Recursive`].
pub fn lemma_constants(gains: &[f64], alpha: f64, initial_ratios: &[f64]) -> Result<LemmaConstants, BoundsError> {
    lemma_constants_with(gains, alpha, initial_ratios, ProductIndexing::Recursive)
}

/// Initial ratios `‖e_j(0)‖/ψ(0)`, `j < r`, read off the first sample.
pub fn initial_ratios(traj: &Trajectory) -> Result<Vec<f64>, BoundsError> {
    let first = traj.samples.first().ok_or(BoundsError::Empty)?;
    Ok((0..traj.r - 1)
        .map(|j| norm(first.chain(j, traj.m)) / first.psi)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexBound {
    /// 1-based chain index.
    pub i: usize,
    pub sigma: f64,
    pub violations: usize,
    /// Largest `‖e_i‖/(σ_i ψ)` seen.
    pub worst_ratio: f64,
    pub worst_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub indices: Vec<IndexBound>,
    pub passed: bool,
}

/// Relative slack on the strict inequalities.
pub const LEMMA_SLACK: f64 = 1e-9;

/// Checks `‖e_i(t)‖ ≤ σ_i ψ(t)(1 + slack)` for `i = 1, …, r` at every sample.
pub fn check_lemma_bound(
    traj: &Trajectory,
    c: &LemmaConstants,
    slack: f64,
) -> Result<LemmaReport, BoundsError> {
    if traj.is_empty() {
        return Err(BoundsError::Empty);
    }
    for (n, s) in traj.samples.iter().enumerate() {
        let er = traj.e_r_norm(n);
        if !(er < s.psi) {
            return Err(BoundsError::OutsideFunnel {
                t: s.t,
                norm: er,
                psi: s.psi,
            });
        }
    }
    let mut indices = Vec::with_capacity(traj.r);
    for i in 0..traj.r {
        let sigma = c.sigma[i];
        let mut entry = IndexBound {
            i: i + 1,
            sigma,
            violations: 0,
            worst_ratio: 0.0,
            worst_t: traj.samples[0].t,
        };
        for (n, s) in traj.samples.iter().enumerate() {
            let ei = traj.chain_norm(n, i);
            let ratio = ei / (sigma * s.psi);
            if ratio > entry.worst_ratio {
                entry.worst_ratio = ratio;
                entry.worst_t = s.t;
            }
            if ei > sigma * s.psi * (1.0 + slack) {
                entry.violations += 1;
            }
        }
        indices.push(entry);
    }
    let passed = indices.iter().all(|e| e.violations == 0);
    Ok(LemmaReport { indices, passed })
}

/// `ψ(t) ≤ β/α + μ(t0)e^{−α(t−t0)}` with `μ(t0) = ψ(t0) − β/α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversionEnvelope {
    pub t0: f64,
    pub mu_t0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ReversionEnvelope {
    pub fn new(t0: f64, psi_t0: f64, alpha: f64, beta: f64) -> Self {
        Self {
            t0,
            mu_t0: psi_t0 - beta / alpha,
            alpha,
            beta,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.beta / self.alpha + self.mu_t0 * (-self.alpha * (t - self.t0)).exp()
    }
}

/// Samples with `κ` below this count as unsaturated.
pub const INACTIVE_KAPPA: f64 = 1e-12;

/// Runs of consecutive samples with `κ < threshold`.
///
/// A run that ends in a saturated sample loses its last sample: the
/// saturation may have started anywhere after it, and `ψ` at that sample
/// can already carry the effect.
pub fn inactive_intervals(traj: &Trajectory, threshold: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (n, s) in traj.samples.iter().enumerate() {
        match (s.kappa < threshold, start) {
            (true, None) => start = Some(n),
            (false, Some(a)) => {
                if n - 1 > a {
                    out.push(a..n - 1);
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push(a..traj.len());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversionTolerances {
    /// Slack on `ψ ≤ envelope`.
    pub upper: f64,
    /// Allowed `|ψ − envelope|` for the equality check.
    pub equality: f64,
    /// Intervals with fewer samples skip the equality check.
    pub min_samples: usize,
}

impl Default for ReversionTolerances {
    fn default() -> Self {
        Self {
            upper: 1e-8,
            equality: 1e-6,
            min_samples: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub t0: f64,
    pub t_end: f64,
    pub samples: usize,
    /// Largest `ψ − envelope`.
    pub max_excess: f64,
    /// Largest `|ψ − envelope|`.
    pub max_deviation: f64,
    pub upper_ok: bool,
    /// `None` when the interval is too short to be checked.
    pub equality_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversionReport {
    pub intervals: Vec<IntervalReport>,
    pub passed: bool,
}

/// Compares `ψ` with the exponential envelope on each given interval.
pub fn check_reversion(
    traj: &Trajectory,
    alpha: f64,
    beta: f64,
    intervals: &[Range<usize>],
    tol: &ReversionTolerances,
) -> ReversionReport {
    let mut reports = Vec::with_capacity(intervals.len());
    for range in intervals {
        let samples = &traj.samples[range.clone()];
        let Some(first) = samples.first() else { continue };
        let env = ReversionEnvelope::new(first.t, first.psi, alpha, beta);
        let (mut max_excess, mut max_dev) = (f64::NEG_INFINITY, 0.0f64);
        for s in samples {
            let d = s.psi - env.eval(s.t);
            max_excess = max_excess.max(d);
            max_dev = max_dev.max(d.abs());
        }
        reports.push(IntervalReport {
            t0: first.t,
            t_end: samples[samples.len() - 1].t,
            samples: samples.len(),
            max_excess,
            max_deviation: max_dev,
            upper_ok: max_excess <= tol.upper,
            equality_ok: (samples.len() >= tol.min_samples).then_some(max_dev <= tol.equality),
        });
    }
    let passed = reports.iter().all(|r| r.upper_ok && r.equality_ok != Some(false));
    ReversionReport {
        intervals: reports,
        passed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonReport {
    /// `max ‖e_r‖/ψ` over all samples.
    pub eps_hat: f64,
    pub worst_t: f64,
    pub passed: bool,
}

/// Empirical `ε̂ = max_t ‖e_r(t)‖/ψ(t)`; passes iff `ε̂ < 1`.
pub fn empirical_epsilon(traj: &Trajectory) -> Result<EpsilonReport, BoundsError> {
    if traj.is_empty() {
        return Err(BoundsError::Empty);
    }
    let mut eps_hat = 0.0f64;
    let mut worst_t = traj.samples[0].t;
    let mut finite = true;
    for (n, s) in traj.samples.iter().enumerate() {
        let q = traj.e_r_norm(n) / s.psi;
        finite &= q.is_finite() && s.psi > 0.0;
        if q > eps_hat || q.is_nan() {
            eps_hat = q;
            worst_t = s.t;
        }
    }
    Ok(EpsilonReport {
        eps_hat,
        worst_t,
        passed: finite && eps_hat < 1.0,
    })
}

/// `ψ_des(t) = (ψ⁰ − β/α)e^{−αt} + β/α`.
pub fn desired_funnel(t: f64, p: &ControllerParams) -> f64 {
    p.desired_funnel(t)
}

/// One named check with its verdict and the worst offending sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub worst_t: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub epsilon: Option<EpsilonReport>,
    pub lemma: Option<LemmaReport>,
    pub reversion: ReversionReport,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub lemma_slack: f64,
    pub reversion: ReversionTolerances,
    pub inactive_kappa: f64,
    /// Slack on `ψ ≥ ψ_des`.
    pub lower_bound_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            lemma_slack: LEMMA_SLACK,
            reversion: ReversionTolerances::default(),
            inactive_kappa: INACTIVE_KAPPA,
            lower_bound_tol: 1e-8,
        }
    }
}

/// Last sample time with `κ > threshold`, if any.
pub fn last_saturation_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    traj.samples.iter().rev().find(|s| s.kappa > threshold).map(|s| s.t)
}

/// Runs every trajectory check against the given design.
pub fn verify(
    traj: &Trajectory,
    params: &ControllerParams,
    saturation: &SaturationSpec,
    opts: &VerifyOptions,
) -> VerificationReport {
    let mut checks = Vec::new();
    let (alpha, beta) = (params.alpha, params.beta);

    let epsilon = empirical_epsilon(traj).ok();
    checks.push(match &epsilon {
        Some(e) => CheckResult {
            name: "funnel_invariance",
            passed: e.passed,
            worst_t: Some(e.worst_t),
            detail: format!("eps_hat = {:.12}", e.eps_hat),
        },
        None => CheckResult {
            name: "funnel_invariance",
            passed: false,
            worst_t: None,
            detail: "empty trajectory".into(),
        },
    });

    let lemma = initial_ratios(traj)
        .and_then(|ratios| lemma_constants(&params.gains, alpha, &ratios))
        .and_then(|c| check_lemma_bound(traj, &c, opts.lemma_slack));
    let (lemma, lemma_check) = match lemma {
        Ok(rep) => {
            let worst = rep
                .indices
                .iter()
                .max_by(|a, b| a.worst_ratio.total_cmp(&b.worst_ratio))
                .cloned();
            let check = CheckResult {
                name: "lemma_bound",
                passed: rep.passed,
                worst_t: worst.as_ref().map(|w| w.worst_t),
                detail: worst.map_or_else(String::new, |w| {
                    format!("worst ‖e_{}‖/(σψ) = {:.12} (σ = {:.12})", w.i, w.worst_ratio, w.sigma)
                }),
            };
            (Some(rep), check)
        }
        Err(e) => (
            None,
            CheckResult {
                name: "lemma_bound",
                passed: false,
                worst_t: None,
                detail: e.to_string(),
            },
        ),
    };
    checks.push(lemma_check);

    let intervals = inactive_intervals(traj, opts.inactive_kappa);
    let reversion = check_reversion(traj, alpha, beta, &intervals, &opts.reversion);
    let worst_iv = reversion
        .intervals
        .iter()
        .max_by(|a, b| a.max_deviation.total_cmp(&b.max_deviation));
    checks.push(CheckResult {
        name: "reversion",
        passed: reversion.passed,
        worst_t: worst_iv.map(|w| w.t0),
        detail: worst_iv.map_or_else(
            || "no unsaturated intervals".to_string(),
            |w| {
                format!(
                    "{} intervals; worst |ψ − envelope| = {:.3e} on [{}, {}]",
                    reversion.intervals.len(),
                    w.max_deviation,
                    w.t0,
                    w.t_end
                )
            },
        ),
    });

    let mut worst_gap = f64::INFINITY;
    let mut gap_t = None;
    let mut min_psi = f64::INFINITY;
    let mut min_psi_t = None;
    for s in &traj.samples {
        let gap = s.psi - params.desired_funnel(s.t);
        if gap < worst_gap {
            worst_gap = gap;
            gap_t = Some(s.t);
        }
        if s.psi < min_psi {
            min_psi = s.psi;
            min_psi_t = Some(s.t);
        }
    }
    checks.push(CheckResult {
        name: "funnel_lower_bound",
        passed: !traj.is_empty() && worst_gap >= -opts.lower_bound_tol,
        worst_t: gap_t,
        detail: format!("min ψ − ψ_des = {worst_gap:.3e}"),
    });
    checks.push(CheckResult {
        name: "psi_above_equilibrium",
        passed: !traj.is_empty() && min_psi > params.equilibrium(),
        worst_t: min_psi_t,
        detail: format!("min ψ = {min_psi:.12}, β/α = {:.12}", params.equilibrium()),
    });

    let bound = saturation.bound(traj.m);
    let (mut max_u, mut max_u_t) = (0.0f64, None);
    for s in &traj.samples {
        let n = norm(&s.u);
        if !(n <= max_u) {
            max_u = n;
            max_u_t = Some(s.t);
        }
    }
    checks.push(CheckResult {
        name: "input_bound",
        passed: max_u <= bound,
        worst_t: max_u_t,
        detail: format!("max ‖u‖ = {max_u:.12}, bound = {bound}"),
    });

    let last_sat = last_saturation_time(traj, opts.inactive_kappa);
    let mut after = 0usize;
    let mut first_bad = None;
    for (n, s) in traj.samples.iter().enumerate() {
        if last_sat.is_some_and(|ts| s.t <= ts) {
            continue;
        }
        if !(traj.error_norm(n) < params.desired_funnel(s.t)) {
            after += 1;
            first_bad.get_or_insert(s.t);
        }
    }
    checks.push(CheckResult {
        name: "desired_funnel_after_saturation",
        passed: after == 0,
        worst_t: first_bad,
        detail: format!(
            "{after} samples with ‖e‖ ≥ ψ_des after t = {}",
            last_sat.map_or("start".to_string(), |t| t.to_string())
        ),
    });

    VerificationReport {
        checks,
        epsilon,
        lemma,
        reversion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate, FnSystem, IntegratorConfig};
    use crate::sim::Sample;
    use proptest::prelude::*;

    fn sample(t: f64, e: Vec<f64>, psi: f64, kappa: f64) -> Sample {
        let n = e.len();
        Sample {
            t,
            y: vec![0.0; n],
            e,
            psi,
            k: 1.0,
            v: vec![0.0],
            u: vec![0.0],
            kappa,
        }
    }

    #[test]
    fn equal_offset_gains_reduce_to_unit_products() {
        let ratios = [0.3, 1.7, 0.2];
        let c = lemma_constants(&[2.0, 2.0, 2.0], 1.0, &ratios).unwrap();
        for i in 0..3 {
            let expect = ratios[i..].iter().fold(1.0f64, |a, &b| a.max(b));
            assert_eq!(c.sigma[i], expect);
        }
        assert_eq!(c.sigma[3], 1.0);
    }

    #[test]
    fn order_two_single_product() {
        let c = lemma_constants(&[2.0], 1.0, &[0.0]).unwrap();
        assert_eq!(c.sigma, vec![1.0, 1.0]);
    }

    #[test]
    fn benchmark_initial_ratios() {
        let ratios: [f64; 2] = [0.5 / 3.1, 1.25 / 3.1];
        assert!((ratios[0] - 0.1613).abs() < 1e-4 && (ratios[1] - 0.4032).abs() < 1e-4);
        let c = lemma_constants(&[2.5, 2.5], 1.5, &ratios).unwrap();
        assert_eq!(c.sigma, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn indexing_variants_differ_only_for_unequal_gains() {
        let ratios = [0.0, 5.0];
        let rec = lemma_constants_with(&[1.1, 4.0], 1.0, &ratios, ProductIndexing::Recursive).unwrap();
        let top = lemma_constants_with(&[1.1, 4.0], 1.0, &ratios, ProductIndexing::TopAligned).unwrap();
        // term for e_2(0) in σ_1: 5/(k_1 − α) = 50 versus 5/(k_2 − α) = 5/3
        assert!((rec.sigma[0] - 50.0).abs() < 1e-9);
        assert!((top.sigma[0] - 1.0 / (0.1 * 3.0)).abs() < 1e-9);
        let same_rec = lemma_constants_with(&[2.0, 2.0], 1.0, &ratios, ProductIndexing::Recursive).unwrap();
        let same_top = lemma_constants_with(&[2.0, 2.0], 1.0, &ratios, ProductIndexing::TopAligned).unwrap();
        assert_eq!(same_rec, same_top);
    }

    #[test]
    fn gains_must_exceed_alpha() {
        assert!(matches!(
            lemma_constants(&[1.0], 1.0, &[0.0]),
            Err(BoundsError::GainBelowAlpha { index: 1, .. })
        ));
        assert!(matches!(
            lemma_constants(&[2.0], 1.0, &[]),
            Err(BoundsError::RatioCount { .. })
        ));
    }

    #[test]
    fn zero_error_trajectory_passes() {
        let mut traj = Trajectory::new(3, 1);
        for n in 0..10 {
            traj.samples.push(sample(n as f64, vec![0.0; 3], 1.0 + n as f64, 0.0));
        }
        let c = lemma_constants(&[2.5, 2.5], 1.5, &initial_ratios(&traj).unwrap()).unwrap();
        assert!(check_lemma_bound(&traj, &c, LEMMA_SLACK).unwrap().passed);
        assert_eq!(empirical_epsilon(&traj).unwrap().eps_hat, 0.0);
    }

    #[test]
    fn synthetic_chain_respects_bound() {
        // ψ ≡ 1, e_3 ≡ 0.9, ė_i = e_{i+1} − k_i e_i from rest
        let gains = [2.5, 2.5];
        let mut sys = FnSystem::new(2, move |_, x: &[f64], dx: &mut [f64]| {
            dx[1] = 0.9 - gains[1] * x[1];
            dx[0] = x[1] - gains[0] * x[0];
        });
        let sol = integrate(&mut sys, &[0.0, 0.0], (0.0, 10.0), &IntegratorConfig::default()).unwrap();
        let mut traj = Trajectory::new(3, 1);
        for n in 0..=1000 {
            let t = n as f64 * 0.01;
            let x = sol.dense.eval_vec(t).unwrap();
            traj.samples.push(sample(t, vec![x[0], x[1], 0.9], 1.0, 0.0));
        }
        let c = lemma_constants(&gains, 1.5, &initial_ratios(&traj).unwrap()).unwrap();
        let rep = check_lemma_bound(&traj, &c, LEMMA_SLACK).unwrap();
        assert!(rep.passed, "{rep:?}");
        // e_2 → 0.9/2.5 = 0.36 < σ_2 = 1
        assert!(rep.indices[1].worst_ratio < 0.37);
    }

    #[test]
    fn precondition_is_enforced() {
        let mut traj = Trajectory::new(2, 1);
        traj.samples.push(sample(0.0, vec![0.0, 1.0], 1.0, 0.0));
        let c = lemma_constants(&[2.0], 1.0, &[0.0]).unwrap();
        assert!(matches!(
            check_lemma_bound(&traj, &c, LEMMA_SLACK),
            Err(BoundsError::OutsideFunnel { .. })
        ));
    }

    #[test]
    fn envelope_values() {
        let flat = ReversionEnvelope::new(4.0, 0.1, 1.5, 0.15);
        assert!(flat.mu_t0.abs() < 1e-16);
        assert!((flat.eval(9.0) - 0.1).abs() < 1e-15);
        let env = ReversionEnvelope::new(1.0, 3.1, 1.5, 0.15);
        assert!((env.eval(3.0) - (0.1 + 3.0 * (-3.0f64).exp())).abs() < 1e-15);
        assert!((env.eval(3.0) - 0.2494).abs() < 1e-4);
    }

    #[test]
    fn reversion_detects_excess_and_skips_short_runs() {
        let (alpha, beta) = (1.5, 0.15);
        let env = ReversionEnvelope::new(0.0, 3.1, alpha, beta);
        let mut traj = Trajectory::new(1, 1);
        for n in 0..20 {
            let t = n as f64 * 0.1;
            let kappa = if n == 10 || n == 14 { 1.0 } else { 0.0 };
            traj.samples.push(sample(t, vec![0.0], env.eval(t), kappa));
        }
        let iv = inactive_intervals(&traj, INACTIVE_KAPPA);
        assert_eq!(iv, vec![0..9, 11..13, 15..20]);
        let rep = check_reversion(&traj, alpha, beta, &iv, &ReversionTolerances::default());
        assert!(rep.passed);
        assert_eq!(rep.intervals[1].equality_ok, None);

        traj.samples[5].psi += 1e-3;
        let rep = check_reversion(&traj, alpha, beta, &iv, &ReversionTolerances::default());
        assert!(!rep.passed && !rep.intervals[0].upper_ok);
    }

    #[test]
    fn epsilon_examples() {
        let mut traj = Trajectory::new(1, 1);
        traj.samples.push(sample(0.0, vec![-2.625], 3.1, 0.0));
        let e = empirical_epsilon(&traj).unwrap();
        assert!((e.eps_hat - 2.625 / 3.1).abs() < 1e-15 && e.passed);
        assert!((e.eps_hat - 0.8468).abs() < 1e-4);
        traj.samples.push(sample(1.0, vec![1.0], 1.0, 0.0));
        assert!(!empirical_epsilon(&traj).unwrap().passed);
        assert_eq!(empirical_epsilon(&Trajectory::new(1, 1)), Err(BoundsError::Empty));
    }

    #[test]
    fn desired_funnel_examples() {
        let p = ControllerParams::new(1.5, 0.15, 3.1, vec![2.5, 2.5]);
        assert!((desired_funnel(0.0, &p) - 3.1).abs() < 1e-15);
        assert!((desired_funnel(1e3, &p) - 0.1).abs() < 1e-15);
        for t in [0.3, 1.0, 5.0] {
            assert!((desired_funnel(t, &p) - (3.0 * (-1.5 * t).exp() + 0.1)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn sigma_monotone_in_gains(
            alpha in 0.1f64..3.0,
            offsets in prop::collection::vec(0.05f64..3.0, 1..4),
            bump in 0.0f64..2.0,
            which in 0usize..4,
            ratios_seed in prop::collection::vec(0.0f64..3.0, 4),
        ) {
            let gains: Vec<f64> = offsets.iter().map(|o| alpha + o).collect();
            let ratios = &ratios_seed[..gains.len()];
            let base = lemma_constants(&gains, alpha, ratios).unwrap();
            let mut bumped_gains = gains.clone();
            let j = which % gains.len();
            bumped_gains[j] += bump;
            let bumped = lemma_constants(&bumped_gains, alpha, ratios).unwrap();
            for (a, b) in base.sigma.iter().zip(&bumped.sigma) {
                prop_assert!(b <= a);
                prop_assert!(*b >= 0.0);
            }
            prop_assert_eq!(*base.sigma.last().unwrap(), 1.0);
        }
    }
}
