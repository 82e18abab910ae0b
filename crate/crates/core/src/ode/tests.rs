use super::*;

fn decay() -> FnSystem<impl FnMut(f64, &[f64], &mut [f64])> {
    FnSystem::new(1, |_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0])
}

fn oscillator() -> FnSystem<impl FnMut(f64, &[f64], &mut [f64])> {
    FnSystem::new(2, |_, x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0];
    })
}

#[test]
fn exponential_decay() {
    let sol = integrate(&mut decay(), &[1.0], (0.0, 1.0), &IntegratorConfig::default()).unwrap();
    let x = sol.dense.last_state().unwrap()[0];
    assert!((x - (-1.0f64).exp()).abs() < 1e-8);
    assert_eq!(sol.dense.end(), 1.0);
}

#[test]
fn constant_field_is_exact() {
    let mut sys = FnSystem::new(3, |_, _: &[f64], dx: &mut [f64]| dx.fill(0.0));
    let mut stepper = Stepper::new(3);
    let x = [1.0, -2.0, 3.5];
    let out = stepper.step(&mut sys, 0.0, &x, &[0.0; 3], 0.7, &IntegratorConfig::default(), &DenseTrajectory::new(3));
    assert!(matches!(out, StepOutcome::Accepted { error, .. } if error == 0.0));
    assert_eq!(stepper.new_state(), &x);
    let sol = integrate(&mut sys, &x, (0.0, 5.0), &IntegratorConfig::default()).unwrap();
    assert_eq!(sol.dense.last_state().unwrap(), &x);
}

#[test]
fn oscillator_is_periodic() {
    let tau = 2.0 * std::f64::consts::PI;
    let sol = integrate(&mut oscillator(), &[1.0, 0.0], (0.0, tau), &IntegratorConfig::default()).unwrap();
    let x = sol.dense.last_state().unwrap();
    assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6, "{x:?}");
}

fn order_errors() -> Vec<(f64, f64)> {
    [0.1, 0.05, 0.025]
        .into_iter()
        .map(|h| {
            let mut sys = FnSystem::new(1, |t, _: &[f64], dx: &mut [f64]| dx[0] = t.cos());
            let steps = (10.0f64 / h).round() as usize;
            let x = integrate_fixed(&mut sys, &[0.0], (0.0, 10.0), steps).unwrap();
            (h, (x[0] - 10.0f64.sin()).abs())
        })
        .collect()
}

/// Least-squares slope of log(err) against log(h).
pub(crate) fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(h, e)| (h.ln(), e.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn fixed_step_order_is_five() {
    let slope = loglog_slope(&order_errors());
    assert!(slope >= 4.8, "slope {slope}");
}

#[test]
fn dense_output_tracks_solution_between_nodes() {
    let cfg = IntegratorConfig::with_tolerances(1e-8, 1e-10);
    let sol = integrate(&mut oscillator(), &[1.0, 0.0], (0.0, 10.0), &cfg).unwrap();
    assert!(sol.dense.len() > 5);
    let mut worst: f64 = 0.0;
    for k in 0..sol.dense.len() - 1 {
        let (a, b) = (sol.dense.times()[k], sol.dense.times()[k + 1]);
        for frac in [0.13, 0.5, 0.91] {
            let t = a + frac * (b - a);
            let x = sol.dense.eval_vec(t).unwrap();
            worst = worst.max((x[0] - t.cos()).abs()).max((x[1] + t.sin()).abs());
        }
    }
    // global error of the nodes plus interpolation error, both governed by the tolerance
    assert!(worst < 10.0 * 1e-8 * 10.0, "worst {worst}");
    // nodes are reproduced exactly
    for k in 0..sol.dense.len() {
        let t = sol.dense.times()[k];
        assert_eq!(sol.dense.eval_vec(t).unwrap(), sol.dense.state(k));
    }
    assert!(sol.dense.eval_vec(10.5).is_err());
}

#[test]
fn tighter_tolerance_never_worse() {
    let mut last = f64::INFINITY;
    for tol in [1e-4, 5e-5, 2.5e-5, 1.25e-5, 1e-6, 5e-7, 1e-8] {
        let cfg = IntegratorConfig::with_tolerances(tol, tol);
        let sol = integrate(&mut oscillator(), &[1.0, 0.0], (0.0, 20.0), &cfg).unwrap();
        let x = sol.dense.last_state().unwrap();
        let err = ((x[0] - 20f64.cos()).powi(2) + (x[1] + 20f64.sin()).powi(2)).sqrt();
        assert!(err <= last * 1.5, "tol {tol}: {err} vs {last}");
        last = err;
    }
}

#[test]
fn deterministic() {
    let cfg = IntegratorConfig::default();
    let a = integrate(&mut oscillator(), &[1.0, 0.5], (0.0, 7.0), &cfg).unwrap();
    let b = integrate(&mut oscillator(), &[1.0, 0.5], (0.0, 7.0), &cfg).unwrap();
    assert_eq!(a.dense, b.dense);
}

#[test]
fn funnel_ode_matches_closed_form() {
    let (alpha, beta, psi0) = (1.5, 0.15, 3.1);
    let mut sys = FnSystem::new(1, move |_, x: &[f64], dx: &mut [f64]| dx[0] = -alpha * x[0] + beta);
    let sol = integrate(&mut sys, &[psi0], (0.0, 20.0), &IntegratorConfig::default()).unwrap();
    for i in 0..=200 {
        let t = i as f64 * 0.1;
        let exact = (psi0 - beta / alpha) * (-alpha * t).exp() + beta / alpha;
        let err = (sol.dense.eval_vec(t).unwrap()[0] - exact).abs();
        assert!(err < 1e-8, "t = {t}: {err:e}");
    }
}

/// `ẋ = 1`, refusing any stage with `x` beyond a wall.
struct Walled {
    wall: f64,
}

impl OdeSystem for Walled {
    type Error = f64;
    fn dim(&self) -> usize {
        1
    }
    fn eval(&mut self, _: f64, x: &[f64], _: &DenseTrajectory, dx: &mut [f64]) -> Result<(), Rejection<f64>> {
        if x[0] >= self.wall {
            return Err(Rejection::Retry(x[0]));
        }
        dx[0] = 1.0;
        Ok(())
    }
}

#[test]
fn retries_shrink_the_step_and_eventually_underflow() {
    let cfg = IntegratorConfig::default();
    let failure = integrate(&mut Walled { wall: 1.0 }, &[0.0], (0.0, 2.0), &cfg).unwrap_err();
    match &failure.error {
        IntegrateError::StepUnderflow { t, state, last_rejection, .. } => {
            assert!(*t < 1.0 && *t > 1.0 - 1e-6, "t = {t}");
            assert_eq!(state.len(), 1);
            assert!(last_rejection.unwrap() >= 1.0);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(failure.stats.retried > 0);
    assert!(failure.partial.end() < 1.0);
}

#[test]
fn retry_limit_is_enforced() {
    let cfg = IntegratorConfig {
        max_retries: 3,
        ..IntegratorConfig::default()
    };
    let failure = integrate(&mut Walled { wall: 1.0 }, &[0.0], (0.0, 2.0), &cfg).unwrap_err();
    assert!(matches!(failure.error, IntegrateError::StepUnderflow { .. }));
}

#[test]
fn initial_point_must_be_admissible() {
    let failure = integrate(&mut Walled { wall: 1.0 }, &[1.5], (0.0, 2.0), &IntegratorConfig::default()).unwrap_err();
    assert_eq!(failure.error, IntegrateError::InitialPoint(1.5));
}

#[test]
fn config_validation() {
    let bad = IntegratorConfig {
        h_min: 1.0,
        h_init: 0.1,
        ..IntegratorConfig::default()
    };
    assert!(bad.validate().is_err());
    assert!(IntegratorConfig::with_tolerances(0.0, 1e-8).validate().is_err());
    let failure = integrate(&mut decay(), &[1.0], (0.0, 1.0), &bad).unwrap_err();
    assert!(matches!(failure.error, IntegrateError::InvalidConfig(_)));
}

#[test]
fn observer_sees_every_accepted_node() {
    let mut seen = Vec::new();
    let sol = integrate_observed(&mut decay(), &[1.0], (0.0, 3.0), &IntegratorConfig::default(), |t, _| {
        seen.push(t)
    })
    .unwrap();
    assert_eq!(seen, sol.dense.times());
}
