//! PDE propagation checks against the analytic travelling wave.
//!
//! With `mu > 0` the `mu u_xx` term has the backward-heat sign, so forward integration
//! amplifies grid-scale noise and blows up. Backward integration is well posed; the
//! convergence checks below run toward negative `t_end`.

use cbkdv::dynamics::{simulate, simulate_from, FieldState, GridSpec, TimeSpec};
use cbkdv::{Complex64, Error, PhysicalParameters, SignTriple, TravelingWaveSolution};

fn demo() -> TravelingWaveSolution {
    let params = PhysicalParameters::new(0.05, -0.15, 0.5, 1.0).unwrap();
    let signs = SignTriple::from_ints(1, -1, -1, 1).unwrap();
    TravelingWaveSolution::new(params, signs).unwrap()
}

fn final_linf(sol: &TravelingWaveSolution, dx: f64, t_end: f64, dt: Option<f64>) -> f64 {
    let grid = GridSpec::with_spacing(-60.0, 60.0, dx).unwrap();
    let time = match dt {
        Some(dt) => TimeSpec::new(t_end, dt, 0.9).unwrap(),
        None => TimeSpec::guarded(sol, &grid, t_end, 0.9).unwrap(),
    };
    simulate(sol, &grid, &time, usize::MAX)
        .unwrap()
        .final_metrics()
        .l_inf
}

#[test]
fn backward_run_tracks_the_wave() {
    let sol = demo();
    let e = final_linf(&sol, 0.1, -1.0, None);
    assert!(e < 5e-3, "L_inf = {e}");
    assert!(e > 0.0);
}

#[test]
fn backward_order_of_accuracy() {
    // dt = 0.2 dx^3 sits under the guard on all three grids
    let sol = demo();
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dx| final_linf(&sol, dx, -0.25, Some(0.2 * dx * dx * dx)))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "errors {errs:?}, order {order}");
        assert!((3.0..=5.0).contains(&(w[0] / w[1])), "errors {errs:?}");
    }
}

#[test]
fn forward_run_blows_up() {
    let sol = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.1).unwrap();
    let time = TimeSpec::guarded(&sol, &grid, 1.0, 0.9).unwrap();
    match simulate(&sol, &grid, &time, 100) {
        Err(Error::BlowUp { t }) => assert!(t > 0.0 && t < 1.0),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn error_metrics_are_translation_invariant() {
    let base = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.1).unwrap();
    let time = TimeSpec::guarded(&base, &grid, -0.5, 0.9).unwrap();
    let reference = simulate(&base, &grid, &time, usize::MAX)
        .unwrap()
        .final_metrics();
    for shift in [-12.3, -2.5, 0.05, 7.0, 20.0] {
        let sol = base.with_x0(shift);
        let m = simulate(&sol, &grid, &time, usize::MAX)
            .unwrap()
            .final_metrics();
        assert!(
            (m.l_inf - reference.l_inf).abs() <= 0.1 * reference.l_inf,
            "shift {shift}: {m:?} vs {reference:?}"
        );
        assert!(
            (m.l2 - reference.l2).abs() <= 0.1 * reference.l2,
            "shift {shift}: {m:?} vs {reference:?}"
        );
    }
}

#[test]
fn shifted_kink_leaving_the_domain_is_rejected() {
    let sol = demo().with_x0(50.0);
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.1).unwrap();
    let time = TimeSpec::new(-0.01, 1e-4, 0.9).unwrap();
    assert!(matches!(
        simulate(&sol, &grid, &time, 1),
        Err(Error::DomainTooNarrow(_))
    ));
}

fn bumped(sol: &TravelingWaveSolution, grid: &GridSpec, amplitude: f64) -> FieldState {
    let mut state = FieldState::sample(sol, grid, 0.0);
    for (z, x) in state.values.iter_mut().zip(grid.coordinates()) {
        let q = x / 5.0;
        if q.abs() < 1.0 {
            *z += Complex64::new(amplitude * (1.0 - q * q).powi(3), 0.0);
        }
    }
    state
}

#[test]
fn backward_run_damps_a_bump() {
    let sol = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.1).unwrap();
    let time = TimeSpec::guarded(&sol, &grid, -1.0, 0.9).unwrap();
    let run = simulate_from(&sol, &grid, &time, bumped(&sol, &grid, 1e-3), 500).unwrap();
    let first = run.records[0].metrics.l_inf;
    let last = run.final_metrics().l_inf;
    assert!((first - 1e-3).abs() < 1e-12);
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn forward_run_from_a_bump_blows_up() {
    let sol = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.1).unwrap();
    let time = TimeSpec::guarded(&sol, &grid, 1.0, 0.9).unwrap();
    let out = simulate_from(&sol, &grid, &time, bumped(&sol, &grid, 1e-3), 100);
    assert!(matches!(out, Err(Error::BlowUp { .. })), "{out:?}");
}

#[test]
fn simulate_from_analytic_matches_simulate() {
    let sol = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.2).unwrap();
    let time = TimeSpec::guarded(&sol, &grid, -0.05, 0.9).unwrap();
    let a = simulate(&sol, &grid, &time, 7).unwrap();
    let b = simulate_from(&sol, &grid, &time, FieldState::sample(&sol, &grid, 0.0), 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulate_from_rejects_wrong_length() {
    let sol = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.2).unwrap();
    let time = TimeSpec::guarded(&sol, &grid, -0.05, 0.9).unwrap();
    let short = FieldState {
        t: 0.0,
        values: vec![Complex64::new(0.0, 0.0); 10],
    };
    assert!(matches!(
        simulate_from(&sol, &grid, &time, short, 1),
        Err(Error::InvalidParameters(_))
    ));
}

#[test]
fn records_are_taken_on_schedule() {
    let sol = demo();
    let grid = GridSpec::with_spacing(-60.0, 60.0, 0.2).unwrap();
    let time = TimeSpec::new(-0.01, 1e-3, 0.9).unwrap();
    let run = simulate(&sol, &grid, &time, 3).unwrap();
    let ts: Vec<f64> = run.records.iter().map(|r| r.state.t).collect();
    assert_eq!(run.steps, 10);
    assert_eq!(ts.len(), 5);
    assert_eq!(ts[0], 0.0);
    assert_eq!(*ts.last().unwrap(), -0.01);
    assert!(ts.windows(2).all(|w| w[1] < w[0]));
}
