use cbkdv::reduction::{
    extract_system, multi_start, newton_solve_with, real_kink_companion, CandidateVector,
    NewtonOptions, SearchMode, StartOutcome,
};
use cbkdv::{solve_coefficients, PhysicalParameters, SignTriple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn demo() -> PhysicalParameters {
    PhysicalParameters::new(0.05, -0.15, 0.5, 1.0).unwrap()
}

fn closed_form(params: &PhysicalParameters, signs: (i8, i8, i8, i8)) -> CandidateVector {
    let signs = SignTriple::from_ints(signs.0, signs.1, signs.2, signs.3).unwrap();
    CandidateVector::from_coefficients(&solve_coefficients(params, &signs).unwrap())
}

fn tally(outcomes: &[StartOutcome]) -> [usize; 5] {
    let mut t = [0; 5];
    for o in outcomes {
        let k = match o {
            StartOutcome::Branch { .. } => 0,
            StartOutcome::Degenerate { .. } => 1,
            StartOutcome::RealKink { .. } => 2,
            StartOutcome::Unmatched { .. } => 3,
            StartOutcome::Failed { .. } => 4,
        };
        t[k] += 1;
    }
    t
}

#[test]
fn demo_search_recovers_only_closed_form_branches() {
    let params = demo();
    let center = closed_form(&params, (1, -1, -1, 1));
    let outcomes = multi_start(
        &params,
        &center,
        0.05,
        200,
        42,
        &NewtonOptions::default(),
        1e-8,
    );
    assert_eq!(outcomes.len(), 200);
    let [branch, degenerate, ..] = tally(&outcomes);
    assert_eq!(branch + degenerate, 200, "{:?}", tally(&outcomes));
    assert!(branch > 0);
    for o in &outcomes {
        if let StartOutcome::Branch { found, signs, .. } = o {
            let expected = CandidateVector::from_coefficients(
                &solve_coefficients(&params, &signs[0]).unwrap(),
            );
            assert!(found.canonical().max_abs_diff(&expected.canonical()) < 1e-8);
        }
    }
}

#[test]
fn search_is_reproducible_and_seed_dependent() {
    let params = demo();
    let center = closed_form(&params, (1, -1, -1, 1));
    let opts = NewtonOptions::default();
    let a = multi_start(&params, &center, 0.05, 24, 42, &opts, 1e-8);
    let b = multi_start(&params, &center, 0.05, 24, 42, &opts, 1e-8);
    let c = multi_start(&params, &center, 0.05, 24, 43, &opts, 1e-8);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn small_box_search_on_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..6 {
        let params = PhysicalParameters::new(
            rng.gen_range(0.02..1.0),
            -rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.5..2.0),
        )
        .unwrap();
        let center = closed_form(&params, (1, 1, 1, 1));
        let outcomes = multi_start(
            &params,
            &center,
            0.05,
            40,
            42,
            &NewtonOptions::default(),
            1e-8,
        );
        let [branch, degenerate, real_kink, unmatched, _] = tally(&outcomes);
        assert_eq!(unmatched, 0, "{params:?}");
        assert_eq!(real_kink, 0, "{params:?}");
        assert!(branch + degenerate > 0, "{params:?}");
    }
}

#[test]
fn wide_box_roots_are_branches_or_real_kinks() {
    let params = demo();
    let center = closed_form(&params, (1, -1, -1, 1));
    let outcomes = multi_start(
        &params,
        &center,
        0.5,
        200,
        42,
        &NewtonOptions::default(),
        1e-8,
    );
    let counts = tally(&outcomes);
    assert_eq!(counts[3], 0, "{counts:?}");
    for o in &outcomes {
        if let StartOutcome::RealKink { found, .. } = o {
            assert!(found.d1_imag.abs() < 1e-8);
            // rows built only from D1 monomials have a vanishing scale here, so normalize
            // by the largest monomial of the whole system
            let sys = extract_system(found, &params).unwrap();
            let scale = sys.monomial_scale.iter().copied().fold(0.0, f64::max);
            assert!(sys.max_abs() < 1e-10 * scale, "{sys:?}");
        }
    }
}

#[test]
fn real_kink_companions_solve_the_system_on_every_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let params = PhysicalParameters::new(
            rng.gen_range(0.01..2.0),
            -rng.gen_range(0.01..2.0),
            rng.gen_range(0.01..2.0),
            rng.gen_range(0.1..3.0),
        )
        .unwrap();
        for signs in SignTriple::valid() {
            let coeffs = solve_coefficients(&params, &signs).unwrap();
            if coeffs.c1 == 0.0 {
                continue;
            }
            let kink = real_kink_companion(&coeffs);
            let sys = extract_system(&kink, &params).unwrap();
            assert!(sys.max_relative() < 1e-10, "{params:?} {signs:?}: {sys:?}");
        }
    }
}

#[test]
fn full_complex_search_keeps_d1_imaginary() {
    let params = demo();
    let center = closed_form(&params, (1, -1, -1, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let opts = NewtonOptions {
        mode: SearchMode::FullComplex,
        ..NewtonOptions::default()
    };
    let mut hits = 0;
    for _ in 0..20 {
        let mut a = center.as_array();
        for x in a.iter_mut() {
            *x += rng.gen_range(-0.03..0.03);
        }
        let d1_real = rng.gen_range(-0.03..0.03);
        if let Ok(out) = newton_solve_with(&params, &CandidateVector::from_array(a), d1_real, &opts)
        {
            if out.candidate.canonical().max_abs_diff(&center) < 1e-8 {
                hits += 1;
                assert!(out.d1_real.abs() < 1e-10, "{out:?}");
            }
        }
    }
    assert!(hits > 0);
}
