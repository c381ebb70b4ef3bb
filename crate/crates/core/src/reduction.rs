//! Exact reduction of the `tanh`/`sech` ansatz to a polynomial system in `E = exp(C1 xi)`,
//! and a Gauss-Newton solver that rediscovers the closed-form coefficients from it.
//!
//! With `u = B0 + B1 (E - 1/E)/(E + 1/E) + 2 D1/(E + 1/E)`, every term of the reduced ODE is
//! a rational function over a power of `E + 1/E`, the highest being the cube. Multiplying
//! through by `(E + 1/E)^3 E^3` leaves a polynomial `sum_{k=0..6} P_k E^k`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{Coefficient, Jet, LaurentPoly, MonomialMax, RationalHyperbolic};
use crate::model::{solve_coefficients, PhysicalParameters, SignTriple, WaveCoefficients};

/// Coefficients outside `E^0..E^6` below this fraction of the largest `|P_k|` are ignored.
pub const STRAY_TOLERANCE: f64 = 1e-12;

/// The five unknowns of the algebraic system; `D1 = i * d1_imag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateVector {
    pub b0: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1_imag: f64,
    pub v: f64,
}

impl CandidateVector {
    pub fn new(b0: f64, b1: f64, c1: f64, d1_imag: f64, v: f64) -> Self {
        Self {
            b0,
            b1,
            c1,
            d1_imag,
            v,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// Drops the real part of `D1`.
    pub fn from_coefficients(c: &WaveCoefficients) -> Self {
        Self::new(c.b0, c.b1, c.c1, c.d1.im, c.v)
    }

    pub fn to_coefficients(&self) -> WaveCoefficients {
        WaveCoefficients {
            kappa: 0.5 * self.c1,
            b0: self.b0,
            b1: self.b1,
            c1: self.c1,
            d1: Complex64::new(0.0, self.d1_imag),
            v: self.v,
            x0: 0.0,
        }
    }

    pub fn d1(&self) -> Complex64 {
        Complex64::new(0.0, self.d1_imag)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.b0, self.b1, self.c1, self.d1_imag, self.v]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Representative with `C1 >= 0` under `(C1, B1, D1) -> (-C1, -B1, D1)`.
    pub fn canonical(&self) -> Self {
        if self.c1 < 0.0 {
            Self {
                b1: -self.b1,
                c1: -self.c1,
                ..*self
            }
        } else {
            *self
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the left side of the reduced ODE as a rational function over `(E + 1/E)^3`.
fn ode_in_e<C: Coefficient>(
    b0: C,
    b1: C,
    c1: C,
    d1: C,
    v: C,
    coeff: impl Fn(f64) -> C,
    params: &PhysicalParameters,
) -> RationalHyperbolic<C> {
    let s = params.s();
    let u = &(&RationalHyperbolic::constant(b0) + &RationalHyperbolic::tanh().scale(&b1))
        + &RationalHyperbolic::sech().scale(&d1);
    let du = u.derivative(&c1);
    let d2u = du.derivative(&c1);
    let u2 = &u * &u;
    let u3 = &u2 * &u;
    let r = coeff(params.mu() / s);
    let a = coeff(params.beta() / (3.0 * s));
    let b = coeff(params.alpha() / (2.0 * s));
    let c = v * coeff(-1.0 / s);
    let mut total = &d2u + &du.scale(&r);
    total = &total + &u3.scale(&a);
    total = &total + &u2.scale(&b);
    &total + &u.scale(&c)
}

fn cleared_system<C: Coefficient>(
    vars: [C; 5],
    coeff: impl Fn(f64) -> C,
    params: &PhysicalParameters,
) -> LaurentPoly<C> {
    let [b0, b1, c1, d1, v] = vars;
    let rational = ode_in_e(b0, b1, c1, d1, v, coeff, params);
    debug_assert_eq!(rational.power, 3);
    rational.cleared()
}

/// Values of `P_0 .. P_6` at a candidate, with the largest contributing monomial of each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemValues {
    #[serde(with = "crate::complex_json::array7")]
    pub p: [Complex64; 7],
    pub monomial_scale: [f64; 7],
}

impl SystemValues {
    /// `|P_k|` relative to its own largest monomial (0 when both vanish).
    pub fn relative(&self, k: usize) -> f64 {
        let m = self.p[k].norm();
        if m == 0.0 {
            0.0
        } else {
            m / self.monomial_scale[k]
        }
    }

    pub fn max_relative(&self) -> f64 {
        (0..7).map(|k| self.relative(k)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sum_k P_k E^k / ((E + 1/E)^3 E^3)` at `E = exp(c1 xi)`: the ODE residual at `xi`.
    pub fn residual_at(&self, c1: f64, xi: f64) -> Complex64 {
        let e = (c1 * xi).exp();
        let poly: f64 = (e + 1.0 / e).powi(3) * e.powi(3);
        let sum: Complex64 = self
            .p
            .iter()
            .enumerate()
            .map(|(k, pk)| pk * e.powi(k as i32))
            .sum();
        sum / poly
    }
}

fn collect_system(
    poly: &LaurentPoly<Complex64>,
    scale: &LaurentPoly<MonomialMax>,
) -> Result<SystemValues> {
    let mut p = [Complex64::new(0.0, 0.0); 7];
    let mut monomial_scale = [0.0; 7];
    for k in 0..7 {
        p[k] = poly.coefficient(k as i32);
        monomial_scale[k] = scale.coefficient(k as i32).0;
    }
    let largest = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (k, z) in poly.terms() {
        if !(0..=6).contains(&k) && z.norm() >= STRAY_TOLERANCE * largest {
            return Err(Error::NonvanishingStrayTerms {
                exponent: k,
                magnitude: z.norm(),
            });
        }
    }
    Ok(SystemValues { p, monomial_scale })
}

fn system_values_complex(
    b0: f64,
    b1: f64,
    c1: f64,
    d1: Complex64,
    v: f64,
    params: &PhysicalParameters,
) -> Result<SystemValues> {
    let re = |x: f64| Complex64::new(x, 0.0);
    let poly = cleared_system([re(b0), re(b1), re(c1), d1, re(v)], re, params);
    let m = |x: f64| MonomialMax(x.abs());
    let scale = cleared_system(
        [m(b0), m(b1), m(c1), MonomialMax(d1.norm()), m(v)],
        MonomialMax::from_f64,
        params,
    );
    collect_system(&poly, &scale)
}

/// Coefficients `P_0 .. P_6` of the cleared ansatz residual at `candidate`.
pub fn extract_system(
    candidate: &CandidateVector,
    params: &PhysicalParameters,
) -> Result<SystemValues> {
    if candidate.c1 == 0.0 {
        return Err(Error::DegenerateWidth { c1: 0.0 });
    }
    system_values_complex(
        candidate.b0,
        candidate.b1,
        candidate.c1,
        candidate.d1(),
        candidate.v,
        params,
    )
}

/// Transcribed printed system, evaluated with complex `D1`.
///
/// Rows `k = 1..6` of that transcription equal `3 s` times the machine rows; row 0 does
/// not match the machine row under any scaling.
pub fn printed_system(candidate: &CandidateVector, params: &PhysicalParameters) -> [Complex64; 7] {
    let (al, be, mu, s) = (params.alpha(), params.beta(), params.mu(), params.s());
    let b0 = Complex64::new(candidate.b0, 0.0);
    let b1 = Complex64::new(candidate.b1, 0.0);
    let c1 = Complex64::new(candidate.c1, 0.0);
    let d1 = candidate.d1();
    let v = Complex64::new(candidate.v, 0.0);

    let p0 = -24.0 * v * b0 + 12.0 * al * b0 * b0 - 8.0 * be * b0 * b0 * b0 + 24.0 * mu * b1 * c1
        - 24.0 * v * d1
        + 24.0 * al * b0 * d1
        + 24.0 * be * b0 * b0 * d1
        - 24.0 * s * c1 * c1 * d1
        + 12.0 * al * d1 * d1
        + 24.0 * be * b0 * d1 * d1
        + 8.0 * be * d1 * d1 * d1;
    let p1 = -6.0 * v * d1 + 6.0 * al * b0 * d1 + 6.0 * be * b0 * b0 * d1
        - 6.0 * al * b1 * d1
        - 12.0 * be * b0 * b1 * d1
        + 6.0 * be * b1 * b1 * d1
        + 6.0 * mu * c1 * d1
        + 6.0 * s * c1 * c1 * d1;
    let p2 = -9.0 * v * b0 + 4.5 * al * b0 * b0 + 3.0 * be * b0 * b0 * b0 + 3.0 * v * b1
        - 3.0 * al * b0 * b1
        - 3.0 * be * b0 * b0 * b1
        - 1.5 * al * b1 * b1
        - 3.0 * be * b0 * b1 * b1
        + 3.0 * be * b1 * b1 * b1
        + 12.0 * mu * b1 * c1
        + 24.0 * s * b1 * c1 * c1
        + 6.0 * al * d1 * d1
        + 12.0 * be * b0 * d1 * d1
        - 12.0 * be * b1 * d1 * d1;
    let p3 = -12.0 * v * d1 + 12.0 * al * b0 * d1 + 12.0 * be * b0 * b0 * d1
        - 12.0 * be * b1 * b1 * d1
        - 36.0 * s * c1 * c1 * d1
        + 8.0 * be * d1 * d1 * d1;
    let p4 = -9.0 * v * b0 + 4.5 * al * b0 * b0 + 3.0 * be * b0 * b0 * b0 - 3.0 * v * b1
        + 3.0 * al * b0 * b1
        + 3.0 * be * b0 * b0 * b1
        - 1.5 * al * b1 * b1
        - 3.0 * be * b0 * b1 * b1
        - 3.0 * be * b1 * b1 * b1
        + 12.0 * mu * b1 * c1
        - 24.0 * s * b1 * c1 * c1
        + 6.0 * al * d1 * d1
        + 12.0 * be * b0 * d1 * d1
        + 12.0 * be * b1 * d1 * d1;
    let p5 = -6.0 * v * d1
        + 6.0 * al * b0 * d1
        + 6.0 * be * b0 * b0 * d1
        + 6.0 * al * b1 * d1
        + 12.0 * be * b0 * b1 * d1
        + 6.0 * be * b1 * b1 * d1
        - 6.0 * mu * c1 * d1
        + 6.0 * s * c1 * c1 * d1;
    let p6 = -3.0 * v * b0 + 1.5 * al * b0 * b0 + be * b0 * b0 * b0 - 3.0 * v * b1
        + 3.0 * al * b0 * b1
        + 3.0 * be * b0 * b0 * b1
        + 1.5 * al * b1 * b1
        + 3.0 * be * b0 * b1 * b1
        + be * b1 * b1 * b1;
    [p0, p1, p2, p3, p4, p5, p6]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub k: usize,
    #[serde(with = "crate::complex_json")]
    pub machine: Complex64,
    #[serde(with = "crate::complex_json")]
    pub printed: Complex64,
    /// `|printed - scale_factor * machine|`
    pub discrepancy: f64,
    /// `discrepancy` over `scale_factor` times the row's largest machine monomial.
    pub relative_discrepancy: f64,
}

/// Side-by-side machine and printed rows. Reports only; the ODE residual is the authority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedComparison {
    pub scale_factor: f64,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare_with_printed_system(
    candidate: &CandidateVector,
    params: &PhysicalParameters,
) -> Result<PrintedComparison> {
    let machine = extract_system(candidate, params)?;
    let printed = printed_system(candidate, params);
    let scale_factor = 3.0 * params.s();
    let rows = (0..7)
        .map(|k| {
            let discrepancy = (printed[k] - scale_factor * machine.p[k]).norm();
            let denom = scale_factor * machine.monomial_scale[k];
            ComparisonRow {
                k,
                machine: machine.p[k],
                printed: printed[k],
                discrepancy,
                relative_discrepancy: if discrepancy == 0.0 {
                    0.0
                } else {
                    discrepancy / denom
                },
            }
        })
        .collect();
    Ok(PrintedComparison { scale_factor, rows })
}

/// How `D1` is parameterized during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    /// `D1 = i * d1_imag`, five real unknowns.
    PureImaginary,
    /// `D1` fully complex, six real unknowns.
    FullComplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub mode: SearchMode,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
            mode: SearchMode::PureImaginary,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub candidate: CandidateVector,
    /// Real part of `D1`; identically zero in [`SearchMode::PureImaginary`].
    pub d1_real: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

// unknowns: b0, b1, c1, d1_imag, v, d1_real
type Unknowns = [f64; 6];

fn residual_and_jacobian(
    x: &Unknowns,
    params: &PhysicalParameters,
) -> (DVector<f64>, DMatrix<f64>) {
    let one = Complex64::new(1.0, 0.0);
    let var = |i: usize| Jet::<6>::variable(Complex64::new(x[i], 0.0), i, one);
    let d1 = Jet::<6> {
        value: Complex64::new(x[5], x[3]),
        grad: {
            let mut g = [Complex64::new(0.0, 0.0); 6];
            g[3] = Complex64::new(0.0, 1.0);
            g[5] = one;
            g
        },
    };
    let poly = cleared_system(
        [var(0), var(1), var(2), d1, var(4)],
        Jet::<6>::from_f64,
        params,
    );
    let mut r = DVector::zeros(14);
    let mut j = DMatrix::zeros(14, 6);
    for k in 0..7 {
        let pk = poly.coefficient(k);
        let k = k as usize;
        r[k] = pk.value.re;
        r[7 + k] = pk.value.im;
        for col in 0..6 {
            j[(k, col)] = pk.grad[col].re;
            j[(7 + k, col)] = pk.grad[col].im;
        }
    }
    (r, j)
}

fn residual_norm(x: &Unknowns, params: &PhysicalParameters) -> f64 {
    let re = |v: f64| Complex64::new(v, 0.0);
    let poly = cleared_system(
        [
            re(x[0]),
            re(x[1]),
            re(x[2]),
            Complex64::new(x[5], x[3]),
            re(x[4]),
        ],
        re,
        params,
    );
    (0..7)
        .map(|k| poly.coefficient(k).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Product of the width and amplitude scales of the problem, both taken as the sum of
/// the magnitudes of their closed-form parts.
fn natural_slope(params: &PhysicalParameters) -> f64 {
    let s = params.s();
    let width = params.kink_scale() + params.mu() / (6.0 * s);
    let amplitude = params.alpha() / (2.0 * params.abs_beta())
        + (6.0 * s / params.abs_beta()).sqrt() * params.mu() / (6.0 * s);
    width * amplitude
}

/// Damped Gauss-Newton on the 14 real equations `Re P_k = Im P_k = 0`.
///
/// Each step solves the linearized least-squares problem by SVD and is halved until the
/// residual norm decreases. Constant profiles form a singular solution set, which the
/// iteration only approaches linearly: the absolute test can fire with `|C1|`, `|B1|`
/// and `|D1|` still of order `tol^(1/3)`. A converged point whose slope
/// `|C1| (|B1| + |D1|)` is below `tol^(1/3)` times the natural slope of the problem is
/// therefore reported as [`Error::ConvergedToDegenerate`].
pub fn newton_solve_with(
    params: &PhysicalParameters,
    initial: &CandidateVector,
    initial_d1_real: f64,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameters(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    let cols = match opts.mode {
        SearchMode::PureImaginary => 5,
        SearchMode::FullComplex => 6,
    };
    let d1_real = match opts.mode {
        SearchMode::PureImaginary => 0.0,
        SearchMode::FullComplex => initial_d1_real,
    };
    let a = initial.as_array();
    let mut x: Unknowns = [a[0], a[1], a[2], a[3], a[4], d1_real];
    let mut norm = residual_norm(&x, params);
    let mut iterations = 0;

    while norm >= opts.tol {
        if iterations == opts.max_iter || !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let (r, jac) = residual_and_jacobian(&x, params);
        let jac = jac.columns(0, cols).into_owned();
        let step = jac
            .svd(true, true)
            .solve(&(-r), 1e-14)
            .map_err(|_| Error::NoConvergence {
                iterations,
                residual: norm,
            })?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = x;
            for (i, d) in step.iter().enumerate() {
                trial[i] += lambda * d;
            }
            let trial_norm = residual_norm(&trial, params);
            if trial_norm < norm {
                accepted = Some((trial, trial_norm));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, trial_norm)) => {
                x = trial;
                norm = trial_norm;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: norm,
                })
            }
        }
    }

    let candidate = CandidateVector::new(x[0], x[1], x[2], x[3], x[4]);
    let slope = x[2].abs() * (x[1].abs() + Complex64::new(x[5], x[3]).norm());
    if slope < opts.tol.cbrt() * natural_slope(params) {
        return Err(Error::ConvergedToDegenerate { slope });
    }
    Ok(NewtonOutcome {
        candidate,
        d1_real: x[5],
        residual_norm: norm,
        iterations,
    })
}

/// Pure-imaginary Gauss-Newton search from `initial`.
pub fn newton_solve(
    params: &PhysicalParameters,
    initial: &CandidateVector,
    max_iter: usize,
    tol: f64,
) -> Result<CandidateVector> {
    let opts = NewtonOptions {
        max_iter,
        tol,
        ..NewtonOptions::default()
    };
    newton_solve_with(params, initial, 0.0, &opts).map(|o| o.candidate)
}

/// Sign branches whose closed form coincides with `candidate` after canonicalization.
pub fn matching_branches(
    params: &PhysicalParameters,
    candidate: &CandidateVector,
    tol: f64,
) -> Vec<SignTriple> {
    let target = candidate.canonical();
    SignTriple::valid()
        .filter(|signs| {
            solve_coefficients(params, signs)
                .map(|c| {
                    CandidateVector::from_coefficients(&c)
                        .canonical()
                        .max_abs_diff(&target)
                        < tol
                })
                .unwrap_or(false)
        })
        .collect()
}

/// Real kink `B0 + B1 tanh(kappa xi)` sharing `B0`, `B1` and `v` with a closed-form wave.
///
/// Since `tanh(z + i pi/4) = tanh(2z) + i sech(2z)`, the complex wave is this kink shifted
/// by an imaginary phase, and the ODE is autonomous, so the kink solves it too. It is a
/// root of the same algebraic system with `D1 = 0` and `C1 = kappa`.
pub fn real_kink_companion(coeffs: &WaveCoefficients) -> CandidateVector {
    CandidateVector::new(coeffs.b0, coeffs.b1, 0.5 * coeffs.c1, 0.0, coeffs.v)
}

/// Sign branches whose real-kink companion coincides with `candidate`.
pub fn matching_companions(
    params: &PhysicalParameters,
    candidate: &CandidateVector,
    tol: f64,
) -> Vec<SignTriple> {
    let target = candidate.canonical();
    SignTriple::valid()
        .filter(|signs| {
            solve_coefficients(params, signs)
                .map(|c| real_kink_companion(&c).canonical().max_abs_diff(&target) < tol)
                .unwrap_or(false)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartOutcome {
    /// Converged onto the closed form of these branches.
    Branch {
        start: CandidateVector,
        found: CandidateVector,
        signs: Vec<SignTriple>,
    },
    Degenerate {
        start: CandidateVector,
    },
    /// Converged onto the real-kink companion of these branches.
    RealKink {
        start: CandidateVector,
        found: CandidateVector,
        signs: Vec<SignTriple>,
    },
    /// Converged to a non-constant root that is not a closed-form branch.
    Unmatched {
        start: CandidateVector,
        found: CandidateVector,
    },
    Failed {
        start: CandidateVector,
        error: Error,
    },
}

/// Runs `starts` independent searches from points drawn uniformly in
/// `center +- half_width` (per component). Deterministic for a given `seed`.
pub fn multi_start(
    params: &PhysicalParameters,
    center: &CandidateVector,
    half_width: f64,
    starts: usize,
    seed: u64,
    opts: &NewtonOptions,
    match_tol: f64,
) -> Vec<StartOutcome> {
    (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let c = center.as_array();
            let mut a = [0.0; 5];
            for (out, mid) in a.iter_mut().zip(c) {
                *out = mid + rng.gen_range(-half_width..=half_width);
            }
            let start = CandidateVector::from_array(a);
            match newton_solve_with(params, &start, 0.0, opts) {
                Ok(outcome) => {
                    let found = outcome.candidate;
                    let signs = matching_branches(params, &found, match_tol);
                    if !signs.is_empty() {
                        return StartOutcome::Branch {
                            start,
                            found,
                            signs,
                        };
                    }
                    let signs = matching_companions(params, &found, match_tol);
                    if !signs.is_empty() {
                        return StartOutcome::RealKink {
                            start,
                            found,
                            signs,
                        };
                    }
                    StartOutcome::Unmatched { start, found }
                }
                Err(Error::ConvergedToDegenerate { .. }) => StartOutcome::Degenerate { start },
                Err(error) => StartOutcome::Failed { start, error },
            }
        })
        .collect()
}
