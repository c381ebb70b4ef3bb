//! Physical parameters, sign branches and the closed-form solitary-wave family.
//!
//! The traveling coordinate is `xi = x - v t + x0`. Substituting `u(xi)` into
//!
//! ```text
//! u_t + alpha u u_x + beta u^2 u_x + mu u_xx + s u_xxx = 0
//! ```
//!
//! and integrating once (integration constant zero) gives the reduced ODE
//!
//! ```text
//! u'' + r u' + a u^3 + b u^2 + c u = 0,   r = mu/s, a = beta/(3s), b = alpha/(2s), c = -v/s.
//! ```
//!
//! Its nontrivial solutions of the form `B0 + B1 tanh(C1 xi) + D1 sech(C1 xi)` are
//! produced by [`solve_coefficients`].

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the compound Burgers-KdV equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters")]
pub struct PhysicalParameters {
    alpha: f64,
    beta: f64,
    mu: f64,
    s: f64,
}

#[derive(Deserialize)]
struct RawParameters {
    alpha: f64,
    beta: f64,
    mu: f64,
    s: f64,
}

impl TryFrom<RawParameters> for PhysicalParameters {
    type Error = Error;
    fn try_from(r: RawParameters) -> Result<Self> {
        PhysicalParameters::new(r.alpha, r.beta, r.mu, r.s)
    }
}

impl PhysicalParameters {
    /// Requires `alpha > 0`, `beta < 0`, `mu >= 0`, `s > 0`, all finite.
    pub fn new(alpha: f64, beta: f64, mu: f64, s: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        if !(alpha.is_finite() && beta.is_finite() && mu.is_finite() && s.is_finite()) {
            return bad(format!(
                "parameters must be finite (alpha={alpha}, beta={beta}, mu={mu}, s={s})"
            ));
        }
        if alpha <= 0.0 {
            return bad(format!(
                "alpha must be positive (alpha>0 required), got {alpha}"
            ));
        }
        if beta >= 0.0 {
            return bad(format!(
                "beta must be negative (beta<0 required), got {beta}"
            ));
        }
        if mu < 0.0 {
            return bad(format!(
                "mu must be non-negative (mu>=0 required), got {mu}"
            ));
        }
        if s <= 0.0 {
            return bad(format!("s must be positive (s>0 required), got {s}"));
        }
        Ok(Self { alpha, beta, mu, s })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn abs_beta(&self) -> f64 {
        self.beta.abs()
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.beta, self.mu, self.s)
    }
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.alpha, beta, self.mu, self.s)
    }
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, mu, self.s)
    }
    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, self.mu, s)
    }

    /// `alpha/(2|beta|) * sqrt(|beta|/(6s))`, the kink part of kappa.
    pub fn kink_scale(&self) -> f64 {
        let ab = self.abs_beta();
        self.alpha / (2.0 * ab) * (ab / (6.0 * self.s)).sqrt()
    }

    /// `sqrt(6s/|beta|)`
    fn amplitude_factor(&self) -> f64 {
        (6.0 * self.s / self.abs_beta()).sqrt()
    }
}

/// One of `+1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidParameters(format!(
                "sign must be 1 or -1, got {other}"
            ))),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.as_i8()
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

/// Discrete branch selector `(eps1, eps2, eps3, eps)`.
///
/// A nontrivial branch needs `eps1 * eps2 * eps3 = 1`; `eps` only flips the sign of `D1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignTriple {
    pub eps1: Sign,
    pub eps2: Sign,
    pub eps3: Sign,
    pub eps: Sign,
}

impl SignTriple {
    pub fn new(eps1: Sign, eps2: Sign, eps3: Sign, eps: Sign) -> Self {
        Self {
            eps1,
            eps2,
            eps3,
            eps,
        }
    }

    pub fn from_ints(eps1: i8, eps2: i8, eps3: i8, eps: i8) -> Result<Self> {
        Ok(Self::new(
            eps1.try_into()?,
            eps2.try_into()?,
            eps3.try_into()?,
            eps.try_into()?,
        ))
    }

    pub fn product(&self) -> Sign {
        self.eps1 * self.eps2 * self.eps3
    }

    pub fn is_valid(&self) -> bool {
        self.product() == Sign::Plus
    }

    /// All 16 combinations.
    pub fn all() -> impl Iterator<Item = SignTriple> {
        Sign::BOTH.into_iter().flat_map(|e1| {
            Sign::BOTH.into_iter().flat_map(move |e2| {
                Sign::BOTH.into_iter().flat_map(move |e3| {
                    Sign::BOTH
                        .into_iter()
                        .map(move |e| SignTriple::new(e1, e2, e3, e))
                })
            })
        })
    }

    /// The 8 combinations with `eps1 * eps2 * eps3 = 1`.
    pub fn valid() -> impl Iterator<Item = SignTriple> {
        Self::all().filter(SignTriple::is_valid)
    }
}

/// `kappa = eps1 * alpha/(2|beta|) * sqrt(|beta|/(6s)) - eps2 * mu/(6s)`
pub fn kappa(params: &PhysicalParameters, eps1: Sign, eps2: Sign) -> f64 {
    eps1.value() * params.kink_scale() - eps2.value() * params.mu() / (6.0 * params.s())
}

/// Velocity of the solitary wave on branch `eps3`, written exactly as in the closed form.
pub(crate) fn velocity_formula(alpha: f64, abs_beta: f64, mu: f64, s: f64, eps3: f64) -> f64 {
    let bracket = alpha / (2.0 * abs_beta) * (abs_beta / (6.0 * s)).sqrt() - eps3 * mu / (6.0 * s);
    // -alpha^2/(4 beta) with beta = -|beta|
    -mu * mu / (6.0 * s) - 2.0 * s * bracket * bracket + alpha * alpha / (4.0 * abs_beta)
}

/// `(r, a, b, c)` of the reduced ODE at a given velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedOdeCoefficients {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ReducedOdeCoefficients {
    pub fn new(params: &PhysicalParameters, v: f64) -> Self {
        let s = params.s();
        Self {
            r: params.mu() / s,
            a: params.beta() / (3.0 * s),
            b: params.alpha() / (2.0 * s),
            c: -v / s,
        }
    }
}

/// `{B0, B1, C1, D1, v}` plus `kappa` and the phase shift `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveCoefficients {
    pub kappa: f64,
    pub b0: f64,
    pub b1: f64,
    pub c1: f64,
    #[serde(with = "crate::complex_json")]
    pub d1: Complex64,
    pub v: f64,
    #[serde(default)]
    pub x0: f64,
}

impl WaveCoefficients {
    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    /// A constant profile `u = b0` moving at `v`.
    pub fn constant(b0: f64, v: f64) -> Self {
        Self {
            kappa: 0.5,
            b0,
            b1: 0.0,
            c1: 1.0,
            d1: Complex64::new(0.0, 0.0),
            v,
            x0: 0.0,
        }
    }
}

/// Closed form without the sign constraint or width check.
pub(crate) fn closed_form(params: &PhysicalParameters, signs: &SignTriple) -> WaveCoefficients {
    let alpha = params.alpha();
    let ab = params.abs_beta();
    let mu = params.mu();
    let s = params.s();
    let e3 = signs.eps3.value();
    let amp = params.amplitude_factor();

    let k = kappa(params, signs.eps1, signs.eps2);
    let b0 = -alpha / (2.0 * params.beta()) - e3 * amp * mu / (6.0 * s);
    let b1 = e3 * amp * k;
    let d1_im = signs.eps.value() * (alpha / (2.0 * ab) - e3 * mu / (6.0 * s) * amp);
    WaveCoefficients {
        kappa: k,
        b0,
        b1,
        c1: 2.0 * k,
        d1: Complex64::new(0.0, d1_im),
        v: velocity_formula(alpha, ab, mu, s, e3),
        x0: 0.0,
    }
}

/// Coefficients of the complex solitary wave on the branch `signs`.
pub fn solve_coefficients(
    params: &PhysicalParameters,
    signs: &SignTriple,
) -> Result<WaveCoefficients> {
    if !signs.is_valid() {
        return Err(Error::ConstraintViolation {
            product: signs.product().as_i8() as i32,
        });
    }
    let coeffs = closed_form(params, signs);
    if coeffs.kappa.abs() < 1e-14 * params.kink_scale() + 1e-30 {
        return Err(Error::DegenerateWidth { c1: coeffs.c1 });
    }
    Ok(coeffs)
}

/// Real constant solutions `u*` of `a u^3 + b u^2 + c u = 0`, ascending, with multiplicity.
pub fn trivial_solutions(params: &PhysicalParameters, v: f64) -> Vec<f64> {
    let ReducedOdeCoefficients { a, b, c, .. } = ReducedOdeCoefficients::new(params, v);
    let mut roots = vec![0.0];
    // a u^2 + b u + c = 0, a < 0
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            roots.extend([0.0, 0.0]);
        } else {
            roots.push(q / a);
            roots.push(c / q);
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
}

/// `u`, `u'`, `u''` of `B0 + B1 tanh(C1 xi) + D1 sech(C1 xi)`.
pub fn profile_derivatives(coeffs: &WaveCoefficients, xi: f64) -> [Complex64; 3] {
    let z = coeffs.c1 * xi;
    let th = z.tanh();
    let sh = 1.0 / z.cosh();
    let (b1, c1, d1) = (coeffs.b1, coeffs.c1, coeffs.d1);
    let u = coeffs.b0 + b1 * th + d1 * sh;
    let du = b1 * c1 * sh * sh - d1 * c1 * sh * th;
    let d2u = -2.0 * b1 * c1 * c1 * sh * sh * th + d1 * c1 * c1 * (sh * th * th - sh * sh * sh);
    [u, du, d2u]
}

/// `u(x, t) = B0 + B1 tanh(C1 (x - v t + x0)) + D1 sech(C1 (x - v t + x0))`
pub fn evaluate_profile(coeffs: &WaveCoefficients, x: f64, t: f64) -> Complex64 {
    let z = coeffs.c1 * (x - coeffs.v * t + coeffs.x0);
    coeffs.b0 + coeffs.b1 * z.tanh() + coeffs.d1 / z.cosh()
}

/// Residual of the reduced ODE at one point.
///
/// `scale` is the largest term with `u, u', u''` replaced by majorants built from
/// `|B0|, |B1|, |D1|` (e.g. `|B0| + |B1| |tanh| + |D1| sech` for `u`). It bounds the
/// size of the intermediates, so `relative` stays meaningful in the tails where `u`
/// itself cancels to rounding level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeResidual {
    pub value: Complex64,
    pub scale: f64,
}

impl OdeResidual {
    /// `|value| / scale`, zero for an identically vanishing residual.
    pub fn relative(&self) -> f64 {
        let r = self.value.norm();
        if r == 0.0 {
            0.0
        } else {
            r / self.scale
        }
    }
}

/// `u'' + r u' + a u^3 + b u^2 + c u` at `xi`, for any coefficient set.
pub fn ode_residual(
    params: &PhysicalParameters,
    coeffs: &WaveCoefficients,
    xi: f64,
) -> OdeResidual {
    let ReducedOdeCoefficients { r, a, b, c } = ReducedOdeCoefficients::new(params, coeffs.v);
    let [u, du, d2u] = profile_derivatives(coeffs, xi);
    let terms = [d2u, r * du, a * u * u * u, b * u * u, c * u];

    let z = coeffs.c1 * xi;
    let (th, sh) = (z.tanh().abs(), 1.0 / z.cosh());
    let (mb0, mb1, md1, mc1) = (
        coeffs.b0.abs(),
        coeffs.b1.abs(),
        coeffs.d1.norm(),
        coeffs.c1.abs(),
    );
    let mu0 = mb0 + mb1 * th + md1 * sh;
    let mu1 = mc1 * (mb1 * sh * sh + md1 * sh * th);
    let mu2 = mc1 * mc1 * (2.0 * mb1 * sh * sh * th + md1 * (sh * th * th + sh * sh * sh));
    let majorants = [
        mu2,
        r.abs() * mu1,
        a.abs() * mu0.powi(3),
        b.abs() * mu0 * mu0,
        c.abs() * mu0,
    ];
    OdeResidual {
        value: terms.iter().sum(),
        scale: majorants.iter().copied().fold(0.0, f64::max),
    }
}

/// Largest relative ODE residual on `points` uniform samples of `[lo, hi]`.
pub fn max_relative_residual(
    params: &PhysicalParameters,
    coeffs: &WaveCoefficients,
    lo: f64,
    hi: f64,
    points: usize,
) -> f64 {
    let step = if points > 1 {
        (hi - lo) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points)
        .map(|i| ode_residual(params, coeffs, lo + step * i as f64).relative())
        .fold(0.0, f64::max)
}

/// Quotient `B1^2 / D1^2` and whether `|B1| = |D1|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeBalance {
    pub quotient: f64,
    pub balanced: bool,
}

pub const BALANCE_TOLERANCE: f64 = 1e-12;

pub fn amplitude_balance(coeffs: &WaveCoefficients) -> Result<AmplitudeBalance> {
    let b1 = coeffs.b1;
    let d1 = coeffs.d1;
    if b1 == 0.0 && d1.norm() == 0.0 {
        return Err(Error::DegenerateAmplitudes);
    }
    // D1 is pure imaginary, so D1^2 is real and non-positive
    let d1_sq = (d1 * d1).re;
    let quotient = b1 * b1 / d1_sq;
    let (mb, md) = (b1.abs(), d1.norm());
    let balanced = (mb - md).abs() <= BALANCE_TOLERANCE * mb.max(md);
    Ok(AmplitudeBalance { quotient, balanced })
}

/// A member of the closed-form family, bound to its parameters and branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TravelingWaveSolution {
    params: PhysicalParameters,
    signs: SignTriple,
    coeffs: WaveCoefficients,
}

impl TravelingWaveSolution {
    pub fn new(params: PhysicalParameters, signs: SignTriple) -> Result<Self> {
        let coeffs = solve_coefficients(&params, &signs)?;
        Ok(Self {
            params,
            signs,
            coeffs,
        })
    }

    /// Wraps arbitrary coefficients (constants, perturbed or searched sets) without
    /// checking them against the closed form; `signs` is carried as a label only.
    pub fn from_parts(
        params: PhysicalParameters,
        signs: SignTriple,
        coeffs: WaveCoefficients,
    ) -> Self {
        Self {
            params,
            signs,
            coeffs,
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.coeffs.x0 = x0;
        self
    }

    pub fn params(&self) -> &PhysicalParameters {
        &self.params
    }
    pub fn signs(&self) -> &SignTriple {
        &self.signs
    }
    pub fn coeffs(&self) -> &WaveCoefficients {
        &self.coeffs
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Complex64 {
        evaluate_profile(&self.coeffs, x, t)
    }

    pub fn residual_ode(&self, xi: f64) -> OdeResidual {
        ode_residual(&self.params, &self.coeffs, xi)
    }

    pub fn amplitude_balance(&self) -> Result<AmplitudeBalance> {
        amplitude_balance(&self.coeffs)
    }
}
