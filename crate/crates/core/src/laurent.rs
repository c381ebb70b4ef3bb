//! Sparse Laurent polynomials in `E = exp(C1 xi)` and rational functions over powers of
//! `E + 1/E`.
//!
//! Coefficients are generic so the same construction can run on plain complex numbers,
//! on forward-mode jets (for exact Jacobians) and on a max-times majorant (for the
//! magnitude of the largest monomial feeding each power of `E`).

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Field-like coefficient of a [`LaurentPoly`].
pub trait Coefficient:
    Clone + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn is_zero(&self) -> bool;
    fn magnitude(&self) -> f64;
}

impl Coefficient for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Complex value carrying its gradient with respect to `N` real unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub value: Complex64,
    pub grad: [Complex64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(value: Complex64) -> Self {
        Self {
            value,
            grad: [Complex64::new(0.0, 0.0); N],
        }
    }

    /// `value` with unit derivative along the unknown `index`, scaled by `direction`.
    pub fn variable(value: Complex64, index: usize, direction: Complex64) -> Self {
        let mut j = Self::constant(value);
        j.grad[index] = direction;
        j
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.value += rhs.value;
        for (g, h) in self.grad.iter_mut().zip(rhs.grad) {
            *g += h;
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.value -= rhs.value;
        for (g, h) in self.grad.iter_mut().zip(rhs.grad) {
            *g -= h;
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut grad = [Complex64::new(0.0, 0.0); N];
        for (i, g) in grad.iter_mut().enumerate() {
            *g = self.grad[i] * rhs.value + self.value * rhs.grad[i];
        }
        Self {
            value: self.value * rhs.value,
            grad,
        }
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for g in self.grad.iter_mut() {
            *g = -*g;
        }
        self
    }
}

impl<const N: usize> Coefficient for Jet<N> {
    fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }
    fn from_f64(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero() && self.grad.iter().all(Coefficient::is_zero)
    }
    fn magnitude(&self) -> f64 {
        self.value.norm()
    }
}

/// Max-times majorant: sums become maxima, products stay products, signs are dropped.
///
/// Running an expression on the absolute values of its inputs yields the magnitude of
/// the largest monomial before like terms cancel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MonomialMax(pub f64);

impl Add for MonomialMax {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        MonomialMax(self.0.max(rhs.0))
    }
}

impl Sub for MonomialMax {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        MonomialMax(self.0.max(rhs.0))
    }
}

impl Mul for MonomialMax {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        MonomialMax(self.0 * rhs.0)
    }
}

impl Neg for MonomialMax {
    type Output = Self;
    fn neg(self) -> Self {
        self
    }
}

impl Coefficient for MonomialMax {
    fn zero() -> Self {
        MonomialMax(0.0)
    }
    fn from_f64(x: f64) -> Self {
        MonomialMax(x.abs())
    }
    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.0
    }
}

/// `sum_k c_k E^k` with integer `k`; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly<C> {
    terms: BTreeMap<i32, C>,
}

impl<C: Coefficient> Default for LaurentPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> LaurentPoly<C> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(exponent: i32, coeff: C) -> Self {
        let mut p = Self::zero();
        p.accumulate(exponent, coeff);
        p
    }

    pub fn constant(coeff: C) -> Self {
        Self::monomial(0, coeff)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i32, C)>) -> Self {
        let mut p = Self::zero();
        for (k, c) in terms {
            p.accumulate(k, c);
        }
        p
    }

    /// `E + 1/E`
    pub fn e_plus_inverse() -> Self {
        Self::from_terms([(1, C::from_f64(1.0)), (-1, C::from_f64(1.0))])
    }

    /// `E - 1/E`
    pub fn e_minus_inverse() -> Self {
        Self::from_terms([(1, C::from_f64(1.0)), (-1, C::from_f64(-1.0))])
    }

    fn accumulate(&mut self, exponent: i32, coeff: C) {
        let merged = match self.terms.remove(&exponent) {
            Some(existing) => existing + coeff,
            None => coeff,
        };
        if !merged.is_zero() {
            self.terms.insert(exponent, merged);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exponent: i32) -> C {
        self.terms.get(&exponent).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &C)> {
        self.terms.iter().map(|(k, c)| (*k, c))
    }

    pub fn min_exponent(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    pub fn max_exponent(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    /// Multiplication by `E^shift`.
    pub fn shift(&self, shift: i32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k + shift, c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|(k, c)| (*k, c.clone() * factor.clone())),
        )
    }

    /// `d/dxi` when `E = exp(rate * xi)`: `E^k -> k * rate * E^k`.
    pub fn derivative(&self, rate: &C) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|(k, c)| (*k, C::from_f64(*k as f64) * rate.clone() * c.clone())),
        )
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(C::from_f64(1.0));
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn max_magnitude(&self) -> f64 {
        self.terms.values().map(C::magnitude).fold(0.0, f64::max)
    }
}

impl LaurentPoly<Complex64> {
    pub fn eval(&self, e: Complex64) -> Complex64 {
        self.terms.iter().map(|(k, c)| c * e.powi(*k)).sum()
    }

    /// Same exponent set up to coefficients below `tol * scale`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = self - other;
        let scale = self.max_magnitude().max(other.max_magnitude()).max(1.0);
        diff.max_magnitude() <= tol * scale
    }
}

impl<C: Coefficient> Add for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn add(self, rhs: Self) -> LaurentPoly<C> {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.accumulate(*k, c.clone());
        }
        out
    }
}

impl<C: Coefficient> Sub for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn sub(self, rhs: Self) -> LaurentPoly<C> {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.accumulate(*k, -c.clone());
        }
        out
    }
}

impl<C: Coefficient> Mul for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn mul(self, rhs: Self) -> LaurentPoly<C> {
        let mut out = LaurentPoly::zero();
        for (i, a) in &self.terms {
            for (j, b) in &rhs.terms {
                out.accumulate(i + j, a.clone() * b.clone());
            }
        }
        out
    }
}

impl<C: Coefficient> Add for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn add(self, rhs: Self) -> LaurentPoly<C> {
        &self + &rhs
    }
}

impl<C: Coefficient> Sub for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn sub(self, rhs: Self) -> LaurentPoly<C> {
        &self - &rhs
    }
}

impl<C: Coefficient> Mul for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn mul(self, rhs: Self) -> LaurentPoly<C> {
        &self * &rhs
    }
}

/// `numerator / (E + 1/E)^power`
#[derive(Debug, Clone, PartialEq)]
pub struct RationalHyperbolic<C> {
    pub numerator: LaurentPoly<C>,
    pub power: u32,
}

impl<C: Coefficient> RationalHyperbolic<C> {
    pub fn constant(c: C) -> Self {
        Self {
            numerator: LaurentPoly::constant(c),
            power: 0,
        }
    }

    /// `tanh(C1 xi) = (E - 1/E) / (E + 1/E)`
    pub fn tanh() -> Self {
        Self {
            numerator: LaurentPoly::e_minus_inverse(),
            power: 1,
        }
    }

    /// `sech(C1 xi) = 2 / (E + 1/E)`
    pub fn sech() -> Self {
        Self {
            numerator: LaurentPoly::constant(C::from_f64(2.0)),
            power: 1,
        }
    }

    /// `sinh(C1 xi) = (E - 1/E) / 2`
    pub fn sinh() -> Self {
        Self {
            numerator: LaurentPoly::e_minus_inverse().scale(&C::from_f64(0.5)),
            power: 0,
        }
    }

    pub fn denominator(&self) -> LaurentPoly<C> {
        LaurentPoly::e_plus_inverse().pow(self.power)
    }

    /// Same value with denominator `(E + 1/E)^power`, `power >= self.power`.
    pub fn lift(&self, power: u32) -> Self {
        assert!(power >= self.power);
        Self {
            numerator: &self.numerator * &LaurentPoly::e_plus_inverse().pow(power - self.power),
            power,
        }
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self {
            numerator: self.numerator.scale(factor),
            power: self.power,
        }
    }

    /// `d/dxi` with `E = exp(rate * xi)`: `(N' D - m N D') / D^(m+1)`, `D' = rate (E - 1/E)`.
    pub fn derivative(&self, rate: &C) -> Self {
        let d = LaurentPoly::e_plus_inverse();
        let dd = LaurentPoly::e_minus_inverse().scale(rate);
        let lhs = &self.numerator.derivative(rate) * &d;
        let rhs = (&self.numerator * &dd).scale(&C::from_f64(self.power as f64));
        Self {
            numerator: &lhs - &rhs,
            power: self.power + 1,
        }
    }

    /// Numerator after multiplying through by `(E + 1/E)^power * E^power`.
    pub fn cleared(&self) -> LaurentPoly<C> {
        self.numerator.shift(self.power as i32)
    }
}

impl RationalHyperbolic<Complex64> {
    pub fn eval(&self, e: Complex64) -> Complex64 {
        self.numerator.eval(e) / (e + 1.0 / e).powu(self.power)
    }

    /// Cross-multiplied comparison: `N1 D2 = N2 D1`.
    pub fn cross_eq(&self, other: &Self, tol: f64) -> bool {
        let lhs = &self.numerator * &other.denominator();
        let rhs = &other.numerator * &self.denominator();
        lhs.approx_eq(&rhs, tol)
    }
}

impl<C: Coefficient> Add for &RationalHyperbolic<C> {
    type Output = RationalHyperbolic<C>;
    fn add(self, rhs: Self) -> RationalHyperbolic<C> {
        let power = self.power.max(rhs.power);
        RationalHyperbolic {
            numerator: &self.lift(power).numerator + &rhs.lift(power).numerator,
            power,
        }
    }
}

impl<C: Coefficient> Sub for &RationalHyperbolic<C> {
    type Output = RationalHyperbolic<C>;
    fn sub(self, rhs: Self) -> RationalHyperbolic<C> {
        let power = self.power.max(rhs.power);
        RationalHyperbolic {
            numerator: &self.lift(power).numerator - &rhs.lift(power).numerator,
            power,
        }
    }
}

impl<C: Coefficient> Mul for &RationalHyperbolic<C> {
    type Output = RationalHyperbolic<C>;
    fn mul(self, rhs: Self) -> RationalHyperbolic<C> {
        RationalHyperbolic {
            numerator: &self.numerator * &rhs.numerator,
            power: self.power + rhs.power,
        }
    }
}
