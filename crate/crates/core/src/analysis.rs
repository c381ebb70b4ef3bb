//! Wave velocity as a function of the physical parameters: closed-form partials,
//! stationary points, zero crossings, limits and sampled monotonicity checks.
//!
//! Expanded, the velocity reads
//!
//! ```text
//! v = -2 mu^2 / (9 s) + alpha^2 / (6 |beta|) + eps3 mu alpha / (3 sqrt(6 s |beta|))
//! ```
//!
//! which is quadratic in `alpha`, in `mu` and in `1/sqrt(|beta|)`. Every limit and
//! stationary point below follows from that form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{velocity_formula, PhysicalParameters, Sign};

/// Bisection stops once `|v|` drops below this.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Upper search bound for zero crossings, relative to the starting bracket.
pub const BRACKET_CAP: f64 = 1152921504606846976.0; // 2^60

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityQuery {
    pub params: PhysicalParameters,
    pub eps3: Sign,
}

impl VelocityQuery {
    pub fn new(params: PhysicalParameters, eps3: Sign) -> Self {
        Self { params, eps3 }
    }
}

pub fn velocity(q: &VelocityQuery) -> f64 {
    let p = &q.params;
    velocity_formula(p.alpha(), p.abs_beta(), p.mu(), p.s(), q.eps3.value())
}

/// The velocity formula at raw values, including boundary points such as `alpha = 0`
/// or `mu = 0` that [`PhysicalParameters`] rejects.
pub fn velocity_raw(alpha: f64, abs_beta: f64, mu: f64, s: f64, eps3: Sign) -> f64 {
    velocity_formula(alpha, abs_beta, mu, s, eps3.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGradient {
    pub dv_dalpha: f64,
    pub dv_dmu: f64,
    pub dv_dabsbeta: f64,
    pub dv_ds: f64,
}

pub fn velocity_gradient(q: &VelocityQuery) -> VelocityGradient {
    let p = &q.params;
    gradient_raw(p.alpha(), p.abs_beta(), p.mu(), p.s(), q.eps3)
}

pub fn gradient_raw(alpha: f64, abs_beta: f64, mu: f64, s: f64, eps3: Sign) -> VelocityGradient {
    let e = eps3.value();
    let root = (6.0 * abs_beta / s).sqrt();
    let ratio = (abs_beta / s).sqrt();
    VelocityGradient {
        dv_dalpha: (root * e * mu + 6.0 * alpha) / (18.0 * abs_beta),
        dv_dmu: (s * alpha * root * e - 8.0 * abs_beta * mu) / (18.0 * s * abs_beta),
        dv_dabsbeta: -alpha * (6.0 * alpha + root * e * mu) / (36.0 * abs_beta * abs_beta),
        dv_ds: mu * (-(6f64.sqrt()) * alpha * e + 8.0 * mu * ratio) / (36.0 * s * s * ratio),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    /// Minimizer of `v` in `alpha`; exists only for `eps3 = -1` and `mu > 0`.
    pub alpha_v: Option<f64>,
    /// `beta` at which `dv/d|beta|` vanishes: `-6 alpha^2 s / mu^2`, same existence rule.
    pub beta_v: Option<f64>,
    /// The tabulated value `-alpha^2 s / (6 mu^2)`, kept for comparison. `dv/d|beta|`
    /// does not vanish there.
    pub beta_v_printed: Option<f64>,
    pub alpha_c: Option<f64>,
    pub mu_c: Option<f64>,
}

/// Bisection on a continuous `f` with `f(lo) < 0 < f(hi)` or the reverse.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() < ROOT_TOLERANCE || mid == lo || mid == hi {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `f` in `(lo, hi]`, doubling `hi` up to `cap`.
fn bracket_and_bisect(f: impl Fn(f64) -> f64, lo: f64, start: f64, cap: f64) -> Option<f64> {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return Some(lo);
    }
    let mut hi = start;
    while hi <= cap {
        let f_hi = f(hi);
        if f_hi == 0.0 {
            return Some(hi);
        }
        if (f_hi < 0.0) != (f_lo < 0.0) {
            return Some(bisect(&f, lo, hi));
        }
        hi *= 2.0;
    }
    None
}

pub fn critical_points(params: &PhysicalParameters, eps3: Sign) -> CriticalPoints {
    let (alpha, abs_beta, mu, s) = (params.alpha(), params.abs_beta(), params.mu(), params.s());
    let stationary = eps3 == Sign::Minus && mu > 0.0;
    let alpha_v = stationary.then(|| mu * (abs_beta / (6.0 * s)).sqrt());
    let beta_v = stationary.then(|| -6.0 * alpha * alpha * s / (mu * mu));
    let beta_v_printed = (mu > 0.0).then(|| -alpha * alpha * s / (6.0 * mu * mu));

    let v_alpha = |a: f64| velocity_raw(a, abs_beta, mu, s, eps3);
    let alpha_lo = alpha_v.unwrap_or(0.0);
    let alpha_start = if alpha_lo > 0.0 {
        2.0 * alpha_lo
    } else {
        alpha
    };
    let alpha_c = bracket_and_bisect(v_alpha, alpha_lo, alpha_start, BRACKET_CAP * alpha_start)
        .filter(|a| *a > 0.0);

    let v_mu = |m: f64| velocity_raw(alpha, abs_beta, m, s, eps3);
    let mu_start = if mu > 0.0 {
        mu
    } else {
        params.kink_scale().max(alpha)
    };
    let mu_c = bracket_and_bisect(v_mu, 0.0, mu_start, BRACKET_CAP * mu_start).filter(|m| *m > 0.0);

    CriticalPoints {
        alpha_v,
        beta_v,
        beta_v_printed,
        alpha_c,
        mu_c,
    }
}

/// A limit of `v`, with the tabulated value next to the one the formula yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitValue {
    pub analytic: f64,
    pub printed: f64,
}

impl LimitValue {
    pub fn agrees(&self, rel: f64) -> bool {
        (self.analytic - self.printed).abs() <= rel * self.analytic.abs().max(self.printed.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits {
    pub alpha_to_zero: LimitValue,
    pub mu_to_zero: LimitValue,
    pub abs_beta_to_infinity: LimitValue,
    pub s_to_infinity: LimitValue,
    /// Value at `alpha_v`, when it exists.
    pub minimum_in_alpha: Option<LimitValue>,
}

/// Closed-form limits of `v` for `eps3 = -1` and `eps3 = +1` alike (the `eps3` term
/// vanishes in all four). Tabulated values are those of the `eps3 = -1` tables.
pub fn velocity_limits(params: &PhysicalParameters, eps3: Sign) -> VelocityLimits {
    let (alpha, abs_beta, mu, s) = (params.alpha(), params.abs_beta(), params.mu(), params.s());
    let quiet = -2.0 * mu * mu / (9.0 * s);
    let steep = alpha * alpha / (6.0 * abs_beta);
    let minimum = -mu * mu / (4.0 * s);
    VelocityLimits {
        alpha_to_zero: LimitValue {
            analytic: quiet,
            printed: quiet,
        },
        mu_to_zero: LimitValue {
            analytic: steep,
            printed: steep,
        },
        abs_beta_to_infinity: LimitValue {
            analytic: quiet,
            printed: -mu * mu / (9.0 * s),
        },
        s_to_infinity: LimitValue {
            analytic: steep,
            printed: alpha * alpha / (4.0 * abs_beta),
        },
        minimum_in_alpha: (eps3 == Sign::Minus && mu > 0.0).then_some(LimitValue {
            analytic: minimum,
            printed: minimum,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Alpha,
    Beta,
    Mu,
    S,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Alpha => "alpha",
            Parameter::Beta => "beta",
            Parameter::Mu => "mu",
            Parameter::S => "s",
        }
    }
}

impl std::str::FromStr for Parameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Parameter::Alpha),
            "beta" => Ok(Parameter::Beta),
            "mu" => Ok(Parameter::Mu),
            "s" => Ok(Parameter::S),
            other => Err(Error::InvalidParameters(format!(
                "unknown sweep parameter {other:?}; expected alpha, beta, mu or s"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// One-parameter sweep. For `beta` the range is given in `beta` itself (negative values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub varying: Parameter,
    pub range: (f64, f64),
    pub count: usize,
    pub fixed: PhysicalParameters,
    pub eps3: Sign,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        let fail = |why: String| Err(Error::SweepOutsideValidity(why));
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return fail(format!(
                "range must be finite with lo < hi, got ({lo}, {hi})"
            ));
        }
        if self.count < 2 {
            return fail(format!("count must be at least 2, got {}", self.count));
        }
        let ok = match self.varying {
            Parameter::Alpha | Parameter::Mu => lo >= 0.0,
            Parameter::Beta => hi < 0.0,
            Parameter::S => lo > 0.0,
        };
        if !ok {
            let need = match self.varying {
                Parameter::Alpha => "alpha >= 0",
                Parameter::Mu => "mu >= 0",
                Parameter::Beta => "beta < 0",
                Parameter::S => "s > 0",
            };
            return fail(format!(
                "{} range ({lo}, {hi}) leaves {need}",
                self.varying.name()
            ));
        }
        if self.spacing == Spacing::Log && lo * hi <= 0.0 {
            return fail(format!(
                "log spacing needs a range of one strict sign, got ({lo}, {hi})"
            ));
        }
        Ok(())
    }

    /// Sample values of the varying parameter, in ascending order.
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi) = self.range;
        let n = self.count;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                let x = match self.spacing {
                    Spacing::Linear => lo + f * (hi - lo),
                    Spacing::Log => {
                        let sign = lo.signum();
                        sign * ((lo.abs()).ln() + f * ((hi.abs()).ln() - (lo.abs()).ln())).exp()
                    }
                };
                if i == 0 {
                    lo
                } else if i == n - 1 {
                    hi
                } else {
                    x
                }
            })
            .collect()
    }

    fn raw_at(&self, value: f64) -> (f64, f64, f64, f64) {
        let p = &self.fixed;
        let (mut a, mut b, mut m, mut s) = (p.alpha(), p.abs_beta(), p.mu(), p.s());
        match self.varying {
            Parameter::Alpha => a = value,
            Parameter::Beta => b = value.abs(),
            Parameter::Mu => m = value,
            Parameter::S => s = value,
        }
        (a, b, m, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub v: f64,
    pub gradient: VelocityGradient,
    /// Evaluated at `alpha = 0` or `mu = 0`, outside the strict parameter domain.
    pub boundary: bool,
}

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    Ok(spec
        .values()
        .par_iter()
        .map(|&value| {
            let (a, b, m, s) = spec.raw_at(value);
            SweepRow {
                value,
                v: velocity_raw(a, b, m, s, spec.eps3),
                gradient: gradient_raw(a, b, m, s, spec.eps3),
                boundary: a == 0.0 || m == 0.0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
}

/// Expected shape of `v` along the sweep coordinate (`|beta|` for beta sweeps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Monotone(Trend),
    /// Decreasing, then increasing past the given point.
    Valley(f64),
    /// Increasing, then decreasing past the given point.
    Peak(f64),
}

/// Predicted shape, from the sign structure of the closed-form partials.
pub fn expected_pattern(varying: Parameter, fixed: &PhysicalParameters, eps3: Sign) -> Pattern {
    let (alpha, abs_beta, mu, s) = (fixed.alpha(), fixed.abs_beta(), fixed.mu(), fixed.s());
    let minus = eps3 == Sign::Minus;
    match varying {
        Parameter::Alpha if minus && mu > 0.0 => {
            Pattern::Valley(mu * (abs_beta / (6.0 * s)).sqrt())
        }
        Parameter::Alpha => Pattern::Monotone(Trend::Increasing),
        Parameter::Mu if minus => Pattern::Monotone(Trend::Decreasing),
        Parameter::Mu => Pattern::Peak(3.0 * alpha * s / (4.0 * (6.0 * s * abs_beta).sqrt())),
        Parameter::Beta if minus && mu > 0.0 => {
            Pattern::Valley(6.0 * alpha * alpha * s / (mu * mu))
        }
        Parameter::Beta => Pattern::Monotone(Trend::Decreasing),
        Parameter::S if minus || mu == 0.0 => Pattern::Monotone(Trend::Increasing),
        Parameter::S => Pattern::Peak(32.0 * mu * mu * abs_beta / (3.0 * alpha * alpha)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub from: f64,
    pub to: f64,
    pub expected: Trend,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndObservation {
    pub label: &'static str,
    /// Sweep coordinate at the observed end.
    pub at: f64,
    pub observed: f64,
    pub limit: LimitValue,
    /// The end sits on the domain boundary, so `observed` is the limit itself.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub varying: Parameter,
    pub eps3: Sign,
    pub pattern: Pattern,
    pub segments: Vec<SegmentCheck>,
    /// Sample coordinate where `v` is extremal, for valley and peak patterns.
    pub observed_extremum: Option<f64>,
    /// Whether `observed_extremum` lies within one sample spacing of the predicted point.
    pub extremum_located: Option<bool>,
    pub ends: Vec<EndObservation>,
    pub boundary_evaluations: bool,
    pub pass: bool,
}

fn coordinate(varying: Parameter, value: f64) -> f64 {
    match varying {
        Parameter::Beta => value.abs(),
        _ => value,
    }
}

fn check_trend(points: &[(f64, f64)], trend: Trend) -> bool {
    points.windows(2).all(|w| match trend {
        Trend::Increasing => w[1].1 > w[0].1,
        Trend::Decreasing => w[1].1 < w[0].1,
    })
}

pub fn monotonicity_report(spec: &SweepSpec) -> Result<MonotonicityReport> {
    let rows = sweep(spec)?;
    let pattern = expected_pattern(spec.varying, &spec.fixed, spec.eps3);
    let mut points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (coordinate(spec.varying, r.value), r.v))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (first, second, turn) = match pattern {
        Pattern::Monotone(t) => (t, t, None),
        Pattern::Valley(x) => (Trend::Decreasing, Trend::Increasing, Some(x)),
        Pattern::Peak(x) => (Trend::Increasing, Trend::Decreasing, Some(x)),
    };
    let mut segments = Vec::new();
    let mut push = |pts: &[(f64, f64)], expected: Trend| {
        if pts.len() >= 2 {
            segments.push(SegmentCheck {
                from: pts[0].0,
                to: pts[pts.len() - 1].0,
                expected,
                pass: check_trend(pts, expected),
            });
        }
    };
    match turn {
        None => push(&points, first),
        Some(x) => {
            let split = points.partition_point(|p| p.0 <= x);
            push(&points[..split], first);
            push(&points[split..], second);
        }
    }

    let (observed_extremum, extremum_located) = match turn {
        None => (None, None),
        Some(x) => {
            let pick = points
                .iter()
                .copied()
                .reduce(|a, b| match pattern {
                    Pattern::Peak(_) => {
                        if b.1 > a.1 {
                            b
                        } else {
                            a
                        }
                    }
                    _ => {
                        if b.1 < a.1 {
                            b
                        } else {
                            a
                        }
                    }
                })
                .expect("count >= 2");
            let max_gap = points
                .windows(2)
                .map(|w| w[1].0 - w[0].0)
                .fold(0.0, f64::max);
            let inside = x >= points[0].0 && x <= points[points.len() - 1].0;
            (Some(pick.0), inside.then(|| (pick.0 - x).abs() <= max_gap))
        }
    };

    let limits = velocity_limits(&spec.fixed, spec.eps3);
    let lo = points[0];
    let hi = points[points.len() - 1];
    let ends = match spec.varying {
        Parameter::Alpha => vec![EndObservation {
            label: "alpha->0",
            at: lo.0,
            observed: lo.1,
            limit: limits.alpha_to_zero,
            boundary: lo.0 == 0.0,
        }],
        Parameter::Mu => vec![EndObservation {
            label: "mu->0",
            at: lo.0,
            observed: lo.1,
            limit: limits.mu_to_zero,
            boundary: lo.0 == 0.0,
        }],
        Parameter::Beta => vec![EndObservation {
            label: "|beta|->inf",
            at: hi.0,
            observed: hi.1,
            limit: limits.abs_beta_to_infinity,
            boundary: false,
        }],
        Parameter::S => vec![EndObservation {
            label: "s->inf",
            at: hi.0,
            observed: hi.1,
            limit: limits.s_to_infinity,
            boundary: false,
        }],
    };
    let boundary_evaluations = rows.iter().any(|r| r.boundary);
    let ends_ok = ends.iter().all(|e| {
        !e.boundary
            || (e.observed - e.limit.analytic).abs() <= 1e-12 * e.limit.analytic.abs().max(1e-300)
    });
    let pass = segments.iter().all(|s| s.pass) && extremum_located.unwrap_or(true) && ends_ok;
    Ok(MonotonicityReport {
        varying: spec.varying,
        eps3: spec.eps3,
        pattern,
        segments,
        observed_extremum,
        extremum_located,
        ends,
        boundary_evaluations,
        pass,
    })
}
