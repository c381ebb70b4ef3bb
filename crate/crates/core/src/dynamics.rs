//! Method-of-lines integration of the complex cBKdV equation.
//!
//! Second-order central differences in space, classical RK4 in time, and two analytic
//! ghost points per side taken from a reference traveling wave at each stage time.
//!
//! With `mu > 0` the `+mu u_xx` term is anti-diffusive: the forward problem amplifies
//! grid-scale modes at a rate close to `mu (pi/dx)^2` and explicit forward runs blow up.
//! A negative `t_end` integrates backward in time, where the same term damps and the
//! problem is well posed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PhysicalParameters, TravelingWaveSolution};

/// Grids with at least this many points evaluate the right-hand side in parallel.
pub const PARALLEL_THRESHOLD: usize = 4096;

/// A field exceeding this multiple of its initial sup norm counts as blown up.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Kink containment margin: `|tanh|` at both edges must exceed `1 - CONTAINMENT`.
pub const CONTAINMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_left: f64,
    pub x_right: f64,
    pub num_points: usize,
    pub dx: f64,
}

impl GridSpec {
    pub fn new(x_left: f64, x_right: f64, num_points: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite()) || x_left >= x_right {
            return Err(Error::InvalidParameters(format!(
                "grid needs finite x_left < x_right, got [{x_left}, {x_right}]"
            )));
        }
        if num_points < 16 {
            return Err(Error::InvalidParameters(format!(
                "grid needs at least 16 points, got {num_points}"
            )));
        }
        Ok(Self {
            x_left,
            x_right,
            num_points,
            dx: (x_right - x_left) / (num_points - 1) as f64,
        })
    }

    /// Uniform grid whose spacing is `dx`; the width must be a whole number of cells.
    pub fn with_spacing(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "dx must be positive, got {dx}"
            )));
        }
        let cells = (x_right - x_left) / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidParameters(format!(
                "width {} is not a multiple of dx = {dx}",
                x_right - x_left
            )));
        }
        Self::new(x_left, x_right, rounded as usize + 1)
    }

    pub fn x(&self, i: isize) -> f64 {
        self.x_left + i as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.num_points as isize).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpec {
    /// Final time; negative values integrate backward from `t = 0`.
    pub t_end: f64,
    /// Step magnitude.
    pub dt: f64,
    pub safety_factor: f64,
}

impl TimeSpec {
    pub fn new(t_end: f64, dt: f64, safety_factor: f64) -> Result<Self> {
        if !t_end.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "t_end must be finite, got {t_end}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !(safety_factor > 0.0 && safety_factor <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "safety_factor must lie in (0, 1], got {safety_factor}"
            )));
        }
        Ok(Self {
            t_end,
            dt,
            safety_factor,
        })
    }

    /// Largest step allowed by the guard, shrunk so that it divides `|t_end|` exactly.
    pub fn guarded(
        sol: &TravelingWaveSolution,
        grid: &GridSpec,
        t_end: f64,
        safety_factor: f64,
    ) -> Result<Self> {
        let probe = Self::new(t_end, 1.0, safety_factor)?;
        let bound =
            probe.safety_factor * stability_bound(sol.params(), grid, initial_scale(sol, grid));
        let steps = (t_end.abs() / bound).ceil().max(1.0);
        let dt = if t_end == 0.0 {
            bound
        } else {
            t_end.abs() / steps
        };
        Self::new(t_end, dt, safety_factor)
    }

    pub fn num_steps(&self) -> usize {
        (self.t_end.abs() / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// `dx^3 / (4 s + dx mu + dx^2 u_scale (alpha + |beta| u_scale))`
pub fn stability_bound(params: &PhysicalParameters, grid: &GridSpec, u_scale: f64) -> f64 {
    let dx = grid.dx;
    dx.powi(3)
        / (4.0 * params.s()
            + dx * params.mu()
            + dx * dx * u_scale * (params.alpha() + params.abs_beta() * u_scale))
}

fn initial_scale(sol: &TravelingWaveSolution, grid: &GridSpec) -> f64 {
    grid.coordinates()
        .iter()
        .map(|&x| sol.evaluate(x, 0.0).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    #[serde(with = "complex_vec")]
    pub values: Vec<Complex64>,
}

impl FieldState {
    pub fn sample(sol: &TravelingWaveSolution, grid: &GridSpec, t: f64) -> Self {
        Self {
            t,
            values: grid
                .coordinates()
                .iter()
                .map(|&x| sol.evaluate(x, t))
                .collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub l_inf: f64,
    pub l2: f64,
    pub t: f64,
}

/// Error against the analytic field on interior points (two excluded at each end).
pub fn error_metrics(
    state: &FieldState,
    sol: &TravelingWaveSolution,
    grid: &GridSpec,
) -> ErrorMetrics {
    let n = state.values.len();
    let mut l_inf: f64 = 0.0;
    let mut sq = 0.0;
    for i in 2..n.saturating_sub(2) {
        let e = (state.values[i] - sol.evaluate(grid.x(i as isize), state.t)).norm();
        l_inf = l_inf.max(e);
        sq += e * e;
    }
    ErrorMetrics {
        l_inf,
        l2: (grid.dx * sq).sqrt(),
        t: state.t,
    }
}

/// `(u_x, u_xx, u_xxx)` at the centre of a five-point window.
pub fn central_derivatives(w: [Complex64; 5], dx: f64) -> (Complex64, Complex64, Complex64) {
    let [m2, m1, c, p1, p2] = w;
    let ux = (p1 - m1) / (2.0 * dx);
    let uxx = (p1 - 2.0 * c + m1) / (dx * dx);
    let uxxx = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * dx * dx * dx);
    (ux, uxx, uxxx)
}

/// `u_t = -alpha u u_x - beta u^2 u_x - mu u_xx - s u_xxx` at every grid point.
pub fn rhs(
    state: &FieldState,
    params: &PhysicalParameters,
    grid: &GridSpec,
    boundary: &TravelingWaveSolution,
) -> Result<Vec<Complex64>> {
    rhs_impl(
        state,
        params,
        grid,
        boundary,
        state.values.len() >= PARALLEL_THRESHOLD,
    )
}

fn rhs_impl(
    state: &FieldState,
    params: &PhysicalParameters,
    grid: &GridSpec,
    boundary: &TravelingWaveSolution,
    parallel: bool,
) -> Result<Vec<Complex64>> {
    let n = state.values.len();
    if n != grid.num_points {
        return Err(Error::InvalidParameters(format!(
            "state has {n} values but the grid has {} points",
            grid.num_points
        )));
    }
    // field with two analytic ghost values on each side
    let ghost = |i: isize| boundary.evaluate(grid.x(i), state.t);
    let mut padded = Vec::with_capacity(n + 4);
    padded.extend([ghost(-2), ghost(-1)]);
    padded.extend_from_slice(&state.values);
    padded.extend([ghost(n as isize), ghost(n as isize + 1)]);

    let (alpha, beta, mu, s) = (params.alpha(), params.beta(), params.mu(), params.s());
    let point = |w: &[Complex64]| -> Complex64 {
        let (ux, uxx, uxxx) = central_derivatives([w[0], w[1], w[2], w[3], w[4]], grid.dx);
        let u = w[2];
        -(alpha * u * ux) - beta * u * u * ux - mu * uxx - s * uxxx
    };

    let out: Vec<Complex64> = if parallel {
        padded
            .par_windows(5)
            .with_min_len(1024)
            .map(point)
            .collect()
    } else {
        padded.windows(5).map(point).collect()
    };
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::BlowUp { t: state.t });
    }
    Ok(out)
}

fn axpy(base: &[Complex64], k: &[Complex64], h: f64) -> Vec<Complex64> {
    base.iter().zip(k).map(|(b, k)| b + k * h).collect()
}

/// One classical RK4 step of signed size `dt`; ghosts follow each stage time.
pub fn step_rk4(
    state: &FieldState,
    dt: f64,
    params: &PhysicalParameters,
    grid: &GridSpec,
    boundary: &TravelingWaveSolution,
) -> Result<FieldState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let stage = |t: f64, values: Vec<Complex64>| FieldState { t, values };
    let u = &state.values;
    let k1 = rhs(state, params, grid, boundary)?;
    let k2 = rhs(
        &stage(state.t + 0.5 * dt, axpy(u, &k1, 0.5 * dt)),
        params,
        grid,
        boundary,
    )?;
    let k3 = rhs(
        &stage(state.t + 0.5 * dt, axpy(u, &k2, 0.5 * dt)),
        params,
        grid,
        boundary,
    )?;
    let k4 = rhs(
        &stage(state.t + dt, axpy(u, &k3, dt)),
        params,
        grid,
        boundary,
    )?;
    let values = (0..u.len())
        .map(|i| u[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
        .collect();
    Ok(FieldState {
        t: state.t + dt,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub state: FieldState,
    pub metrics: ErrorMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub stability_bound: f64,
    pub steps: usize,
    pub records: Vec<SimulationRecord>,
}

impl SimulationRun {
    pub fn final_metrics(&self) -> ErrorMetrics {
        self.records
            .last()
            .expect("a run always has a record")
            .metrics
    }
}

fn check_containment(sol: &TravelingWaveSolution, grid: &GridSpec, t: f64) -> Result<()> {
    let c = sol.coeffs();
    for x in [grid.x_left, grid.x_right] {
        let th = (c.c1 * (x - c.v * t + c.x0)).tanh().abs();
        if th.is_nan() || th <= 1.0 - CONTAINMENT {
            return Err(Error::DomainTooNarrow(format!(
                "|tanh| = {th} at x = {x}, t = {t}; widen [{}, {}]",
                grid.x_left, grid.x_right
            )));
        }
    }
    Ok(())
}

/// Integrates from the analytic profile at `t = 0` to `time.t_end`, recording every
/// `record_every` steps and always the final state.
pub fn simulate(
    sol: &TravelingWaveSolution,
    grid: &GridSpec,
    time: &TimeSpec,
    record_every: usize,
) -> Result<SimulationRun> {
    simulate_from(
        sol,
        grid,
        time,
        FieldState::sample(sol, grid, 0.0),
        record_every,
    )
}

/// Like [`simulate`] but starting from `initial` (taken at `t = 0`); ghost values and
/// error metrics still come from `sol`.
pub fn simulate_from(
    sol: &TravelingWaveSolution,
    grid: &GridSpec,
    time: &TimeSpec,
    initial: FieldState,
    record_every: usize,
) -> Result<SimulationRun> {
    if initial.values.len() != grid.num_points {
        return Err(Error::InvalidParameters(format!(
            "initial state has {} values for {} grid points",
            initial.values.len(),
            grid.num_points
        )));
    }
    if record_every == 0 {
        return Err(Error::InvalidParameters(
            "record_every must be at least 1".into(),
        ));
    }
    // xi is affine in t, so the two end times cover the whole interval
    check_containment(sol, grid, 0.0)?;
    check_containment(sol, grid, time.t_end)?;

    let params = sol.params();
    let u_scale = initial_scale(sol, grid).max(initial.sup_norm());
    let bound = stability_bound(params, grid, u_scale);
    if time.dt > time.safety_factor * bound * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge {
            dt: time.dt,
            bound: time.safety_factor * bound,
        });
    }

    let steps = time.num_steps();
    let direction = time.t_end.signum();
    let limit = BLOWUP_FACTOR * u_scale.max(1.0);
    let mut state = FieldState {
        t: 0.0,
        values: initial.values,
    };
    let mut records = vec![SimulationRecord {
        metrics: error_metrics(&state, sol, grid),
        state: state.clone(),
    }];

    for step in 1..=steps {
        let target = if step == steps {
            time.t_end
        } else {
            direction * time.dt * step as f64
        };
        state = step_rk4(&state, target - state.t, params, grid, sol)?;
        state.t = target;
        if state.sup_norm() > limit {
            return Err(Error::BlowUp { t: state.t });
        }
        if step % record_every == 0 || step == steps {
            records.push(SimulationRecord {
                metrics: error_metrics(&state, sol, grid),
                state: state.clone(),
            });
        }
    }
    Ok(SimulationRun {
        grid: *grid,
        time: *time,
        stability_bound: bound,
        steps,
        records,
    })
}

mod complex_vec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(zs: &[Complex64], ser: S) -> Result<S::Ok, S::Error> {
        let v: Vec<ReIm> = zs.iter().map(|z| ReIm { re: z.re, im: z.im }).collect();
        v.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<ReIm>::deserialize(de)?
            .into_iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect())
    }
}
