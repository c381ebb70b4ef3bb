//! Python bindings for the `cbkdv` crate, importable as `cbkdv`.

use cbkdv::analysis::{
    critical_points as core_critical_points, velocity_gradient as core_gradient, VelocityQuery,
};
use cbkdv::cli::verify_solution;
use cbkdv::dynamics::{simulate as core_simulate, GridSpec, TimeSpec};
use cbkdv::model::{max_relative_residual, Sign};
use cbkdv::reduction::{
    extract_system as core_extract_system, multi_start as core_multi_start,
    newton_solve as core_newton, CandidateVector, NewtonOptions, StartOutcome,
};
use cbkdv::{Complex64, Error, PhysicalParameters, SignTriple, TravelingWaveSolution};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(
    cbkdv,
    CbkdvError,
    PyException,
    "Raised for any failure reported by the core library."
);

fn err(e: Error) -> PyErr {
    CbkdvError::new_err(format!("{}: {e}", e.code()))
}

type Candidate = (f64, f64, f64, f64, f64);

fn to_candidate(c: Candidate) -> CandidateVector {
    CandidateVector::new(c.0, c.1, c.2, c.3, c.4)
}

fn tuple(c: &CandidateVector) -> Candidate {
    (c.b0, c.b1, c.c1, c.d1_imag, c.v)
}

fn sign(v: i8) -> PyResult<Sign> {
    Sign::try_from(v).map_err(err)
}

/// Physical coefficients `(alpha, beta, mu, s)` of the PDE; requires `beta < 0 < s`.
#[pyclass(
    frozen,
    skip_from_py_object,
    name = "PhysicalParameters",
    module = "cbkdv"
)]
#[derive(Clone, Copy)]
struct PyParams {
    inner: PhysicalParameters,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(alpha: f64, beta: f64, mu: f64, s: f64) -> PyResult<Self> {
        Ok(Self {
            inner: PhysicalParameters::new(alpha, beta, mu, s).map_err(err)?,
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s()
    }

    #[getter]
    fn kink_scale(&self) -> f64 {
        self.inner.kink_scale()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "PhysicalParameters(alpha={}, beta={}, mu={}, s={})",
            p.alpha(),
            p.beta(),
            p.mu(),
            p.s()
        )
    }
}

/// Closed-form travelling wave for one sign branch.
#[pyclass(
    frozen,
    skip_from_py_object,
    name = "TravelingWaveSolution",
    module = "cbkdv"
)]
#[derive(Clone, Copy)]
struct PySolution {
    inner: TravelingWaveSolution,
}

#[pymethods]
impl PySolution {
    #[new]
    #[pyo3(signature = (params, eps1=1, eps2=-1, eps3=-1, eps=1, x0=0.0))]
    fn new(params: &PyParams, eps1: i8, eps2: i8, eps3: i8, eps: i8, x0: f64) -> PyResult<Self> {
        let signs = SignTriple::new(sign(eps1)?, sign(eps2)?, sign(eps3)?, sign(eps)?);
        let inner = TravelingWaveSolution::new(params.inner, signs)
            .map_err(err)?
            .with_x0(x0);
        Ok(Self { inner })
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams {
            inner: *self.inner.params(),
        }
    }

    /// `(eps1, eps2, eps3, eps)`
    #[getter]
    fn signs(&self) -> (i8, i8, i8, i8) {
        let s = self.inner.signs();
        (
            s.eps1.as_i8(),
            s.eps2.as_i8(),
            s.eps3.as_i8(),
            s.eps.as_i8(),
        )
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.coeffs().kappa
    }

    #[getter]
    fn b0(&self) -> f64 {
        self.inner.coeffs().b0
    }

    #[getter]
    fn b1(&self) -> f64 {
        self.inner.coeffs().b1
    }

    #[getter]
    fn c1(&self) -> f64 {
        self.inner.coeffs().c1
    }

    #[getter]
    fn d1(&self) -> Complex64 {
        self.inner.coeffs().d1
    }

    #[getter]
    fn v(&self) -> f64 {
        self.inner.coeffs().v
    }

    #[getter]
    fn x0(&self) -> f64 {
        self.inner.coeffs().x0
    }

    /// `(b0, b1, c1, Im d1, v)`, the unknowns of the algebraic system.
    fn candidate(&self) -> Candidate {
        tuple(&CandidateVector::from_coefficients(self.inner.coeffs()))
    }

    fn evaluate(&self, x: f64, t: f64) -> Complex64 {
        self.inner.evaluate(x, t)
    }

    fn evaluate_many(&self, xs: Vec<f64>, t: f64) -> Vec<Complex64> {
        xs.into_iter().map(|x| self.inner.evaluate(x, t)).collect()
    }

    /// Relative residual of the reduced ODE at `xi`.
    fn residual(&self, xi: f64) -> f64 {
        self.inner.residual_ode(xi).relative()
    }

    #[pyo3(signature = (lo=-20.0, hi=20.0, points=201))]
    fn max_residual(&self, lo: f64, hi: f64, points: usize) -> f64 {
        max_relative_residual(self.inner.params(), self.inner.coeffs(), lo, hi, points)
    }

    /// `(B1^2 / D1^2, |B1| == |D1|)`
    fn amplitude_balance(&self) -> PyResult<(f64, bool)> {
        let b = self.inner.amplitude_balance().map_err(err)?;
        Ok((b.quotient, b.balanced))
    }

    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = verify_solution(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("max_relative_ode_residual", r.max_relative_ode_residual)?;
        d.set_item("max_relative_system", r.max_relative_system)?;
        d.set_item("amplitude_quotient", r.amplitude_quotient)?;
        d.set_item("balanced", r.balanced)?;
        d.set_item("pass", r.pass)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let c = self.inner.coeffs();
        format!(
            "TravelingWaveSolution(b0={}, b1={}, c1={}, d1={}j, v={}, x0={})",
            c.b0, c.b1, c.c1, c.d1.im, c.v, c.x0
        )
    }
}

/// Residuals `P_0..P_6` of the algebraic system at a candidate `(b0, b1, c1, Im d1, v)`.
#[pyfunction]
fn extract_system<'py>(
    py: Python<'py>,
    params: &PyParams,
    candidate: Candidate,
) -> PyResult<Bound<'py, PyDict>> {
    let sys = core_extract_system(&to_candidate(candidate), &params.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("p", sys.p.to_vec())?;
    d.set_item("monomial_scale", sys.monomial_scale.to_vec())?;
    d.set_item("max_relative", sys.max_relative())?;
    Ok(d)
}

/// Damped Gauss-Newton from `initial`; returns the converged candidate.
#[pyfunction]
#[pyo3(signature = (params, initial, max_iter=200, tol=1e-12))]
fn newton_solve(
    py: Python<'_>,
    params: &PyParams,
    initial: Candidate,
    max_iter: usize,
    tol: f64,
) -> PyResult<Candidate> {
    let p = params.inner;
    py.detach(|| core_newton(&p, &to_candidate(initial), max_iter, tol))
        .map(|c| tuple(&c))
        .map_err(err)
}

/// Seeded multi-start search; returns counts per outcome and the converged roots.
#[pyfunction]
#[pyo3(signature = (params, center, half_width=0.05, starts=200, seed=42))]
fn multi_start<'py>(
    py: Python<'py>,
    params: &PyParams,
    center: Candidate,
    half_width: f64,
    starts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params.inner;
    let outcomes = py.detach(|| {
        core_multi_start(
            &p,
            &to_candidate(center),
            half_width,
            starts,
            seed,
            &NewtonOptions::default(),
            1e-8,
        )
    });
    let d = PyDict::new(py);
    for key in ["branch", "degenerate", "real_kink", "unmatched", "failed"] {
        d.set_item(key, 0usize)?;
    }
    let mut roots = Vec::new();
    for o in &outcomes {
        let (key, found) = match o {
            StartOutcome::Branch { found, .. } => ("branch", Some(found)),
            StartOutcome::Degenerate { .. } => ("degenerate", None),
            StartOutcome::RealKink { found, .. } => ("real_kink", Some(found)),
            StartOutcome::Unmatched { found, .. } => ("unmatched", Some(found)),
            StartOutcome::Failed { .. } => ("failed", None),
        };
        let n: usize = d
            .get_item(key)?
            .map(|v| v.extract())
            .transpose()?
            .unwrap_or(0);
        d.set_item(key, n + 1)?;
        if let Some(f) = found {
            roots.push((key, tuple(f)));
        }
    }
    d.set_item("roots", roots)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (params, eps3=-1))]
fn velocity(params: &PyParams, eps3: i8) -> PyResult<f64> {
    Ok(cbkdv::analysis::velocity(&VelocityQuery::new(
        params.inner,
        sign(eps3)?,
    )))
}

/// Partials of `v` with respect to `alpha`, `mu`, `|beta|` and `s`.
#[pyfunction]
#[pyo3(signature = (params, eps3=-1))]
fn velocity_gradient<'py>(
    py: Python<'py>,
    params: &PyParams,
    eps3: i8,
) -> PyResult<Bound<'py, PyDict>> {
    let g = core_gradient(&VelocityQuery::new(params.inner, sign(eps3)?));
    let d = PyDict::new(py);
    d.set_item("dv_dalpha", g.dv_dalpha)?;
    d.set_item("dv_dmu", g.dv_dmu)?;
    d.set_item("dv_dabsbeta", g.dv_dabsbeta)?;
    d.set_item("dv_ds", g.dv_ds)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (params, eps3=-1))]
fn critical_points<'py>(
    py: Python<'py>,
    params: &PyParams,
    eps3: i8,
) -> PyResult<Bound<'py, PyDict>> {
    let c = core_critical_points(&params.inner, sign(eps3)?);
    let d = PyDict::new(py);
    d.set_item("alpha_v", c.alpha_v)?;
    d.set_item("beta_v", c.beta_v)?;
    d.set_item("beta_v_printed", c.beta_v_printed)?;
    d.set_item("alpha_c", c.alpha_c)?;
    d.set_item("mu_c", c.mu_c)?;
    Ok(d)
}

/// Method-of-lines RK4 run from the analytic profile at `t = 0` to `t_end`.
///
/// A negative `t_end` integrates backward. `dt` defaults to the stability guard.
#[pyfunction]
#[pyo3(signature = (solution, t_end, x_left=-60.0, x_right=60.0, dx=0.1, dt=None, safety=0.9, record_every=None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    solution: &PySolution,
    t_end: f64,
    x_left: f64,
    x_right: f64,
    dx: f64,
    dt: Option<f64>,
    safety: f64,
    record_every: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let sol = solution.inner;
    let grid = GridSpec::with_spacing(x_left, x_right, dx).map_err(err)?;
    let time = match dt {
        Some(dt) => TimeSpec::new(t_end, dt, safety),
        None => TimeSpec::guarded(&sol, &grid, t_end, safety),
    }
    .map_err(err)?;
    let every = record_every.unwrap_or_else(|| time.num_steps().div_ceil(20).max(1));
    let run = py
        .detach(|| core_simulate(&sol, &grid, &time, every))
        .map_err(err)?;

    let d = PyDict::new(py);
    d.set_item("dt", run.time.dt)?;
    d.set_item("steps", run.steps)?;
    d.set_item("stability_bound", run.stability_bound)?;
    d.set_item("x", grid.coordinates())?;
    let metrics: Vec<(f64, f64, f64)> = run
        .records
        .iter()
        .map(|r| (r.metrics.t, r.metrics.l_inf, r.metrics.l2))
        .collect();
    d.set_item("metrics", metrics)?;
    let last = run.records.last().expect("a run always has a record");
    d.set_item("final", last.state.values.clone())?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "cbkdv")]
pub fn cbkdv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CbkdvError", m.py().get_type::<CbkdvError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(extract_system, m)?)?;
    m.add_function(wrap_pyfunction!(newton_solve, m)?)?;
    m.add_function(wrap_pyfunction!(multi_start, m)?)?;
    m.add_function(wrap_pyfunction!(velocity, m)?)?;
    m.add_function(wrap_pyfunction!(velocity_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(critical_points, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
