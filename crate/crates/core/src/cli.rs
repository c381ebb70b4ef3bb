//! Command-line front end.
//!
//! Every command reads parameters from flags, from a JSON config (`--config`), or both,
//! with flags taking precedence. JSON output always carries `"schema": 1`; errors are
//! written to stderr as `{"schema": 1, "error": {"code": .., "message": ..}}`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    critical_points, monotonicity_report, sweep, velocity_limits, Parameter, Spacing, SweepSpec,
};
use crate::dynamics::{simulate, GridSpec, SimulationRun, TimeSpec};
use crate::error::{Error, Result};
use crate::model::{
    max_relative_residual, PhysicalParameters, SignTriple, TravelingWaveSolution, WaveCoefficients,
};
use crate::reduction::{
    compare_with_printed_system, extract_system, multi_start, CandidateVector, NewtonOptions,
    StartOutcome,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Residual sampling used by `verify`.
pub const VERIFY_XI_RANGE: (f64, f64) = (-20.0, 20.0);
pub const VERIFY_XI_POINTS: usize = 201;
pub const VERIFY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "cbkdv",
    version,
    about = "Closed-form complex solitary waves of the compound Burgers-KdV equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the closed-form coefficients of one branch.
    Solve(Common),
    /// Check ODE residual, algebraic system and amplitude balance of a solution.
    Verify(Common),
    /// Integrate the PDE from the analytic profile and report errors.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// Final time; negative values integrate backward.
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<f64>,
        /// Time step (default: the stability guard times the safety factor).
        #[arg(long)]
        dt: Option<f64>,
        /// Fraction of the stability bound to use.
        #[arg(long)]
        safety: Option<f64>,
        /// Record every n-th step (default: about 20 records per run).
        #[arg(long)]
        record_every: Option<usize>,
        /// Metrics CSV path when `--format csv` writes the trajectory to `--out`.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Extract the algebraic system, compare with the tabulated one, optionally search it.
    System {
        #[command(flatten)]
        common: Common,
        /// Number of Gauss-Newton starts (0 disables the search).
        #[arg(long, default_value_t = 0)]
        starts: usize,
        /// Seed of the start sampler.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Half-width of the start box around the closed-form coefficients.
        #[arg(long, default_value_t = 0.05)]
        half_width: f64,
    },
    /// Sample the velocity and its partials along one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// alpha, beta, mu or s.
        #[arg(long)]
        vary: Option<Parameter>,
        /// lo,hi (for beta, negative values).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        range: Option<Vec<f64>>,
        /// Number of samples (default 101).
        #[arg(long)]
        count: Option<usize>,
        /// Sample spacing (default linear).
        #[arg(long, value_enum)]
        spacing: Option<SpacingArg>,
    },
    /// Write t, x, re_u, im_u of the analytic profile as CSV.
    Profile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        times: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpacingArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coefficient of u u_x.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Coefficient of u^2 u_x; must be negative.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Coefficient of u_xx.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Coefficient of u_xxx; must be positive.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// Sign of the alpha term in kappa. Branch default is 1, -1, -1, 1.
    #[arg(long, allow_hyphen_values = true)]
    eps1: Option<i8>,
    /// Sign of the mu term in kappa.
    #[arg(long, allow_hyphen_values = true)]
    eps2: Option<i8>,
    /// Sign selecting the velocity branch; eps1*eps2*eps3 must be 1.
    #[arg(long, allow_hyphen_values = true)]
    eps3: Option<i8>,
    /// Sign of D1.
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<i8>,
    /// Phase shift x0.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (default json; profile always writes csv).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Add a generation timestamp to JSON output.
    #[arg(long)]
    stamp: bool,
}

#[derive(Debug, Clone, Default, Args)]
struct GridArgs {
    /// x_left,x_right
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    /// Grid spacing.
    #[arg(long)]
    dx: Option<f64>,
}

/// Config file layout. Unknown fields are ignored, so `solve` output can be fed back.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ConfigFile {
    pub schema: Option<u32>,
    pub params: Option<ParamsBlock>,
    pub signs: Option<SignsBlock>,
    /// Explicit coefficients; `verify` checks these instead of the closed form.
    pub coefficients: Option<WaveCoefficients>,
    pub x0: Option<f64>,
    pub grid: Option<GridBlock>,
    pub time: Option<TimeBlock>,
    pub sweep: Option<SweepBlock>,
    pub profile: Option<ProfileBlock>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ParamsBlock {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SignsBlock {
    pub eps1: Option<i8>,
    pub eps2: Option<i8>,
    pub eps3: Option<i8>,
    pub eps: Option<i8>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GridBlock {
    pub x_left: Option<f64>,
    pub x_right: Option<f64>,
    pub dx: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct TimeBlock {
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub safety_factor: Option<f64>,
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SweepBlock {
    pub varying: Option<Parameter>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ProfileBlock {
    pub times: Option<Vec<f64>>,
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    let cfg: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameters(format!("config {}: {e}", path.display())))?;
    if let Some(v) = cfg.schema {
        if v != SCHEMA_VERSION {
            return Err(Error::InvalidParameters(format!(
                "config schema {v} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
    }
    Ok(cfg)
}

/// Flags merged over the config file.
struct Resolved {
    cfg: ConfigFile,
    common: Common,
}

impl Resolved {
    fn new(common: Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(path) => load_config(path)?,
            None => ConfigFile::default(),
        };
        Ok(Self { cfg, common })
    }

    fn params(&self) -> Result<PhysicalParameters> {
        let block = self.cfg.params.clone().unwrap_or_default();
        let pick = |flag: Option<f64>, file: Option<f64>, name: &str| {
            flag.or(file)
                .ok_or_else(|| Error::InvalidParameters(format!("missing --{name}")))
        };
        PhysicalParameters::new(
            pick(self.common.alpha, block.alpha, "alpha")?,
            pick(self.common.beta, block.beta, "beta")?,
            pick(self.common.mu, block.mu, "mu")?,
            pick(self.common.s, block.s, "s")?,
        )
    }

    fn signs(&self) -> Result<SignTriple> {
        let block = self.cfg.signs.clone().unwrap_or_default();
        SignTriple::from_ints(
            self.common.eps1.or(block.eps1).unwrap_or(1),
            self.common.eps2.or(block.eps2).unwrap_or(-1),
            self.common.eps3.or(block.eps3).unwrap_or(-1),
            self.common.eps.or(block.eps).unwrap_or(1),
        )
    }

    fn x0(&self) -> f64 {
        self.common
            .x0
            .or(self.cfg.x0)
            .or(self.cfg.coefficients.map(|c| c.x0))
            .unwrap_or(0.0)
    }

    fn solution(&self) -> Result<TravelingWaveSolution> {
        Ok(TravelingWaveSolution::new(self.params()?, self.signs()?)?.with_x0(self.x0()))
    }

    fn format(&self) -> Format {
        self.common.format.or(self.cfg.format).unwrap_or_default()
    }

    fn out(&self) -> Option<PathBuf> {
        self.common.out.clone().or_else(|| self.cfg.out.clone())
    }

    fn grid(&self, args: &GridArgs, default_dx: f64) -> Result<GridSpec> {
        let block = self.cfg.grid.clone().unwrap_or_default();
        let (lo, hi) = match &args.grid {
            Some(v) if v.len() == 2 => (v[0], v[1]),
            Some(v) => {
                return Err(Error::InvalidParameters(format!(
                    "--grid takes x_left,x_right; got {} values",
                    v.len()
                )))
            }
            None => (block.x_left.unwrap_or(-60.0), block.x_right.unwrap_or(60.0)),
        };
        GridSpec::with_spacing(lo, hi, args.dx.or(block.dx).unwrap_or(default_dx))
    }
}

fn envelope(command: &str, stamp: bool, body: Value) -> Value {
    let mut v = json!({ "schema": SCHEMA_VERSION, "command": command });
    if let (Value::Object(map), Value::Object(extra)) = (&mut v, body) {
        map.extend(extra);
        if stamp {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            map.insert("generated_at_unix".into(), json!(secs));
        }
    }
    v
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

fn coefficients_csv(c: &WaveCoefficients) -> String {
    format!(
        "kappa,b0,b1,c1,re_d1,im_d1,v,x0\n{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
        c.kappa, c.b0, c.b1, c.c1, c.d1.re, c.d1.im, c.v, c.x0
    )
}

/// Writes `t, x, re_u, im_u` rows, t-major then x ascending.
pub fn emit_profile<W: Write + ?Sized>(
    sol: &TravelingWaveSolution,
    grid: &GridSpec,
    times: &[f64],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "t,x,re_u,im_u")?;
    for &t in times {
        for x in grid.coordinates() {
            let u = sol.evaluate(x, t);
            writeln!(out, "{t:e},{x:e},{:e},{:e}", u.re, u.im)?;
        }
    }
    Ok(())
}

/// Same as [`emit_profile`], into a file.
pub fn emit_profile_to_path(
    sol: &TravelingWaveSolution,
    grid: &GridSpec,
    times: &[f64],
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    emit_profile(sol, grid, times, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_trajectory<W: Write + ?Sized>(
    run: &SimulationRun,
    sol: &TravelingWaveSolution,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "t,x,re_u,im_u,re_u_exact,im_u_exact")?;
    for rec in &run.records {
        let t = rec.state.t;
        for (i, u) in rec.state.values.iter().enumerate() {
            let x = run.grid.x(i as isize);
            let exact = sol.evaluate(x, t);
            writeln!(
                out,
                "{t:e},{x:e},{:e},{:e},{:e},{:e}",
                u.re, u.im, exact.re, exact.im
            )?;
        }
    }
    Ok(())
}

fn write_metrics<W: Write + ?Sized>(run: &SimulationRun, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "t,l_inf,l2")?;
    for rec in &run.records {
        let m = rec.metrics;
        writeln!(out, "{:e},{:e},{:e}", m.t, m.l_inf, m.l2)?;
    }
    Ok(())
}

/// Destination for the main output: a file when `--out` is given, else stdout.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let io = |e: std::io::Error, p: &Path| Error::Io(format!("{}: {e}", p.display()));
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io(e, p))?;
            let mut w = BufWriter::new(file);
            f(&mut w).map_err(|e| io(e, p))?;
            w.flush().map_err(|e| io(e, p))
        }
        None => f(stdout).map_err(Error::from),
    }
}

fn write_json(path: Option<&Path>, stdout: &mut dyn Write, v: &Value) -> Result<()> {
    with_output(path, stdout, |w| {
        serde_json::to_writer_pretty(&mut *w, v).map_err(std::io::Error::from)?;
        writeln!(w)
    })
}

fn solution_body(sol: &TravelingWaveSolution) -> Value {
    json!({
        "params": to_value(sol.params()),
        "signs": to_value(sol.signs()),
        "coefficients": to_value(sol.coeffs()),
    })
}

fn cmd_solve(r: &Resolved, stdout: &mut dyn Write) -> Result<i32> {
    let sol = r.solution()?;
    match r.format() {
        Format::Json => write_json(
            r.out().as_deref(),
            stdout,
            &envelope("solve", r.common.stamp, solution_body(&sol)),
        )?,
        Format::Csv => with_output(r.out().as_deref(), stdout, |w| {
            w.write_all(coefficients_csv(sol.coeffs()).as_bytes())
        })?,
    }
    Ok(0)
}

/// Verification summary; `pass` needs all three checks.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub max_relative_ode_residual: f64,
    pub xi_range: (f64, f64),
    pub xi_points: usize,
    pub max_relative_system: f64,
    pub amplitude_quotient: f64,
    pub balanced: bool,
    pub pass: bool,
}

pub fn verify_solution(sol: &TravelingWaveSolution) -> Result<VerifyReport> {
    let c = sol.coeffs();
    let (lo, hi) = VERIFY_XI_RANGE;
    let residual = max_relative_residual(sol.params(), c, lo, hi, VERIFY_XI_POINTS);
    let system =
        extract_system(&CandidateVector::from_coefficients(c), sol.params())?.max_relative();
    let balance = sol.amplitude_balance()?;
    Ok(VerifyReport {
        max_relative_ode_residual: residual,
        xi_range: VERIFY_XI_RANGE,
        xi_points: VERIFY_XI_POINTS,
        max_relative_system: system,
        amplitude_quotient: balance.quotient,
        balanced: balance.balanced,
        pass: residual < VERIFY_TOLERANCE && system < VERIFY_TOLERANCE && balance.balanced,
    })
}

fn cmd_verify(r: &Resolved, stdout: &mut dyn Write) -> Result<i32> {
    let sol = match r.cfg.coefficients {
        Some(c) => TravelingWaveSolution::from_parts(r.params()?, r.signs()?, c.with_x0(r.x0())),
        None => r.solution()?,
    };
    let report = verify_solution(&sol)?;
    let mut body = solution_body(&sol);
    body["verification"] = to_value(&report);
    match r.format() {
        Format::Json => write_json(
            r.out().as_deref(),
            stdout,
            &envelope("verify", r.common.stamp, body),
        )?,
        Format::Csv => {
            with_output(r.out().as_deref(), stdout, |w| {
                writeln!(w, "max_relative_ode_residual,max_relative_system,amplitude_quotient,balanced,pass")?;
                writeln!(
                    w,
                    "{:e},{:e},{:e},{},{}",
                    report.max_relative_ode_residual,
                    report.max_relative_system,
                    report.amplitude_quotient,
                    report.balanced,
                    report.pass
                )
            })?
        }
    }
    Ok(if report.pass { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    r: &Resolved,
    grid_args: &GridArgs,
    t_end: Option<f64>,
    dt: Option<f64>,
    safety: Option<f64>,
    record_every: Option<usize>,
    metrics_out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let sol = r.solution()?;
    let grid = r.grid(grid_args, 0.1)?;
    let block = r.cfg.time.clone().unwrap_or_default();
    let t_end = t_end
        .or(block.t_end)
        .ok_or_else(|| Error::InvalidParameters("simulate needs --t-end".into()))?;
    let safety = safety.or(block.safety_factor).unwrap_or(0.9);
    let time = match dt.or(block.dt) {
        Some(dt) => TimeSpec::new(t_end, dt, safety)?,
        None => TimeSpec::guarded(&sol, &grid, t_end, safety)?,
    };
    let every = record_every
        .or(block.record_every)
        .unwrap_or_else(|| time.num_steps().div_ceil(20).max(1));
    let run = simulate(&sol, &grid, &time, every)?;

    match r.format() {
        Format::Json => {
            let metrics: Vec<_> = run.records.iter().map(|rec| rec.metrics).collect();
            let mut body = solution_body(&sol);
            body["grid"] = to_value(&run.grid);
            body["time"] = to_value(&run.time);
            body["stability_bound"] = json!(run.stability_bound);
            body["steps"] = json!(run.steps);
            body["metrics"] = to_value(&metrics);
            write_json(
                r.out().as_deref(),
                stdout,
                &envelope("simulate", r.common.stamp, body),
            )?;
        }
        Format::Csv => match r.out() {
            Some(path) => {
                with_output(Some(&path), stdout, |w| write_trajectory(&run, &sol, w))?;
                with_output(metrics_out, stdout, |w| write_metrics(&run, w))?;
            }
            None => with_output(metrics_out, stdout, |w| write_metrics(&run, w))?,
        },
    }
    Ok(0)
}

fn outcome_label(o: &StartOutcome) -> &'static str {
    match o {
        StartOutcome::Branch { .. } => "branch",
        StartOutcome::Degenerate { .. } => "degenerate",
        StartOutcome::RealKink { .. } => "real_kink",
        StartOutcome::Unmatched { .. } => "unmatched",
        StartOutcome::Failed { .. } => "failed",
    }
}

fn cmd_system(
    r: &Resolved,
    starts: usize,
    seed: u64,
    half_width: f64,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let params = r.params()?;
    let coeffs = match r.cfg.coefficients {
        Some(c) => c,
        None => *r.solution()?.coeffs(),
    };
    let candidate = CandidateVector::from_coefficients(&coeffs);
    let system = extract_system(&candidate, &params)?;
    let comparison = compare_with_printed_system(&candidate, &params)?;
    let mut body = json!({
        "params": to_value(&params),
        "candidate": to_value(&candidate),
        "system": to_value(&system),
        "max_relative_system": system.max_relative(),
        "printed_comparison": to_value(&comparison),
    });
    if starts > 0 {
        let outcomes = multi_start(
            &params,
            &candidate,
            half_width,
            starts,
            seed,
            &NewtonOptions::default(),
            1e-8,
        );
        let count = |label: &str| {
            outcomes
                .iter()
                .filter(|o| outcome_label(o) == label)
                .count()
        };
        let found: Vec<Value> = outcomes
            .iter()
            .filter_map(|o| match o {
                StartOutcome::Branch { found, signs, .. } => Some(json!({
                    "kind": "branch",
                    "found": to_value(found),
                    "signs": to_value(signs),
                })),
                StartOutcome::RealKink { found, signs, .. } => Some(json!({
                    "kind": "real_kink",
                    "found": to_value(found),
                    "signs": to_value(signs),
                })),
                StartOutcome::Unmatched { found, .. } => Some(json!({
                    "kind": "unmatched",
                    "found": to_value(found),
                })),
                _ => None,
            })
            .collect();
        body["search"] = json!({
            "starts": starts,
            "seed": seed,
            "half_width": half_width,
            "branch": count("branch"),
            "degenerate": count("degenerate"),
            "real_kink": count("real_kink"),
            "unmatched": count("unmatched"),
            "failed": count("failed"),
            "roots": found,
        });
    }
    match r.format() {
        Format::Json => write_json(
            r.out().as_deref(),
            stdout,
            &envelope("system", r.common.stamp, body),
        )?,
        Format::Csv => with_output(r.out().as_deref(), stdout, |w| {
            writeln!(
                w,
                "k,re_p,im_p,monomial_scale,re_printed,im_printed,discrepancy"
            )?;
            for (k, row) in comparison.rows.iter().enumerate() {
                writeln!(
                    w,
                    "{k},{:e},{:e},{:e},{:e},{:e},{:e}",
                    system.p[k].re,
                    system.p[k].im,
                    system.monomial_scale[k],
                    row.printed.re,
                    row.printed.im,
                    row.discrepancy
                )?;
            }
            Ok(())
        })?,
    }
    Ok(0)
}

fn cmd_sweep(
    r: &Resolved,
    vary: Option<Parameter>,
    range: Option<Vec<f64>>,
    count: Option<usize>,
    spacing: Option<SpacingArg>,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let fixed = r.params()?;
    let eps3 = r.signs()?.eps3;
    let block = r.cfg.sweep.clone().unwrap_or_default();
    let varying = vary
        .or(block.varying)
        .ok_or_else(|| Error::InvalidParameters("sweep needs --vary".into()))?;
    let (lo, hi) = match range {
        Some(v) if v.len() == 2 => (v[0], v[1]),
        Some(v) => {
            return Err(Error::InvalidParameters(format!(
                "--range takes lo,hi; got {} values",
                v.len()
            )))
        }
        None => match (block.lo, block.hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(Error::InvalidParameters("sweep needs --range lo,hi".into())),
        },
    };
    let spacing = match spacing {
        Some(SpacingArg::Linear) => Spacing::Linear,
        Some(SpacingArg::Log) => Spacing::Log,
        None => block.spacing.unwrap_or_default(),
    };
    let spec = SweepSpec {
        varying,
        range: (lo, hi),
        count: count.or(block.count).unwrap_or(101),
        fixed,
        eps3,
        spacing,
    };
    let rows = sweep(&spec)?;
    match r.format() {
        Format::Json => {
            let report = monotonicity_report(&spec)?;
            let body = json!({
                "params": to_value(&fixed),
                "eps3": to_value(&eps3),
                "sweep": to_value(&spec),
                "critical_points": to_value(&critical_points(&fixed, eps3)),
                "limits": to_value(&velocity_limits(&fixed, eps3)),
                "monotonicity": to_value(&report),
                "rows": to_value(&rows),
            });
            write_json(
                r.out().as_deref(),
                stdout,
                &envelope("sweep", r.common.stamp, body),
            )?;
        }
        Format::Csv => with_output(r.out().as_deref(), stdout, |w| {
            writeln!(
                w,
                "varying_param,value,v,dv_dalpha,dv_dmu,dv_dabsbeta,dv_ds"
            )?;
            for row in &rows {
                let g = row.gradient;
                writeln!(
                    w,
                    "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                    varying.name(),
                    row.value,
                    row.v,
                    g.dv_dalpha,
                    g.dv_dmu,
                    g.dv_dabsbeta,
                    g.dv_ds
                )?;
            }
            Ok(())
        })?,
    }
    Ok(0)
}

fn cmd_profile(
    r: &Resolved,
    grid_args: &GridArgs,
    times: Option<Vec<f64>>,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let sol = r.solution()?;
    let grid = r.grid(grid_args, 0.5)?;
    let times = times
        .or_else(|| r.cfg.profile.clone().and_then(|p| p.times))
        .unwrap_or_else(|| vec![0.0]);
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameters("times must be finite".into()));
    }
    with_output(r.out().as_deref(), stdout, |w| {
        emit_profile(&sol, &grid, &times, w)
    })?;
    Ok(0)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 3,
        Error::NoConvergence { .. }
        | Error::BlowUp { .. }
        | Error::ConvergedToDegenerate { .. }
        | Error::NonvanishingStrayTerms { .. } => 2,
        _ => 1,
    }
}

fn report_error(e: &Error, stderr: &mut dyn Write) -> i32 {
    let msg = json!({
        "schema": SCHEMA_VERSION,
        "error": { "code": e.code(), "message": e.to_string() },
    });
    let _ = writeln!(stderr, "{msg}");
    exit_code(e)
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run_with_io<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    report_error(&Error::InvalidParameters(e.kind().to_string()), stderr)
                }
            };
        }
    };
    let result = match cli.command {
        Command::Solve(c) => Resolved::new(c).and_then(|r| cmd_solve(&r, stdout)),
        Command::Verify(c) => Resolved::new(c).and_then(|r| cmd_verify(&r, stdout)),
        Command::Simulate {
            common,
            grid,
            t_end,
            dt,
            safety,
            record_every,
            metrics_out,
        } => Resolved::new(common).and_then(|r| {
            cmd_simulate(
                &r,
                &grid,
                t_end,
                dt,
                safety,
                record_every,
                metrics_out.as_deref(),
                stdout,
            )
        }),
        Command::System {
            common,
            starts,
            seed,
            half_width,
        } => Resolved::new(common).and_then(|r| cmd_system(&r, starts, seed, half_width, stdout)),
        Command::Sweep {
            common,
            vary,
            range,
            count,
            spacing,
        } => Resolved::new(common).and_then(|r| cmd_sweep(&r, vary, range, count, spacing, stdout)),
        Command::Profile {
            common,
            grid,
            times,
        } => Resolved::new(common).and_then(|r| cmd_profile(&r, &grid, times, stdout)),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(&e, stderr),
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}
