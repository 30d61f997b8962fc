//! The `solve`, `audit`, `validate` and `sweep` commands behind the `mfgc` binary.
//!
//! Each command writes human-readable output to `out`, problems to `err`, and returns an
//! [`ExitStatus`]. Argument parsing lives in the binary.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::diagnostics::{all_pass, certify, estimate_suite, monotonicity_spot_check, SuiteOptions, Thresholds};
use crate::grid::ScalarField;
use crate::hamiltonian::{alpha_frontier, audit_assumptions, CouplingSign, SampleBox};
use crate::solver::{continuation_run_with, PathPoint, SolvePath};
use crate::system::MfgState;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 2,
    NonConvergence = 3,
    AuditFailure = 4,
    ValidationFailure = 5,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    pub override_admissibility: bool,
    /// Replaces `output.dir`.
    pub out_dir: Option<PathBuf>,
}

macro_rules! fail {
    ($err:expr, $status:expr, $($arg:tt)*) => {{
        let _ = writeln!($err, $($arg)*);
        return $status;
    }};
}

fn admissibility_gate(cfg: &RunConfig, opts: &CommandOptions, err: &mut dyn Write) -> bool {
    let adm = cfg.admissibility();
    if adm.admissible() {
        return true;
    }
    let forced = opts.override_admissibility || cfg.allow_inadmissible;
    for c in adm.violations() {
        let _ = writeln!(err, "{}: violated {}: {}", if forced { "warning" } else { "error" }, c.name, c.inequality);
    }
    if forced {
        let _ = writeln!(err, "warning: running outside the admissible region, convergence is not expected");
    }
    forced
}

#[derive(Serialize)]
struct StepRecord {
    lambda: f64,
    iterations: usize,
    residual: f64,
    min_m: f64,
    mass: f64,
}

#[derive(Serialize)]
struct PathSummary {
    terminal: &'static str,
    reached_one: bool,
    final_lambda: f64,
    total_iterations: usize,
    rejected_steps: usize,
    gamma: f64,
    alpha: f64,
    dim: usize,
    n: usize,
    sign: String,
    steps: Vec<StepRecord>,
}

impl PathSummary {
    fn new(path: &SolvePath, cfg: &RunConfig) -> Self {
        Self {
            terminal: path.terminal.as_str(),
            reached_one: path.reached_one(),
            final_lambda: path.last().map_or(f64::NAN, |p| p.lambda),
            total_iterations: path.total_iterations(),
            rejected_steps: path.rejected_steps,
            gamma: cfg.gamma,
            alpha: cfg.alpha,
            dim: cfg.dim,
            n: cfg.n,
            sign: cfg.sign.to_string(),
            steps: path
                .points
                .iter()
                .map(|p| StepRecord {
                    lambda: p.lambda,
                    iterations: p.iterations,
                    residual: p.residual,
                    min_m: p.min_m,
                    mass: p.mass,
                })
                .collect(),
        }
    }
}

/// Outcome of one solve, used by `solve` and by every `sweep` row.
#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub reached_one: bool,
    pub iters_total: usize,
    pub min_m: f64,
    pub energy_residual: f64,
}

fn write_field(path: &Path, field: &ScalarField) -> crate::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    field.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_profile(path: &Path, state: &MfgState) -> crate::Result<()> {
    let grid = state.grid();
    let mut w = BufWriter::new(File::create(path)?);
    if grid.dim() == 1 {
        writeln!(w, "x,u,m")?;
    } else {
        writeln!(w, "x,y,u,m")?;
    }
    for k in 0..grid.len() {
        let x = grid.coords(k);
        for c in &x[..grid.dim()] {
            write!(w, "{c:.16e},")?;
        }
        writeln!(w, "{:.16e},{:.16e}", state.u.values()[k], state.m.values()[k])?;
    }
    w.flush()?;
    Ok(())
}

fn write_path_plot(path: &Path, points: &[PathPoint]) -> crate::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "lambda,iters,min_m")?;
    for p in points {
        writeln!(w, "{:.16e},{},{:.16e}", p.lambda, p.iterations, p.min_m)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the continuation and writes every configured output into `dir`.
fn run_solve(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> crate::Result<SolveSummary> {
    let problem = cfg.build_problem()?;
    fs::create_dir_all(dir)?;
    let mut log = BufWriter::new(File::create(dir.join("progress.log"))?);
    let mut io_error = None;
    let path = continuation_run_with(&problem, &cfg.newton, &cfg.continuation, |p| {
        let line = p.progress_line();
        if let Err(e) = writeln!(log, "{line}").and_then(|_| writeln!(out, "{line}")) {
            io_error.get_or_insert(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    log.flush()?;

    let summary_json = crate::json::to_string(&PathSummary::new(&path, cfg))?;
    if cfg.wants(OutputFormat::Json) {
        fs::write(dir.join("path.json"), &summary_json)?;
    }
    if cfg.wants(OutputFormat::Plot) {
        write_path_plot(&dir.join("path_plot.csv"), &path.points)?;
    }
    let Some(last) = path.last() else {
        return Ok(SolveSummary { reached_one: false, iters_total: 0, min_m: f64::NAN, energy_residual: f64::NAN });
    };
    if cfg.wants(OutputFormat::Csv) {
        write_field(&dir.join("u.csv"), &last.state.u)?;
        write_field(&dir.join("m.csv"), &last.state.m)?;
    }
    if cfg.wants(OutputFormat::Plot) {
        write_profile(&dir.join("profile.csv"), &last.state)?;
    }
    let report = estimate_suite(&last.state, &problem, &SuiteOptions::default())?;
    if cfg.wants(OutputFormat::Json) {
        fs::write(dir.join("diagnostics.json"), report.to_json()?)?;
    }
    Ok(SolveSummary {
        reached_one: path.reached_one(),
        iters_total: path.total_iterations(),
        min_m: path.points.iter().map(|p| p.min_m).fold(f64::INFINITY, f64::min),
        energy_residual: report.energy_identity_residual,
    })
}

pub fn cmd_solve(cfg: &RunConfig, opts: &CommandOptions, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    if !admissibility_gate(cfg, opts, err) {
        return ExitStatus::InputError;
    }
    let dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match run_solve(cfg, &dir, out) {
        Ok(s) if s.reached_one => {
            let _ = writeln!(
                out,
                "reached lambda = 1 in {} Newton iterations; outputs in {}",
                s.iters_total,
                dir.display()
            );
            ExitStatus::Success
        }
        Ok(_) => fail!(
            err,
            ExitStatus::NonConvergence,
            "error: continuation stopped before lambda = 1; see {}",
            dir.join("progress.log").display()
        ),
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    }
}

pub fn cmd_audit(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let problem = match cfg.build_problem() {
        Ok(p) => p,
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    };
    let report = match audit_assumptions(problem.target_hamiltonian(), cfg.alpha, &SampleBox::for_dim(cfg.dim)) {
        Ok(r) => r,
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    };
    let adm = cfg.admissibility();
    let _ = writeln!(out, "hamiltonian {} gamma={} alpha={} d={}", report.kind, cfg.gamma, cfg.alpha, cfg.dim);
    for line in &report.lines {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "inf alpha_tilde = {:.6e} (4/gamma = {:.6e})", report.alpha_tilde_inf, 4.0 / cfg.gamma);
    for c in &adm.conditions {
        let _ = writeln!(out, "{c}");
    }
    if report.all_hold() && adm.admissible() {
        let _ = writeln!(out, "audit: pass");
        ExitStatus::Success
    } else {
        let failed: Vec<&str> =
            report.lines.iter().filter(|l| !l.holds).map(|l| l.name).chain(adm.violations().map(|c| c.name)).collect();
        let _ = writeln!(out, "audit: FAIL ({})", failed.join(", "));
        ExitStatus::AuditFailure
    }
}

fn read_field(path: &Path) -> crate::Result<ScalarField> {
    ScalarField::read_csv(BufReader::new(File::open(path)?))
}

pub fn cmd_validate(fields_dir: &Path, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let (u, m) = match (read_field(&fields_dir.join("u.csv")), read_field(&fields_dir.join("m.csv"))) {
        (Ok(u), Ok(m)) => (u, m),
        (Err(e), _) => fail!(err, ExitStatus::InputError, "error: u.csv: {e}"),
        (_, Err(e)) => fail!(err, ExitStatus::InputError, "error: m.csv: {e}"),
    };
    if u.grid() != m.grid() || *u.grid() != cfg.grid() {
        fail!(
            err,
            ExitStatus::InputError,
            "error: field grids (d={}, n={}) and (d={}, n={}) do not match the config (d={}, n={})",
            u.grid().dim(),
            u.grid().n(),
            m.grid().dim(),
            m.grid().n(),
            cfg.dim,
            cfg.n
        );
    }
    let state = MfgState { u, m, lambda: 1.0 };
    if let Err(e) = state.check_positive() {
        fail!(err, ExitStatus::InputError, "error: positivity precondition failed: {e}");
    }
    let problem = match cfg.build_problem() {
        Ok(p) => p,
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    };
    let report = match estimate_suite(&state, &problem, &SuiteOptions::default()) {
        Ok(r) => r,
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    };
    let spot = if cfg.sign == CouplingSign::Monotone {
        match monotonicity_spot_check(&state, &problem, 20, 0) {
            Ok(s) => Some(s),
            Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
        }
    } else {
        None
    };
    let thresholds = Thresholds { min_m_floor: cfg.newton.min_m_floor, ..Thresholds::default() };
    let verdicts = certify(&report, &thresholds, spot.as_ref());
    match report.to_json() {
        Ok(json) => {
            let _ = write!(out, "{json}");
        }
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    }
    for v in &verdicts {
        let _ = writeln!(out, "{v}");
    }
    if all_pass(&verdicts) {
        ExitStatus::Success
    } else {
        ExitStatus::ValidationFailure
    }
}

fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    gammas: &[f64],
    alphas: &[f64],
    opts: &CommandOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    if gammas.is_empty() || alphas.is_empty() {
        fail!(err, ExitStatus::InputError, "error: sweep needs non-empty gamma and alpha lists");
    }
    let dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let result = (|| -> crate::Result<()> {
        fs::create_dir_all(&dir)?;
        let mut table = BufWriter::new(File::create(dir.join("sweep.csv"))?);
        writeln!(table, "gamma,alpha,admissible,reached_one,iters_total,min_m,energy_residual")?;
        for &gamma in gammas {
            for &alpha in alphas {
                let run = RunConfig { gamma, alpha, ..cfg.clone() };
                let admissible = run.admissibility().admissible();
                let attempt = admissible || opts.override_admissibility || cfg.allow_inadmissible;
                let summary = if attempt {
                    let sub = dir.join(format!("gamma_{gamma}_alpha_{alpha}"));
                    match run_solve(&run, &sub, &mut std::io::sink()) {
                        Ok(s) => Some(s),
                        Err(e) => {
                            let _ = writeln!(err, "gamma={gamma} alpha={alpha}: {e}");
                            None
                        }
                    }
                } else {
                    None
                };
                let s = summary.unwrap_or(SolveSummary {
                    reached_one: false,
                    iters_total: 0,
                    min_m: f64::NAN,
                    energy_residual: f64::NAN,
                });
                writeln!(
                    table,
                    "{gamma},{alpha},{admissible},{},{},{},{}",
                    s.reached_one,
                    s.iters_total,
                    csv_f64(s.min_m),
                    csv_f64(s.energy_residual)
                )?;
                let _ = writeln!(
                    out,
                    "gamma={gamma} alpha={alpha} admissible={admissible} attempted={attempt} reached_one={}",
                    s.reached_one
                );
            }
        }
        table.flush()?;
        let mut frontier = BufWriter::new(File::create(dir.join("frontier.csv"))?);
        writeln!(frontier, "gamma,alpha_sup")?;
        for i in 1..100 {
            let gamma = 1.0 + i as f64 / 100.0;
            writeln!(frontier, "{gamma},{:.16e}", alpha_frontier(gamma, cfg.dim))?;
        }
        frontier.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => ExitStatus::Success,
        Err(e) => fail!(err, ExitStatus::InputError, "error: {e}"),
    }
}
