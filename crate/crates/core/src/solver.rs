//! Damped Newton corrector and the lambda-continuation driver.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use thiserror::Error;

use crate::error::MfgError;
use crate::system::{assemble_jacobian, residual, MfgProblem, MfgState, SystemMatrix};

const BACKWARD_ERROR_TOL: f64 = 1e-10;

/// Solves `matrix * x = rhs` by sparse LU with partial pivoting and one refinement step.
///
/// Fails with [`MfgError::Singular`] when the factorization breaks down or the relative
/// backward error `|Ax - b|_inf / |b|_inf` stays above `1e-10`.
pub fn solve_direct(matrix: &SystemMatrix, rhs: &[f64]) -> Result<Vec<f64>, MfgError> {
    let n = matrix.dim();
    if rhs.len() != n {
        return Err(MfgError::LengthMismatch { expected: n, got: rhs.len() });
    }
    if !matrix.is_finite() {
        return Err(MfgError::Singular("matrix has non-finite entries".into()));
    }
    let rhs_norm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = matrix.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let sparse = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| MfgError::Singular(format!("{e:?}")))?;
    // faer panics on an exactly zero numeric pivot instead of returning an error.
    let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| sparse.sp_lu()))
        .map_err(|_| MfgError::Singular("zero pivot in sparse LU".into()))?
        .map_err(|e| MfgError::Singular(format!("{e:?}")))?;

    let solve = |b: &[f64]| -> Vec<f64> {
        let col = Mat::from_fn(n, 1, |i, _| b[i]);
        let x = lu.solve(&col);
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    let backward = |x: &[f64]| -> (Vec<f64>, f64) {
        let ax = matrix.apply(x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let err = r.iter().fold(0.0f64, |a, v| a.max(v.abs())) / rhs_norm;
        (r, err)
    };

    let mut x = solve(rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MfgError::Singular("factorization produced non-finite solution".into()));
    }
    let (r, _) = backward(&x);
    let dx = solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    let (_, err) = backward(&x);
    if !(err < BACKWARD_ERROR_TOL) || x.iter().any(|v| !v.is_finite()) {
        return Err(MfgError::Singular(format!("backward error {err:e} after refinement")));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Sup-norm residual target.
    pub tol_residual: f64,
    pub max_iters: usize,
    pub min_m_floor: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol_residual: 1e-10, max_iters: 30, min_m_floor: 1e-8, backtrack_factor: 0.5, max_backtracks: 25 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol_residual > 0.0 && self.min_m_floor > 0.0) {
            return Err("newton tolerance and density floor must be positive".into());
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(format!("backtrack factor must lie in (0,1), got {}", self.backtrack_factor));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 {
            return Err("iteration caps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error("initial min m = {min_m:e} is not above the floor {floor:e}")]
    Precondition { min_m: f64, floor: f64 },

    #[error("newton did not converge: {reason} after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64, reason: &'static str },

    #[error("linear solve failed at iteration {iteration}: {source}")]
    Singular { iteration: usize, source: MfgError },

    #[error(transparent)]
    Model(#[from] MfgError),
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: MfgState,
    pub iterations: usize,
    /// Sup-norm residual before the first and after every iteration.
    pub residual_history: Vec<f64>,
}

impl NewtonOutcome {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history starts with the initial residual")
    }
}

/// Newton iteration for the system at `lambda`, starting from `init`.
///
/// Each step solves `J d = -F` and backtracks `t = 1, b, b^2, ...` until the density stays
/// above `max(floor, 0.1 min m)` and the sup-norm residual decreases.
pub fn newton_solve(
    init: &MfgState,
    lambda: f64,
    problem: &MfgProblem,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome, NewtonError> {
    cfg.validate().map_err(MfgError::InvalidParameter)?;
    let min_m = init.min_m();
    if !(min_m > cfg.min_m_floor) {
        return Err(NewtonError::Precondition { min_m, floor: cfg.min_m_floor });
    }
    let mut state = MfgState { lambda, ..init.clone() };
    let mut res = residual(&state, problem)?;
    let mut norm = res.sup_norm();
    let mut history = vec![norm];

    for iteration in 0.. {
        if norm < cfg.tol_residual {
            return Ok(NewtonOutcome { state, iterations: iteration, residual_history: history });
        }
        if iteration == cfg.max_iters {
            return Err(NewtonError::Divergence {
                iterations: iteration,
                residual: norm,
                reason: "iteration cap reached",
            });
        }
        if !res.is_finite() {
            return Err(NewtonError::Divergence {
                iterations: iteration,
                residual: norm,
                reason: "non-finite residual",
            });
        }
        let jac = assemble_jacobian(&state, problem)?;
        let rhs: Vec<f64> = res.to_vector().iter().map(|v| -v).collect();
        let step = solve_direct(&jac, &rhs).map_err(|source| NewtonError::Singular { iteration, source })?;

        let floor = cfg.min_m_floor.max(0.1 * state.min_m());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let candidate = state.stepped(&step, t);
            if candidate.min_m() > floor {
                if let Ok(r) = residual(&candidate, problem) {
                    let n = r.sup_norm();
                    if n < norm {
                        accepted = Some((candidate, r, n));
                        break;
                    }
                }
            }
            t *= cfg.backtrack_factor;
        }
        let Some((candidate, r, n)) = accepted else {
            return Err(NewtonError::Divergence {
                iterations: iteration + 1,
                residual: norm,
                reason: "line search exhausted",
            });
        };
        state = candidate;
        res = r;
        norm = n;
        history.push(norm);
    }
    unreachable!("loop returns")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationConfig {
    pub lambda_step_init: f64,
    pub lambda_step_min: f64,
    pub grow_factor: f64,
    pub shrink_factor: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self { lambda_step_init: 0.1, lambda_step_min: 1e-4, grow_factor: 1.5, shrink_factor: 0.5 }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda_step_min > 0.0
            && self.lambda_step_min <= self.lambda_step_init
            && self.lambda_step_init <= 1.0)
        {
            return Err("continuation steps need 0 < step_min <= step_init <= 1".into());
        }
        if !(self.grow_factor >= 1.0) {
            return Err(format!("grow factor must be >= 1, got {}", self.grow_factor));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(format!("shrink factor must lie in (0,1), got {}", self.shrink_factor));
        }
        Ok(())
    }
}

/// How a continuation run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    ReachedOne,
    StepUnderflow,
    NewtonDivergence,
}

impl Terminal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Terminal::ReachedOne => "reached_one",
            Terminal::StepUnderflow => "step_underflow",
            Terminal::NewtonDivergence => "newton_divergence",
        }
    }
}

/// One accepted continuation state.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub state: MfgState,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub min_m: f64,
    pub mass: f64,
}

impl PathPoint {
    fn from_outcome(outcome: NewtonOutcome) -> Self {
        let min_m = outcome.state.min_m();
        let mass = outcome.state.m.integrate();
        Self {
            lambda: outcome.state.lambda,
            residual: outcome.final_residual(),
            iterations: outcome.iterations,
            residual_history: outcome.residual_history,
            state: outcome.state,
            min_m,
            mass,
        }
    }

    /// `lambda=<v> iters=<k> residual=<r> min_m=<v>`
    pub fn progress_line(&self) -> String {
        format!(
            "lambda={:?} iters={} residual={:e} min_m={:?}",
            self.lambda, self.iterations, self.residual, self.min_m
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolvePath {
    pub points: Vec<PathPoint>,
    pub terminal: Terminal,
    /// Corrector attempts that were rejected and retried with a smaller step.
    pub rejected_steps: usize,
}

impl SolvePath {
    pub fn reached_one(&self) -> bool {
        self.terminal == Terminal::ReachedOne
    }

    pub fn last(&self) -> Option<&PathPoint> {
        self.points.last()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.points.iter().map(|p| p.iterations).sum()
    }
}

/// Continuation from the explicit `lambda = 0` solution to `lambda = 1`.
///
/// The caller is expected to have checked parameter admissibility.
pub fn continuation_run(problem: &MfgProblem, newton: &NewtonConfig, cont: &ContinuationConfig) -> SolvePath {
    continuation_run_with(problem, newton, cont, |_| {})
}

/// [`continuation_run`] with a callback on every accepted state.
pub fn continuation_run_with(
    problem: &MfgProblem,
    newton: &NewtonConfig,
    cont: &ContinuationConfig,
    mut on_step: impl FnMut(&PathPoint),
) -> SolvePath {
    let mut path = SolvePath { points: Vec::new(), terminal: Terminal::NewtonDivergence, rejected_steps: 0 };
    if cont.validate().is_err() {
        return path;
    }
    let start = match problem.trivial_state() {
        Ok(s) => s,
        Err(_) => return path,
    };
    let first = match newton_solve(&start, 0.0, problem, newton) {
        Ok(o) => PathPoint::from_outcome(o),
        Err(_) => return path,
    };
    on_step(&first);
    path.points.push(first);

    let mut lambda = 0.0;
    let mut step = cont.lambda_step_init;
    loop {
        let target = if lambda + step >= 1.0 - 1e-12 { 1.0 } else { lambda + step };
        let previous = &path.points.last().expect("path is non-empty").state;
        match newton_solve(previous, target, problem, newton) {
            Ok(outcome) => {
                let point = PathPoint::from_outcome(outcome);
                if point.iterations <= 4 {
                    step *= cont.grow_factor;
                }
                lambda = target;
                on_step(&point);
                path.points.push(point);
                if lambda == 1.0 {
                    path.terminal = Terminal::ReachedOne;
                    return path;
                }
                step = step.min(1.0 - lambda);
            }
            Err(_) => {
                path.rejected_steps += 1;
                step *= cont.shrink_factor;
                if step < cont.lambda_step_min {
                    path.terminal = Terminal::StepUnderflow;
                    return path;
                }
            }
        }
    }
}
