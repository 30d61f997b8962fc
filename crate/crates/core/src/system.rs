//! Discrete residual of the homotopy system, its exact Jacobian, and the bilinear form
//! used to probe monotonicity.
//!
//! Unknowns are ordered `[u_0 .. u_{N-1}, m_0 .. m_{N-1}]`. The Jacobian is the derivative of
//! the discrete residual itself, built from the same grid operators, so Newton sees the
//! exact linearization.

use std::io::Write;

use crate::error::{MfgError, Result};
use crate::grid::{ScalarField, TorusGrid, VectorField};
use crate::hamiltonian::{CouplingSign, HamiltonianEval, HamiltonianModel, PotentialModel, Vec2};

/// Model data of the homotopy family: the target Hamiltonian and potential at `lambda = 1`,
/// and the congestion exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct MfgProblem {
    hamiltonian: HamiltonianModel,
    potential: PotentialModel,
    alpha: f64,
}

impl MfgProblem {
    pub fn new(hamiltonian: HamiltonianModel, b: ScalarField, sign: CouplingSign, alpha: f64) -> Result<Self> {
        if hamiltonian.grid() != b.grid() {
            return Err(MfgError::GridMismatch);
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(MfgError::InvalidParameter(format!("congestion exponent must be positive, got {alpha}")));
        }
        let potential = PotentialModel::new(b, sign, 1.0)?;
        Ok(Self { hamiltonian, potential, alpha })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.hamiltonian.grid()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.hamiltonian.gamma()
    }

    pub fn sign(&self) -> CouplingSign {
        self.potential.sign()
    }

    pub fn target_hamiltonian(&self) -> &HamiltonianModel {
        &self.hamiltonian
    }

    pub fn with_sign(&self, sign: CouplingSign) -> Self {
        let mut out = self.clone();
        out.potential = PotentialModel::new(self.potential.b().clone(), sign, 1.0).expect("lambda = 1 is valid");
        out
    }

    /// `(H_lambda, V_lambda)`.
    pub fn models_at(&self, lambda: f64) -> Result<(HamiltonianModel, PotentialModel)> {
        Ok((self.hamiltonian.at_lambda(lambda)?, self.potential.at_lambda(lambda)?))
    }

    /// Explicit solution at `lambda = 0`: `m = 1` and the constant `u` balancing `H_0(0) + V_0(1)`.
    /// For the literal sign this is `u = -(1 + pi/4)`.
    pub fn trivial_state(&self) -> Result<MfgState> {
        let grid = *self.grid();
        let (h0, v0) = self.models_at(0.0)?;
        let values = (0..grid.len())
            .map(|k| Ok(-(h0.eval(k, [0.0, 0.0])?.h + v0.eval(k, 1.0)?.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MfgState { u: grid.scalar(values)?, m: grid.constant(1.0), lambda: 0.0 })
    }
}

/// Value function, density, and homotopy parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MfgState {
    pub u: ScalarField,
    pub m: ScalarField,
    pub lambda: f64,
}

impl MfgState {
    pub fn new(u: ScalarField, m: ScalarField, lambda: f64) -> Result<Self> {
        if u.grid() != m.grid() {
            return Err(MfgError::GridMismatch);
        }
        Ok(Self { u, m, lambda })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.u.grid()
    }

    pub fn min_m(&self) -> f64 {
        self.m.min()
    }

    /// Fails unless `min m > 0`.
    pub fn check_positive(&self) -> Result<()> {
        let (index, min) = self.m.argmin();
        if !(min > 0.0) {
            return Err(MfgError::NonPositiveDensity { min, index });
        }
        Ok(())
    }

    /// Stacks `(u, m)` into one vector of length `2N`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.u.values().len());
        out.extend_from_slice(self.u.values());
        out.extend_from_slice(self.m.values());
        out
    }

    /// `self + t * (du, dm)` from a stacked step.
    pub fn stepped(&self, step: &[f64], t: f64) -> MfgState {
        let n = self.u.values().len();
        let mut u = self.u.clone();
        let mut m = self.m.clone();
        for (x, d) in u.values_mut().iter_mut().zip(&step[..n]) {
            *x += t * d;
        }
        for (x, d) in m.values_mut().iter_mut().zip(&step[n..]) {
            *x += t * d;
        }
        MfgState { u, m, lambda: self.lambda }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    pub r_u: ScalarField,
    pub r_m: ScalarField,
}

impl ResidualPair {
    pub fn sup_norm(&self) -> f64 {
        self.r_u.sup_norm().max(self.r_m.sup_norm())
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = self.r_u.values().to_vec();
        out.extend_from_slice(self.r_m.values());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.r_u.values().iter().chain(self.r_m.values()).all(|v| v.is_finite())
    }
}

/// Pointwise coefficients shared by the residual and the Jacobian.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointData {
    pub q: Vec2,
    pub ham: HamiltonianEval,
    pub m: f64,
    pub m_alpha: f64,
    pub v: f64,
    pub dm_v: f64,
}

pub(crate) fn point_data(state: &MfgState, problem: &MfgProblem, du: &VectorField) -> Result<Vec<PointData>> {
    state.check_positive()?;
    if state.grid() != problem.grid() {
        return Err(MfgError::GridMismatch);
    }
    let (ham, pot) = problem.models_at(state.lambda)?;
    let alpha = problem.alpha;
    (0..state.grid().len())
        .map(|k| {
            let m = state.m.values()[k];
            let m_alpha = m.powf(alpha);
            let g = du.at(k);
            let q = [g[0] / m_alpha, g[1] / m_alpha];
            let eval = ham.eval(k, q)?;
            let (v, dm_v) = pot.eval(k, m)?;
            Ok(PointData { q, ham: eval, m, m_alpha, v, dm_v })
        })
        .collect()
}

/// `r_u = u - Δu + m^α H_λ(x, Du/m^α) + V_λ(x, m)`,
/// `r_m = m - Δm - div(D_pH_λ(x, Du/m^α) m) - 1`.
pub fn residual(state: &MfgState, problem: &MfgProblem) -> Result<ResidualPair> {
    let grid = *state.grid();
    let du = state.u.gradient();
    let data = point_data(state, problem, &du)?;
    let lap_u = state.u.laplacian();
    let lap_m = state.m.laplacian();

    let r_u = (0..grid.len())
        .map(|k| state.u.values()[k] - lap_u.values()[k] + data[k].m_alpha * data[k].ham.h + data[k].v)
        .collect();
    let flux =
        VectorField::new(grid, (0..grid.dim()).map(|a| data.iter().map(|d| d.ham.dp_h[a] * d.m).collect()).collect())?;
    let div = flux.divergence();
    let r_m = (0..grid.len()).map(|k| state.m.values()[k] - lap_m.values()[k] - div.values()[k] - 1.0).collect();
    Ok(ResidualPair { r_u: grid.scalar(r_u)?, r_m: grid.scalar(r_m)? })
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SystemMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= dim || t.1 >= dim) {
            return Err(MfgError::InvalidParameter(format!("entry ({r},{c}) outside a {dim}x{dim} matrix")));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { dim, row_ptr, col_idx, values })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, 1.0)).collect()).expect("in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Coordinate text dump, one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> Result<()> {
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Exact Jacobian of [`residual`] at `state`.
pub fn assemble_jacobian(state: &MfgState, problem: &MfgProblem) -> Result<SystemMatrix> {
    let grid = *state.grid();
    let n = grid.len();
    let dim = grid.dim();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let half_inv_h = 0.5 / h;
    let alpha = problem.alpha;
    let data = point_data(state, problem, &state.u.gradient())?;

    let mut t = Vec::with_capacity(n * (8 + 14 * dim * dim));
    for k in 0..n {
        let d = &data[k];
        let (ru, rm) = (k, n + k);

        // identity and -Δ on both blocks
        t.push((ru, k, 1.0 + 2.0 * dim as f64 * inv_h2));
        t.push((rm, n + k, 1.0 + 2.0 * dim as f64 * inv_h2));
        for a in 0..dim {
            for s in [-1isize, 1] {
                let j = grid.shift(k, a, s);
                t.push((ru, j, -inv_h2));
                t.push((rm, n + j, -inv_h2));
                // D_pH . Dv
                t.push((ru, j, s as f64 * half_inv_h * d.ham.dp_h[a]));
            }
        }

        let q_dot_dph: f64 = (0..dim).map(|a| d.q[a] * d.ham.dp_h[a]).sum();
        let coupling = alpha * d.m.powf(alpha - 1.0) * (d.ham.h - q_dot_dph) + d.dm_v;
        t.push((ru, n + k, coupling));

        // -div X with X_j = (D_pH - α D_ppH q) f_j + m^(1-α) D_ppH (Dv)_j
        for a in 0..dim {
            for s in [-1isize, 1] {
                let j = grid.shift(k, a, s);
                let dj = &data[j];
                let c = -(s as f64) * half_inv_h;
                let hq: f64 = (0..dim).map(|b| dj.ham.dpp_h[a][b] * dj.q[b]).sum();
                t.push((rm, n + j, c * (dj.ham.dp_h[a] - alpha * hq)));
                let w = c * dj.m.powf(1.0 - alpha) * half_inv_h;
                for b in 0..dim {
                    let coef = w * dj.ham.dpp_h[a][b];
                    t.push((rm, grid.shift(j, b, 1), coef));
                    t.push((rm, grid.shift(j, b, -1), -coef));
                }
            }
        }
    }
    SystemMatrix::from_triplets(2 * n, t)
}

/// Perturbation `w = (v, f)` of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPair {
    pub v: ScalarField,
    pub f: ScalarField,
}

impl PerturbationPair {
    pub fn new(v: ScalarField, f: ScalarField) -> Result<Self> {
        if v.grid() != f.grid() {
            return Err(MfgError::GridMismatch);
        }
        Ok(Self { v, f })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = self.v.values().to_vec();
        out.extend_from_slice(self.f.values());
        out
    }

    pub fn from_vector(grid: &TorusGrid, x: &[f64]) -> Result<Self> {
        let n = grid.len();
        if x.len() != 2 * n {
            return Err(MfgError::LengthMismatch { expected: 2 * n, got: x.len() });
        }
        Ok(Self { v: grid.scalar(x[..n].to_vec())?, f: grid.scalar(x[n..].to_vec())? })
    }

    /// `<w1, w2>` in the product `L^2` inner product.
    pub fn dot(&self, other: &PerturbationPair) -> f64 {
        self.v.dot(&other.v) + self.f.dot(&other.f)
    }
}

/// `P(v, f) = (f, -v)`.
pub fn apply_swap(w: &PerturbationPair) -> PerturbationPair {
    PerturbationPair { v: w.f.clone(), f: w.v.map(|x| -x) }
}

/// Linearized operator applied to `w` through the assembled matrix.
pub fn jacobian_action(matrix: &SystemMatrix, w: &PerturbationPair) -> Result<PerturbationPair> {
    PerturbationPair::from_vector(w.v.grid(), &matrix.apply(&w.to_vector()))
}

fn forward_difference(f: &ScalarField, axis: usize) -> ScalarField {
    let g = *f.grid();
    let inv_h = 1.0 / g.h();
    let values = (0..g.len()).map(|k| (f.values()[g.shift(k, axis, 1)] - f.values()[k]) * inv_h).collect();
    g.scalar(values).expect("same grid")
}

/// `B[w1, w2] = <L(w1), P w2>`, evaluated in summed-by-parts form:
///
/// ```text
/// <v1,f2> - <f1,v2> + <D+v1, D+f2> - <D+f1, D+v2>
///   + <(α m^(α-1)(H - q.D_pH) + D_mV) f1 + D_pH.Dv1, f2> - <X1, Dv2>
/// ```
///
/// with `X1 = D_pH f1 + m^(1-α) D_ppH Dv1 - α f1 D_ppH q`. No matrix is formed.
pub fn bilinear_form(
    w1: &PerturbationPair,
    w2: &PerturbationPair,
    state: &MfgState,
    problem: &MfgProblem,
) -> Result<f64> {
    let grid = *state.grid();
    if w1.v.grid() != &grid || w2.v.grid() != &grid {
        return Err(MfgError::GridMismatch);
    }
    let dim = grid.dim();
    let alpha = problem.alpha;
    let data = point_data(state, problem, &state.u.gradient())?;
    let dv1 = w1.v.gradient();
    let dv2 = w2.v.gradient();

    let mut total = w1.v.dot(&w2.f) - w1.f.dot(&w2.v);
    for a in 0..dim {
        total += forward_difference(&w1.v, a).dot(&forward_difference(&w2.f, a));
        total -= forward_difference(&w1.f, a).dot(&forward_difference(&w2.v, a));
    }
    let mut pointwise = 0.0;
    for (k, d) in data.iter().enumerate() {
        let f1 = w1.f.values()[k];
        let f2 = w2.f.values()[k];
        let g1 = dv1.at(k);
        let g2 = dv2.at(k);
        let q_dot_dph: f64 = (0..dim).map(|a| d.q[a] * d.ham.dp_h[a]).sum();
        let coupling = alpha * d.m.powf(alpha - 1.0) * (d.ham.h - q_dot_dph) + d.dm_v;
        let transport: f64 = (0..dim).map(|a| d.ham.dp_h[a] * g1[a]).sum();
        pointwise += (coupling * f1 + transport) * f2;
        let scale = d.m.powf(1.0 - alpha);
        for a in 0..dim {
            let hg: f64 = (0..dim).map(|b| d.ham.dpp_h[a][b] * g1[b]).sum();
            let hq: f64 = (0..dim).map(|b| d.ham.dpp_h[a][b] * d.q[b]).sum();
            let x = d.ham.dp_h[a] * f1 + scale * hg - alpha * f1 * hq;
            pointwise -= x * g2[a];
        }
    }
    Ok(total + grid.cell_volume() * pointwise)
}
