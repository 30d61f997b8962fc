//! Uniform periodic lattice on the unit torus and its finite-difference calculus.
//!
//! Points are stored row-major: in two dimensions the index is `k = i * n + j`
//! with `x = i h` (axis 0) and `y = j h` (axis 1). The discrete inner product is
//! the rectangle rule `<f, g> = h^d sum f_k g_k`, under which [`VectorField::divergence`]
//! is the exact negative adjoint of [`ScalarField::gradient`].

use std::io::{BufRead, Write};

use crate::error::{MfgError, Result};

pub const MIN_POINTS_PER_AXIS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    h: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(MfgError::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < MIN_POINTS_PER_AXIS {
            return Err(MfgError::InvalidGrid(format!("need at least {MIN_POINTS_PER_AXIS} points per axis, got {n}")));
        }
        Ok(Self { dim, n, h: 1.0 / n as f64 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    fn stride(&self, axis: usize) -> usize {
        if self.dim == 2 && axis == 0 {
            self.n
        } else {
            1
        }
    }

    /// Per-axis integer coordinates of point `k`.
    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        if self.dim == 1 {
            [k, 0]
        } else {
            [k / self.n, k % self.n]
        }
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(k);
        [i as f64 * self.h, j as f64 * self.h]
    }

    /// Index of the point `offset` steps away from `k` along `axis`, wrapping periodically.
    pub fn shift(&self, k: usize, axis: usize, offset: isize) -> usize {
        let idx = self.multi_index(k);
        let n = self.n as isize;
        let moved = (idx[axis] as isize + offset).rem_euclid(n) as usize;
        k - idx[axis] * self.stride(axis) + moved * self.stride(axis)
    }

    pub fn scalar(&self, values: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(*self, values)
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField { grid: *self, values: vec![c; self.len()] }
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
        let values = (0..self.len()).map(|k| f(self.coords(k))).collect();
        ScalarField { grid: *self, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MfgError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { grid: self.grid, values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index and value of the smallest entry.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Central differences with periodic wrap, `(f_{k+1} - f_{k-1}) / 2h` per axis.
    pub fn gradient(&self) -> VectorField {
        let g = self.grid;
        let scale = 0.5 / g.h;
        let components = (0..g.dim)
            .map(|axis| {
                (0..g.len())
                    .map(|k| (self.values[g.shift(k, axis, 1)] - self.values[g.shift(k, axis, -1)]) * scale)
                    .collect()
            })
            .collect();
        VectorField { grid: g, components }
    }

    /// Fourth-order central gradient. Used only as a reference derivative when measuring
    /// consistency of identities that the second-order operators satisfy exactly.
    pub fn gradient_fourth_order(&self) -> VectorField {
        let g = self.grid;
        let scale = 1.0 / (12.0 * g.h);
        let f = &self.values;
        let components = (0..g.dim)
            .map(|axis| {
                (0..g.len())
                    .map(|k| {
                        (8.0 * (f[g.shift(k, axis, 1)] - f[g.shift(k, axis, -1)])
                            - (f[g.shift(k, axis, 2)] - f[g.shift(k, axis, -2)]))
                            * scale
                    })
                    .collect()
            })
            .collect();
        VectorField { grid: g, components }
    }

    /// Compact `(2d+1)`-point periodic Laplacian.
    pub fn laplacian(&self) -> ScalarField {
        let g = self.grid;
        let inv_h2 = 1.0 / (g.h * g.h);
        let f = &self.values;
        let values = (0..g.len())
            .map(|k| {
                (0..g.dim).map(|axis| ((f[g.shift(k, axis, 1)] + f[g.shift(k, axis, -1)]) - 2.0 * f[k]) * inv_h2).sum()
            })
            .collect();
        ScalarField { grid: g, values }
    }

    /// Rectangle rule `h^d sum f_k`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// Discrete `L^2` inner product.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `(integral |f|^p)^(1/p)`; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(MfgError::InvalidParameter(format!("L^p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        let integral = self.map(|v| v.abs().powf(p)).integrate();
        Ok(integral.powf(1.0 / p))
    }

    /// Writes `x[,y],value` rows in point order with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = self.grid;
        if g.dim == 1 {
            writeln!(out, "x,value")?;
        } else {
            writeln!(out, "x,y,value")?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let [x, y] = g.coords(k);
            if g.dim == 1 {
                writeln!(out, "{x:.16e},{v:.16e}")?;
            } else {
                writeln!(out, "{x:.16e},{y:.16e},{v:.16e}")?;
            }
        }
        Ok(())
    }

    /// Reads a field written by [`ScalarField::write_csv`]. The grid is inferred from the
    /// header and the row count; coordinates must match the lattice.
    pub fn read_csv<R: BufRead>(input: R) -> Result<ScalarField> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| MfgError::FieldFormat("empty file".into()))??;
        let dim = match header.trim() {
            "x,value" => 1,
            "x,y,value" => 2,
            other => return Err(MfgError::FieldFormat(format!("unrecognized header `{other}`"))),
        };
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = parsed.map_err(|e| MfgError::FieldFormat(format!("line {}: {e}", lineno + 2)))?;
            if row.len() != dim + 1 {
                return Err(MfgError::FieldFormat(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 2,
                    dim + 1,
                    row.len()
                )));
            }
            coords.push([row[0], if dim == 2 { row[1] } else { 0.0 }]);
            values.push(row[dim]);
        }
        let n = if dim == 1 {
            values.len()
        } else {
            let n = (values.len() as f64).sqrt().round() as usize;
            if n * n != values.len() {
                return Err(MfgError::FieldFormat(format!("{} rows is not a square grid", values.len())));
            }
            n
        };
        let grid = TorusGrid::new(dim, n).map_err(|e| MfgError::FieldFormat(e.to_string()))?;
        for (k, c) in coords.iter().enumerate() {
            let expected = grid.coords(k);
            if (c[0] - expected[0]).abs() > 1e-12 || (c[1] - expected[1]).abs() > 1e-12 {
                return Err(MfgError::FieldFormat(format!(
                    "row {} has coordinates {:?}, expected {:?}",
                    k + 2,
                    &c[..dim],
                    &expected[..dim]
                )));
            }
        }
        ScalarField::new(grid, values)
    }
}

/// `R^d`-valued samples, stored as one component array per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(MfgError::InvalidParameter(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(MfgError::LengthMismatch { expected: grid.len(), got: c.len() });
            }
        }
        Ok(Self { grid, components })
    }

    pub fn constant(grid: TorusGrid, value: [f64; 2]) -> Self {
        let components = (0..grid.dim()).map(|a| vec![value[a]; grid.len()]).collect();
        Self { grid, components }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// Value at point `k`, padded with zero beyond the grid dimension.
    pub fn at(&self, k: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (a, c) in self.components.iter().enumerate() {
            out[a] = c[k];
        }
        out
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let values =
            (0..self.grid.len()).map(|k| self.components.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt()).collect();
        ScalarField { grid: self.grid, values }
    }

    pub fn sup_norm(&self) -> f64 {
        self.magnitude().sup_norm()
    }

    /// Central divergence `sum_a (g_{k+e_a} - g_{k-e_a}) / 2h`, the negative adjoint of
    /// [`ScalarField::gradient`].
    pub fn divergence(&self) -> ScalarField {
        let g = self.grid;
        let scale = 0.5 / g.h;
        let values = (0..g.len())
            .map(|k| {
                self.components
                    .iter()
                    .enumerate()
                    .map(|(axis, c)| (c[g.shift(k, axis, 1)] - c[g.shift(k, axis, -1)]) * scale)
                    .sum()
            })
            .collect();
        ScalarField { grid: g, values }
    }

    /// Discrete `L^2` inner product of vector fields.
    pub fn dot(&self, other: &VectorField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: f64 = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        self.grid.cell_volume() * s
    }
}
