//! Hamiltonians and potentials of the congestion model.
//!
//! The example Hamiltonian is the Legendre transform of `L(x,v) = a(x)(1+|v|^2)^(g'/2)`.
//! It has no closed form; each evaluation inverts the scalar optimality relation
//! `|p| = g' a s (1+s^2)^(g'/2-1)` for the optimal speed `s` and then assembles `H`,
//! `D_pH = -v` and `D_ppH = (D_vvL)^-1` in closed form.
//!
//! Momenta are `[f64; 2]`; in one dimension the second component is zero and ignored.

mod admissibility;
mod audit;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub use admissibility::{alpha_frontier, check_parameter_admissibility, Admissibility, ConditionCheck};
pub use audit::{audit_assumptions, AssumptionLine, AssumptionReport, SampleBox};

use crate::error::{MfgError, Result};
use crate::grid::{ScalarField, TorusGrid};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

const SPEED_TOL: f64 = 1e-12;
const SPEED_MAX_ITERS: usize = 200;

/// Spatial coefficient presets for `a(x)` and `b(x)`, or an inline Fourier series in `x_1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    /// Constant 1.
    One,
    /// `1 + 0.5 sin(2 pi x_1)`.
    SinBump,
    /// `0.5 cos(2 pi x_1)`.
    CosBump,
    /// `c0 + sum_k (a_k cos(2 pi k x_1) + b_k sin(2 pi k x_1))`.
    Fourier { constant: f64, modes: Vec<(f64, f64)> },
}

impl Coefficient {
    pub fn eval(&self, x: Vec2) -> f64 {
        let t = 2.0 * PI * x[0];
        match self {
            Coefficient::One => 1.0,
            Coefficient::SinBump => 1.0 + 0.5 * t.sin(),
            Coefficient::CosBump => 0.5 * t.cos(),
            Coefficient::Fourier { constant, modes } => {
                constant
                    + modes
                        .iter()
                        .enumerate()
                        .map(|(i, (c, s))| {
                            let kt = (i + 1) as f64 * t;
                            c * kt.cos() + s * kt.sin()
                        })
                        .sum::<f64>()
            }
        }
    }

    pub fn sample(&self, grid: &TorusGrid) -> ScalarField {
        grid.sample(|x| self.eval(x))
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::One => write!(f, "one"),
            Coefficient::SinBump => write!(f, "sin_bump"),
            Coefficient::CosBump => write!(f, "cos_bump"),
            Coefficient::Fourier { constant, modes } => {
                write!(f, "fourier:{constant:?}")?;
                for (c, s) in modes {
                    write!(f, ";{c:?},{s:?}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Coefficient {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "one" => Ok(Coefficient::One),
            "sin_bump" => Ok(Coefficient::SinBump),
            "cos_bump" => Ok(Coefficient::CosBump),
            other => {
                let body = other.strip_prefix("fourier:").ok_or_else(|| {
                    format!("unknown coefficient `{other}` (expected one, sin_bump, cos_bump or fourier:c0;a1,b1;...)")
                })?;
                let mut parts = body.split(';');
                let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
                let constant = num(parts.next().unwrap_or(""))?;
                let modes = parts
                    .map(|pair| {
                        let (c, s) = pair.split_once(',').ok_or_else(|| format!("mode `{pair}` must be `cos,sin`"))?;
                        Ok((num(c)?, num(s)?))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                Ok(Coefficient::Fourier { constant, modes })
            }
        }
    }
}

/// Value and derivatives of a Hamiltonian at one `(x, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianEval {
    pub h: f64,
    pub dp_h: Vec2,
    pub dpp_h: Mat2,
    /// Optimal velocity `-D_pH` (zero for the power base).
    pub v_opt: Vec2,
    /// `|v_opt|`.
    pub s_opt: f64,
}

impl HamiltonianEval {
    /// `lambda * self + (1 - lambda) * other`, componentwise.
    pub fn blend(&self, other: &HamiltonianEval, lambda: f64) -> HamiltonianEval {
        let mix = |a: f64, b: f64| lambda * a + (1.0 - lambda) * b;
        let dp_h = [mix(self.dp_h[0], other.dp_h[0]), mix(self.dp_h[1], other.dp_h[1])];
        let mut dpp_h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                dpp_h[i][j] = mix(self.dpp_h[i][j], other.dpp_h[i][j]);
            }
        }
        HamiltonianEval {
            h: mix(self.h, other.h),
            dp_h,
            dpp_h,
            v_opt: [-dp_h[0], -dp_h[1]],
            s_opt: (dp_h[0] * dp_h[0] + dp_h[1] * dp_h[1]).sqrt(),
        }
    }
}

fn norm(p: Vec2) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// Forward optimality map `s -> g' a s (1+s^2)^(g'/2-1)`.
pub fn momentum_for_speed(s: f64, a: f64, gamma_prime: f64) -> f64 {
    gamma_prime * a * s * (1.0 + s * s).powf(0.5 * gamma_prime - 1.0)
}

/// Unique `s >= 0` with `g' a s (1+s^2)^(g'/2-1) = p_mag`.
///
/// Safeguarded Newton on the strictly increasing map, with a bisection step whenever the
/// Newton iterate leaves the current bracket.
pub fn solve_optimal_speed(p_mag: f64, a: f64, gamma_prime: f64) -> Result<f64> {
    if !(p_mag >= 0.0 && a > 0.0 && gamma_prime > 2.0) || !p_mag.is_finite() {
        return Err(MfgError::InvalidParameter(format!(
            "speed solve needs |p| >= 0, a > 0, gamma' > 2 (got {p_mag}, {a}, {gamma_prime})"
        )));
    }
    if p_mag == 0.0 {
        return Ok(0.0);
    }
    let tol = SPEED_TOL * p_mag.max(1.0);
    let residual = |s: f64| momentum_for_speed(s, a, gamma_prime) - p_mag;

    // Bracket: the map is >= g' a s, so s = p/(g' a) overshoots.
    let mut lo = 0.0;
    let mut hi = p_mag / (gamma_prime * a);
    let mut s = (p_mag / (gamma_prime * a)).powf(1.0 / (gamma_prime - 1.0)).min(hi);
    for _ in 0..SPEED_MAX_ITERS {
        let r = residual(s);
        if r.abs() <= tol {
            return Ok(s);
        }
        if r > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let one_s2 = 1.0 + s * s;
        let slope = gamma_prime * a * one_s2.powf(0.5 * gamma_prime - 2.0) * (1.0 + (gamma_prime - 1.0) * s * s);
        let newton = s - r / slope;
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            let r = residual(s);
            if r.abs() <= tol {
                return Ok(s);
            }
            break;
        }
    }
    Err(MfgError::SpeedSolve { p_mag, a, gamma_prime })
}

/// Example Hamiltonian at momentum `p` for coefficient value `a = a(x)`.
pub fn eval_example(a: f64, p: Vec2, gamma_prime: f64) -> Result<HamiltonianEval> {
    let p_mag = norm(p);
    let s = solve_optimal_speed(p_mag, a, gamma_prime)?;
    let dir = if p_mag > 0.0 { [p[0] / p_mag, p[1] / p_mag] } else { [0.0, 0.0] };
    let v = [-s * dir[0], -s * dir[1]];
    let one_s2 = 1.0 + s * s;
    let h = a * ((gamma_prime - 1.0) * s * s - 1.0) * one_s2.powf(0.5 * gamma_prime - 1.0);

    // D_vvL = c (I + k v v^T / (1+s^2)); invert by the rank-one formula.
    let c = gamma_prime * a * one_s2.powf(0.5 * gamma_prime - 1.0);
    let k = gamma_prime - 2.0;
    let w = k / (one_s2 + k * s * s);
    let mut dpp_h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            dpp_h[i][j] = (id - w * v[i] * v[j]) / c;
        }
    }
    Ok(HamiltonianEval { h, dp_h: [-v[0], -v[1]], dpp_h, v_opt: v, s_opt: s })
}

/// Power base `(1+|p|^2)^(gamma/2)`.
pub fn eval_power(p: Vec2, gamma: f64) -> HamiltonianEval {
    let q = 1.0 + p[0] * p[0] + p[1] * p[1];
    let h = q.powf(0.5 * gamma);
    let g1 = gamma * q.powf(0.5 * gamma - 1.0);
    let g2 = gamma * (gamma - 2.0) * q.powf(0.5 * gamma - 2.0);
    let dp_h = [g1 * p[0], g1 * p[1]];
    let mut dpp_h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            dpp_h[i][j] = g1 * id + g2 * p[i] * p[j];
        }
    }
    HamiltonianEval { h, dp_h, dpp_h, v_opt: [0.0; 2], s_opt: 0.0 }
}

/// `lambda * example + (1 - lambda) * power`. Endpoints return the pure evaluations.
pub fn eval_blend(a: f64, p: Vec2, gamma: f64, lambda: f64) -> Result<HamiltonianEval> {
    let gamma_prime = conjugate_exponent(gamma);
    if lambda >= 1.0 {
        return eval_example(a, p, gamma_prime);
    }
    let base = eval_power(p, gamma);
    if lambda <= 0.0 {
        return Ok(base);
    }
    Ok(eval_example(a, p, gamma_prime)?.blend(&base, lambda))
}

/// `gamma' = gamma / (gamma - 1)`.
pub fn conjugate_exponent(gamma: f64) -> f64 {
    gamma / (gamma - 1.0)
}

/// Lagrangian `a (1+|v|^2)^(g'/2)` of the example family.
pub fn example_lagrangian(a: f64, v: Vec2, gamma_prime: f64) -> f64 {
    a * (1.0 + v[0] * v[0] + v[1] * v[1]).powf(0.5 * gamma_prime)
}

/// Velocity gradient of [`example_lagrangian`].
pub fn example_lagrangian_dv(a: f64, v: Vec2, gamma_prime: f64) -> Vec2 {
    let f = gamma_prime * a * (1.0 + v[0] * v[0] + v[1] * v[1]).powf(0.5 * gamma_prime - 1.0);
    [f * v[0], f * v[1]]
}

/// Velocity Hessian of [`example_lagrangian`].
pub fn example_lagrangian_dvv(a: f64, v: Vec2, gamma_prime: f64) -> Mat2 {
    let one_s2 = 1.0 + v[0] * v[0] + v[1] * v[1];
    let c = gamma_prime * a * one_s2.powf(0.5 * gamma_prime - 1.0);
    let k = (gamma_prime - 2.0) / one_s2;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i][j] = c * (id + k * v[i] * v[j]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianKind {
    Example,
    Power,
    Blend,
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HamiltonianKind::Example => "example",
            HamiltonianKind::Power => "power",
            HamiltonianKind::Blend => "blend",
        })
    }
}

impl FromStr for HamiltonianKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "example" => Ok(HamiltonianKind::Example),
            "power" => Ok(HamiltonianKind::Power),
            "blend" => Ok(HamiltonianKind::Blend),
            other => Err(format!("unknown hamiltonian kind `{other}`")),
        }
    }
}

/// A Hamiltonian sampled on a grid: the example family, the power base, or their blend.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    kind: HamiltonianKind,
    gamma: f64,
    gamma_prime: f64,
    a: ScalarField,
    lambda: f64,
}

impl HamiltonianModel {
    pub fn new(kind: HamiltonianKind, gamma: f64, a: ScalarField, lambda: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma < 2.0) {
            return Err(MfgError::InvalidParameter(format!("gamma must lie in (1,2), got {gamma}")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(MfgError::InvalidParameter(format!("lambda must lie in [0,1], got {lambda}")));
        }
        if kind != HamiltonianKind::Power && !(a.min() > 0.0) {
            return Err(MfgError::InvalidParameter(format!("coefficient a(x) must be positive, min is {}", a.min())));
        }
        Ok(Self { kind, gamma, gamma_prime: conjugate_exponent(gamma), a, lambda })
    }

    pub fn example(gamma: f64, a: ScalarField) -> Result<Self> {
        Self::new(HamiltonianKind::Example, gamma, a, 1.0)
    }

    pub fn power(grid: &TorusGrid, gamma: f64) -> Result<Self> {
        Self::new(HamiltonianKind::Power, gamma, grid.constant(1.0), 0.0)
    }

    /// The homotopy Hamiltonian `H_lambda` built on this model's target.
    ///
    /// A power target has no homotopy and is returned unchanged.
    pub fn at_lambda(&self, lambda: f64) -> Result<Self> {
        match self.kind {
            HamiltonianKind::Power => Ok(self.clone()),
            _ => Self::new(HamiltonianKind::Blend, self.gamma, self.a.clone(), lambda),
        }
    }

    pub fn kind(&self) -> HamiltonianKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_prime(&self) -> f64 {
        self.gamma_prime
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> &ScalarField {
        &self.a
    }

    pub fn grid(&self) -> &TorusGrid {
        self.a.grid()
    }

    /// Evaluates at grid point `k` and momentum `p`.
    pub fn eval(&self, k: usize, p: Vec2) -> Result<HamiltonianEval> {
        let a = self.a.values()[k];
        match self.kind {
            HamiltonianKind::Example => eval_example(a, p, self.gamma_prime),
            HamiltonianKind::Power => Ok(eval_power(p, self.gamma)),
            HamiltonianKind::Blend => eval_blend(a, p, self.gamma, self.lambda),
        }
    }
}

/// Sign of the `arctan(m)` term in the homotopy potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingSign {
    /// `V_lambda = lambda V + (1 - lambda) arctan(m)`.
    PaperLiteral,
    /// `V_lambda = lambda V - (1 - lambda) arctan(m)`, decreasing in `m` for every lambda.
    Monotone,
}

impl CouplingSign {
    pub fn sigma(self) -> f64 {
        match self {
            CouplingSign::PaperLiteral => 1.0,
            CouplingSign::Monotone => -1.0,
        }
    }
}

impl fmt::Display for CouplingSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingSign::PaperLiteral => "paper_literal",
            CouplingSign::Monotone => "monotone",
        })
    }
}

impl FromStr for CouplingSign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "paper_literal" => Ok(CouplingSign::PaperLiteral),
            "monotone" => Ok(CouplingSign::Monotone),
            other => Err(format!("unknown potential sign `{other}`")),
        }
    }
}

/// `V(x,m) = b(x) - arctan(m)` and its homotopy `V_lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    b: ScalarField,
    sign: CouplingSign,
    lambda: f64,
}

impl PotentialModel {
    pub fn new(b: ScalarField, sign: CouplingSign, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(MfgError::InvalidParameter(format!("lambda must lie in [0,1], got {lambda}")));
        }
        Ok(Self { b, sign, lambda })
    }

    pub fn at_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.b.clone(), self.sign, lambda)
    }

    pub fn b(&self) -> &ScalarField {
        &self.b
    }

    pub fn sign(&self) -> CouplingSign {
        self.sign
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `(V_lambda(x_k, m), d/dm V_lambda(x_k, m))`.
    pub fn eval(&self, k: usize, m: f64) -> Result<(f64, f64)> {
        if !(m > 0.0) {
            return Err(MfgError::NonPositiveDensity { min: m, index: k });
        }
        let lam = self.lambda;
        let sigma = self.sign.sigma();
        let atan = m.atan();
        let datan = 1.0 / (1.0 + m * m);
        let v = lam * (self.b.values()[k] - atan) + sigma * (1.0 - lam) * atan;
        let dv = -lam * datan + sigma * (1.0 - lam) * datan;
        Ok((v, dv))
    }
}
