//! Numerical audit of the structural assumptions on `H` over a box of momenta.
//!
//! Growth conditions carry unspecified constants. Each is fitted on the inner half of the
//! sample box (`|p| <= R/2`) and then checked on the outer shell (`R/2 < |p| <= R`): a
//! condition holds when the fitted constants extrapolate without violation.

use std::fmt;

use super::{HamiltonianKind, HamiltonianModel, Vec2};
use crate::error::Result;

/// Momenta to audit: a uniform box `[-radius, radius]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub radius: f64,
    pub points_per_axis: usize,
    /// At most this many grid points `x` are visited (evenly strided).
    pub max_x_points: usize,
}

impl SampleBox {
    pub fn for_dim(dim: usize) -> Self {
        Self { radius: 50.0, points_per_axis: if dim == 1 { 201 } else { 41 }, max_x_points: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionLine {
    pub name: &'static str,
    pub statement: &'static str,
    pub holds: bool,
    pub constants: Vec<(&'static str, f64)>,
    /// Largest violation on the verification samples (non-positive when the line holds).
    pub worst_violation: f64,
}

impl fmt::Display for AssumptionLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<6} {:<44} {:<5}", self.name, self.statement, if self.holds { "pass" } else { "FAIL" })?;
        for (k, v) in &self.constants {
            write!(f, " {k}={v:.6e}")?;
        }
        write!(f, " worst={:.3e}", self.worst_violation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub kind: HamiltonianKind,
    pub lambda: f64,
    pub alpha: f64,
    pub lines: Vec<AssumptionLine>,
    /// `inf 4 (D_pH.p - H) / (p^T D_ppH p)` over the samples; `alpha` must lie below it.
    pub alpha_tilde_inf: f64,
    pub min_hessian_eigenvalue: f64,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.lines.iter().all(|l| l.holds)
    }

    pub fn line(&self, name: &str) -> Option<&AssumptionLine> {
        self.lines.iter().find(|l| l.name == name)
    }
}

struct Sample {
    p_mag: f64,
    h: f64,
    dp_h_mag: f64,
    /// `D_pH . p - H`
    legendre_gap: f64,
    /// `p^T D_ppH p`
    curvature: f64,
    min_eig: f64,
    outer: bool,
}

fn min_eigenvalue(m: &[[f64; 2]; 2], dim: usize) -> f64 {
    if dim == 1 {
        return m[0][0];
    }
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    0.5 * tr - disc
}

fn momenta(dim: usize, sample: &SampleBox) -> Vec<Vec2> {
    let n = sample.points_per_axis.max(2);
    let axis: Vec<f64> = (0..n).map(|i| -sample.radius + 2.0 * sample.radius * i as f64 / (n - 1) as f64).collect();
    if dim == 1 {
        axis.iter().map(|&p| [p, 0.0]).collect()
    } else {
        axis.iter().flat_map(|&p| axis.iter().map(move |&q| [p, q])).collect()
    }
}

/// Fits `lhs(p) >= c * growth(p) - C` (or `<=` when `upper`) with `c` from a geometric ladder.
/// Returns `(c, C, worst outer violation)`.
fn fit_growth(
    samples: &[Sample],
    lhs: impl Fn(&Sample) -> f64,
    growth: impl Fn(&Sample) -> f64,
    upper: bool,
) -> (f64, f64, f64) {
    // violation(c, C) > 0 means the inequality fails at that sample
    let slack = |s: &Sample, c: f64| if upper { lhs(s) - c * growth(s) } else { c * growth(s) - lhs(s) };
    let mut best: Option<(f64, f64, f64)> = None;
    for k in -12..=12 {
        let c = 2f64.powi(k);
        let intercept = samples.iter().filter(|s| !s.outer).map(|s| slack(s, c)).fold(0.0f64, f64::max);
        let worst = samples
            .iter()
            .filter(|s| s.outer)
            .map(|s| {
                let scale = lhs(s).abs().max(c * growth(s)).max(1.0);
                (slack(s, c) - intercept) / scale
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let worst = if worst.is_finite() { worst } else { 0.0 };
        // Ties prefer the sharper constant: larger c for lower bounds, smaller for upper.
        let better = match best {
            None => true,
            Some((bc, _, bw)) => {
                let (w, bw) = (worst.max(0.0), bw.max(0.0));
                w < bw || (w == bw && if upper { c < bc } else { c > bc })
            }
        };
        if better {
            best = Some((c, intercept, worst));
        }
    }
    best.expect("non-empty ladder")
}

const VIOLATION_TOL: f64 = 1e-12;

/// Audits monotone-Hamiltonian assumptions for `model` over `sample`, with congestion `alpha`.
pub fn audit_assumptions(model: &HamiltonianModel, alpha: f64, sample: &SampleBox) -> Result<AssumptionReport> {
    let grid = *model.grid();
    let dim = grid.dim();
    let gamma = model.gamma();
    let stride = (grid.len() / sample.max_x_points.max(1)).max(1);
    let ps = momenta(dim, sample);
    let half = 0.5 * sample.radius;

    let mut samples = Vec::new();
    let mut h_at_zero = f64::NEG_INFINITY;
    for k in (0..grid.len()).step_by(stride) {
        h_at_zero = h_at_zero.max(model.eval(k, [0.0, 0.0])?.h);
        for &p in &ps {
            let e = model.eval(k, p)?;
            let p_mag = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let mut curvature = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    curvature += p[i] * e.dpp_h[i][j] * p[j];
                }
            }
            samples.push(Sample {
                p_mag,
                h: e.h,
                dp_h_mag: (e.dp_h[0] * e.dp_h[0] + e.dp_h[1] * e.dp_h[1]).sqrt(),
                legendre_gap: e.dp_h[0] * p[0] + e.dp_h[1] * p[1] - e.h,
                curvature,
                min_eig: min_eigenvalue(&e.dpp_h, dim),
                outer: p_mag > half,
            });
        }
    }

    let mut lines = Vec::new();
    lines.push(AssumptionLine {
        name: "A2",
        statement: "H(x,0) <= 0",
        holds: h_at_zero <= 0.0,
        constants: vec![("max_H(x,0)", h_at_zero)],
        worst_violation: h_at_zero,
    });

    let (c, big_c, worst) = fit_growth(&samples, |s| s.legendre_gap, |s| s.h, false);
    lines.push(AssumptionLine {
        name: "A4",
        statement: "D_pH.p - H >= c H - C",
        holds: worst <= VIOLATION_TOL,
        constants: vec![("c", c), ("C", big_c)],
        worst_violation: worst,
    });

    let (cl, big_cl, worst_l) = fit_growth(&samples, |s| s.h, |s| s.p_mag.powf(gamma), false);
    let (cu, big_cu, worst_u) = fit_growth(&samples, |s| s.h, |s| s.p_mag.powf(gamma), true);
    lines.push(AssumptionLine {
        name: "As1.2",
        statement: "c|p|^g - C <= H <= c'|p|^g + C'",
        holds: worst_l.max(worst_u) <= VIOLATION_TOL,
        constants: vec![("c", cl), ("C", big_cl), ("c'", cu), ("C'", big_cu)],
        worst_violation: worst_l.max(worst_u),
    });

    let (c6, big_c6, worst6) = fit_growth(&samples, |s| s.dp_h_mag, |s| s.p_mag.powf(gamma - 1.0), true);
    lines.push(AssumptionLine {
        name: "A6",
        statement: "|D_pH| <= C|p|^(g-1) + C",
        holds: worst6 <= VIOLATION_TOL,
        constants: vec![("C", c6.max(big_c6))],
        worst_violation: worst6,
    });

    let min_eig = samples.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min);
    let alpha_tilde_inf = samples
        .iter()
        .map(|s| {
            if s.curvature > 0.0 {
                4.0 * s.legendre_gap / s.curvature
            } else if s.legendre_gap > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    lines.push(AssumptionLine {
        name: "A1",
        statement: "D_ppH > 0, D_pH.p - H > (alpha/4) p.D_ppH p",
        holds: min_eig > 0.0 && alpha < alpha_tilde_inf,
        constants: vec![("min_eig", min_eig), ("inf_alpha_tilde", alpha_tilde_inf), ("alpha", alpha)],
        worst_violation: (alpha - alpha_tilde_inf).max(-min_eig),
    });

    Ok(AssumptionReport {
        kind: model.kind(),
        lambda: model.lambda(),
        alpha,
        lines,
        alpha_tilde_inf,
        min_hessian_eigenvalue: min_eig,
    })
}
