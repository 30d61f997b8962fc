//! A priori quantities evaluated on a discrete state, and pass/fail certification.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::grid::ScalarField;
use crate::system::{bilinear_form, point_data, MfgProblem, MfgState, PerturbationPair};

/// `∫ m`.
pub fn mass_check(state: &MfgState) -> f64 {
    state.m.integrate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of
/// `∫ m^(1+α) [H(q) - D_pH(q)·q] = ∫ m^α H(q) + (1-m) V(m)` with `q = Du/m^α`,
/// using the models at `state.lambda`.
///
/// The discrete system satisfies this identity exactly when `Du` is the central gradient, so
/// `Du` here is the fourth-order gradient and the residual measures how well the discrete
/// solution approximates a continuous one.
pub fn energy_identity(state: &MfgState, problem: &MfgProblem) -> Result<EnergyIdentity> {
    let data = point_data(state, problem, &state.u.gradient_fourth_order())?;
    let grid = state.grid();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for d in &data {
        let q_dot: f64 = (0..grid.dim()).map(|a| d.q[a] * d.ham.dp_h[a]).sum();
        lhs += d.m * d.m_alpha * (d.ham.h - q_dot);
        rhs += d.m_alpha * d.ham.h + (1.0 - d.m) * d.v;
    }
    let w = grid.cell_volume();
    let (lhs, rhs) = (w * lhs, w * rhs);
    Ok(EnergyIdentity { lhs, rhs, residual: (lhs - rhs).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupNorms {
    pub u: f64,
    pub du: f64,
    pub m: f64,
    pub inv_m: f64,
    pub dm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub l1_u: f64,
    pub energy_identity_lhs: f64,
    pub energy_identity_rhs: f64,
    pub energy_identity_residual: f64,
    /// `(β, ∫|Du|^γ m^β)`
    pub weighted_gradient_norms: Vec<(f64, f64)>,
    /// `(∫m^(1+α), ∫|D m^((1+α)/2)|²)`
    pub sobolev_m: (f64, f64),
    /// `(∫m log m, ∫|D m^(1/2)|²)`
    pub entropy: (f64, f64),
    /// `(r, ‖1/m‖_r)`
    pub inverse_moments: Vec<(f64, f64)>,
    pub sup_norms: SupNorms,
    pub delta_exponent: f64,
    pub alpha_bar: f64,
    /// Large-p stand-in for the Sobolev-conjugate norm of `m`, which does not exist for d <= 2.
    pub m_surrogate_exponent: f64,
    pub m_surrogate_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub r_list: Vec<f64>,
    /// `None` selects `{-ᾱ, 0, 1-ᾱ}`.
    pub beta_list: Option<Vec<f64>>,
    pub surrogate_exponent: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { r_list: vec![2.0, 4.0, 8.0], beta_list: None, surrogate_exponent: 16.0 }
    }
}

/// `ᾱ = (γ-1)α`.
pub fn alpha_bar(gamma: f64, alpha: f64) -> f64 {
    (gamma - 1.0) * alpha
}

/// `δ = 2ᾱ/(2-γ)`.
pub fn delta_exponent(gamma: f64, alpha: f64) -> f64 {
    2.0 * alpha_bar(gamma, alpha) / (2.0 - gamma)
}

fn squared_gradient_integral(f: &ScalarField) -> f64 {
    let g = f.gradient();
    g.dot(&g)
}

pub fn estimate_suite(state: &MfgState, problem: &MfgProblem, options: &SuiteOptions) -> Result<DiagnosticsReport> {
    state.check_positive()?;
    if state.grid() != problem.grid() {
        return Err(MfgError::GridMismatch);
    }
    let gamma = problem.gamma();
    let alpha = problem.alpha();
    let abar = alpha_bar(gamma, alpha);
    let u = &state.u;
    let m = &state.m;
    let energy = energy_identity(state, problem)?;

    let du = u.gradient().magnitude();
    let betas = options.beta_list.clone().unwrap_or_else(|| vec![-abar, 0.0, 1.0 - abar]);
    let weighted_gradient_norms =
        betas.iter().map(|&b| (b, du.zip_map(m, |g, mk| g.powf(gamma) * mk.powf(b)).integrate())).collect();

    let inv_m = m.map(|v| 1.0 / v);
    let inverse_moments = options.r_list.iter().map(|&r| Ok((r, inv_m.lp_norm(r)?))).collect::<Result<Vec<_>>>()?;

    Ok(DiagnosticsReport {
        mass: mass_check(state),
        min_u: u.min(),
        max_u: u.max(),
        l1_u: u.lp_norm(1.0)?,
        energy_identity_lhs: energy.lhs,
        energy_identity_rhs: energy.rhs,
        energy_identity_residual: energy.residual,
        weighted_gradient_norms,
        sobolev_m: (
            m.map(|v| v.powf(1.0 + alpha)).integrate(),
            squared_gradient_integral(&m.map(|v| v.powf(0.5 * (1.0 + alpha)))),
        ),
        entropy: (m.map(|v| v * v.ln()).integrate(), squared_gradient_integral(&m.map(f64::sqrt))),
        inverse_moments,
        sup_norms: SupNorms {
            u: u.sup_norm(),
            du: du.sup_norm(),
            m: m.sup_norm(),
            inv_m: inv_m.sup_norm(),
            dm: m.gradient().sup_norm(),
        },
        delta_exponent: delta_exponent(gamma, alpha),
        alpha_bar: abar,
        m_surrogate_exponent: options.surrogate_exponent,
        m_surrogate_norm: m.lp_norm(options.surrogate_exponent)?,
    })
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    /// `min m`, recovered from `‖1/m‖_∞`.
    pub fn min_m(&self) -> f64 {
        1.0 / self.sup_norms.inv_m
    }

    /// Every scalar in the report.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![
            self.mass,
            self.min_u,
            self.max_u,
            self.l1_u,
            self.energy_identity_lhs,
            self.energy_identity_rhs,
            self.energy_identity_residual,
            self.sobolev_m.0,
            self.sobolev_m.1,
            self.entropy.0,
            self.entropy.1,
            self.sup_norms.u,
            self.sup_norms.du,
            self.sup_norms.m,
            self.sup_norms.inv_m,
            self.sup_norms.dm,
            self.delta_exponent,
            self.alpha_bar,
            self.m_surrogate_norm,
        ];
        for &(k, v) in self.weighted_gradient_norms.iter().chain(&self.inverse_moments) {
            out.push(k);
            out.push(v);
        }
        out
    }
}

/// Sampled values of `B[w,w]` over random perturbations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicitySpotCheck {
    pub samples: usize,
    pub max_value: f64,
    /// Every sample with `‖f‖ + ‖Dv‖ > 1e-6` gave a strictly negative value.
    pub strictly_negative: bool,
}

/// Evaluates `B[w,w]` on `samples` random perturbations. Even samples have i.i.d. uniform
/// entries in `[-1,1]`; odd samples are low Fourier modes with random amplitudes.
pub fn monotonicity_spot_check(
    state: &MfgState,
    problem: &MfgProblem,
    samples: usize,
    seed: u64,
) -> Result<MonotonicitySpotCheck> {
    let grid = *state.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_value = f64::NEG_INFINITY;
    let mut strictly_negative = true;
    for i in 0..samples {
        let mut draw = || {
            if i % 2 == 0 {
                return grid.scalar((0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
            }
            let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Ok(grid.sample(|x| {
                let (s, t) = (2.0 * std::f64::consts::PI * x[0], 2.0 * std::f64::consts::PI * x[1]);
                c[0] + c[1] * s.sin()
                    + c[2] * s.cos()
                    + c[3] * (2.0 * s).sin()
                    + c[4] * t.cos()
                    + c[5] * (s + t).sin()
                    + c[6] * (3.0 * s - t).cos()
            }))
        };
        let w = PerturbationPair::new(draw()?, draw()?)?;
        let b = bilinear_form(&w, &w, state, problem)?;
        max_value = max_value.max(b);
        let size = w.f.dot(&w.f).sqrt() + {
            let g = w.v.gradient();
            g.dot(&g).sqrt()
        };
        if size > 1e-6 && !(b < 0.0) {
            strictly_negative = false;
        }
    }
    Ok(MonotonicitySpotCheck { samples, max_value, strictly_negative })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub mass_tol: f64,
    pub energy_tol: f64,
    pub min_m_floor: f64,
    pub monotonicity_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { mass_tol: 1e-10, energy_tol: 1e-3, min_m_floor: 1e-8, monotonicity_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<14} {:<5} value={:.6e} threshold={:.3e}",
            self.name,
            if self.passed { "pass" } else { "FAIL" },
            self.value,
            self.threshold
        )
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.passed)
}

pub fn certify(
    report: &DiagnosticsReport,
    thresholds: &Thresholds,
    monotonicity: Option<&MonotonicitySpotCheck>,
) -> Vec<Verdict> {
    let mass_err = (report.mass - 1.0).abs();
    let non_finite = report.values().iter().filter(|v| !v.is_finite()).count();
    let mut out = vec![
        Verdict {
            name: "mass",
            passed: mass_err < thresholds.mass_tol,
            value: mass_err,
            threshold: thresholds.mass_tol,
        },
        Verdict {
            name: "energy",
            passed: report.energy_identity_residual < thresholds.energy_tol,
            value: report.energy_identity_residual,
            threshold: thresholds.energy_tol,
        },
        Verdict { name: "finite", passed: non_finite == 0, value: non_finite as f64, threshold: 0.0 },
        Verdict {
            name: "min_m",
            passed: report.min_m() > thresholds.min_m_floor,
            value: report.min_m(),
            threshold: thresholds.min_m_floor,
        },
    ];
    if let Some(check) = monotonicity {
        out.push(Verdict {
            name: "monotonicity",
            passed: check.max_value <= thresholds.monotonicity_tol && check.strictly_negative,
            value: check.max_value,
            threshold: thresholds.monotonicity_tol,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::hamiltonian::{Coefficient, CouplingSign, HamiltonianModel};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn problem(dim: usize, n: usize) -> MfgProblem {
        let g = TorusGrid::new(dim, n).unwrap();
        let h = HamiltonianModel::example(1.25, Coefficient::SinBump.sample(&g)).unwrap();
        MfgProblem::new(h, Coefficient::CosBump.sample(&g), CouplingSign::PaperLiteral, 1.0).unwrap()
    }

    #[test]
    fn trivial_state_closed_forms() {
        let p = problem(1, 32);
        let s = p.trivial_state().unwrap();
        assert_eq!(mass_check(&s), 1.0);
        let e = energy_identity(&s, &p).unwrap();
        assert!((e.lhs - 1.0).abs() < 1e-14 && (e.rhs - 1.0).abs() < 1e-14 && e.residual < 1e-14);
        let r = estimate_suite(&s, &p, &SuiteOptions::default()).unwrap();
        assert_eq!(r.entropy, (0.0, 0.0));
        assert!((r.sobolev_m.0 - 1.0).abs() < 1e-14);
        for &(_, v) in &r.inverse_moments {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!((r.min_u + 1.0 + FRAC_PI_4).abs() < 1e-14);
        assert!((r.l1_u - (1.0 + FRAC_PI_4)).abs() < 1e-13);
        assert_eq!(r.alpha_bar, 0.25);
        assert_eq!(r.delta_exponent, 2.0 * 0.25 / 0.75);
        assert!(all_pass(&certify(&r, &Thresholds::default(), None)));
    }

    #[test]
    fn constant_density_closed_forms() {
        let p = problem(2, 16);
        for c in [0.3, 1.7, 4.0] {
            let s = MfgState::new(p.grid().constant(0.2), p.grid().constant(c), 1.0).unwrap();
            let r = estimate_suite(&s, &p, &SuiteOptions::default()).unwrap();
            assert!((r.entropy.0 - c * c.ln()).abs() < 1e-12);
            assert!(r.entropy.1 == 0.0);
            for &(_, v) in &r.inverse_moments {
                assert!((v - 1.0 / c).abs() < 1e-12);
            }
            assert!((r.mass - c).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_matches_lp_norm() {
        let p = problem(2, 16);
        let g = *p.grid();
        let u = g.sample(|x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let m = g.sample(|x| 1.0 + 0.3 * (2.0 * PI * (x[0] + x[1])).cos());
        let s = MfgState::new(u.clone(), m, 1.0).unwrap();
        let r = estimate_suite(&s, &p, &SuiteOptions::default()).unwrap();
        let zero = r.weighted_gradient_norms.iter().find(|(b, _)| *b == 0.0).unwrap().1;
        let reference = u.gradient().magnitude().lp_norm(1.25).unwrap().powf(1.25);
        assert!((zero - reference).abs() < 1e-12 * reference.max(1.0));
    }

    fn rotated(f: &ScalarField, shift: usize) -> ScalarField {
        let g = *f.grid();
        let n = g.len();
        g.scalar((0..n).map(|k| f.values()[(k + shift) % n]).collect()).unwrap()
    }

    #[test]
    fn invariant_under_index_rotation() {
        for (dim, n, shift) in [(1usize, 32usize, 5usize), (2, 16, 16 * 3)] {
            let g = TorusGrid::new(dim, n).unwrap();
            let a = g.sample(|x| 1.0 + 0.4 * (2.0 * PI * x[0]).sin() + 0.1 * (2.0 * PI * x[1]).cos());
            let b = g.sample(|x| 0.5 * (2.0 * PI * x[0]).cos() * (1.0 + 0.2 * (2.0 * PI * x[1]).sin()));
            let u = g.sample(|x| (2.0 * PI * x[0]).cos() + 0.3 * (4.0 * PI * x[1]).sin());
            let m = g.sample(|x| 1.0 + 0.4 * (2.0 * PI * (x[0] - x[1])).sin());
            let build = |a: ScalarField, b: ScalarField| {
                MfgProblem::new(HamiltonianModel::example(1.25, a).unwrap(), b, CouplingSign::PaperLiteral, 1.0)
                    .unwrap()
            };
            let p0 = build(a.clone(), b.clone());
            let p1 = build(rotated(&a, shift), rotated(&b, shift));
            let r0 = estimate_suite(&MfgState::new(u.clone(), m.clone(), 1.0).unwrap(), &p0, &SuiteOptions::default())
                .unwrap();
            let s1 = MfgState::new(rotated(&u, shift), rotated(&m, shift), 1.0).unwrap();
            let r1 = estimate_suite(&s1, &p1, &SuiteOptions::default()).unwrap();
            for (x, y) in r0.values().iter().zip(r1.values()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn mass_failure_isolated() {
        let p = problem(1, 32);
        let mut s = p.trivial_state().unwrap();
        s.m = s.m.map(|v| 1.01 * v);
        let r = estimate_suite(&s, &p, &SuiteOptions::default()).unwrap();
        let v = certify(&r, &Thresholds { energy_tol: 1.0, ..Thresholds::default() }, None);
        assert!(!v.iter().find(|v| v.name == "mass").unwrap().passed);
        assert!(v.iter().filter(|v| v.name != "mass").all(|v| v.passed));
        let doubled = MfgState { m: p.grid().constant(2.0), ..s };
        assert_eq!(mass_check(&doubled), 2.0);
    }

    #[test]
    fn rejects_nonpositive_density() {
        let p = problem(1, 16);
        let mut s = p.trivial_state().unwrap();
        s.m.values_mut()[4] = -0.1;
        assert!(matches!(estimate_suite(&s, &p, &SuiteOptions::default()), Err(MfgError::NonPositiveDensity { .. })));
        assert!(energy_identity(&s, &p).is_err());
    }

    #[test]
    fn spot_check_on_trivial_state_is_negative() {
        let p = problem(1, 32).with_sign(CouplingSign::Monotone);
        let s = MfgState { lambda: 1.0, ..p.trivial_state().unwrap() };
        let c = monotonicity_spot_check(&s, &p, 10, 3).unwrap();
        assert!(c.max_value < 0.0 && c.strictly_negative);
    }

    #[test]
    fn report_json_keys() {
        let p = problem(1, 16);
        let r = estimate_suite(&p.trivial_state().unwrap(), &p, &SuiteOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in [
            "mass",
            "min_u",
            "max_u",
            "l1_u",
            "energy_identity_lhs",
            "energy_identity_rhs",
            "energy_identity_residual",
            "weighted_gradient_norms",
            "sobolev_m",
            "entropy",
            "inverse_moments",
            "sup_norms",
            "delta_exponent",
            "alpha_bar",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["inverse_moments"][1][0].as_f64(), Some(4.0));
        assert_eq!(v["sup_norms"]["inv_m"].as_f64(), Some(1.0));
    }

    fn report_with(mass: f64, energy: f64, min_m: f64) -> DiagnosticsReport {
        let p = problem(1, 16);
        let mut r = estimate_suite(&p.trivial_state().unwrap(), &p, &SuiteOptions::default()).unwrap();
        r.mass = mass;
        r.energy_identity_residual = energy;
        r.sup_norms.inv_m = 1.0 / min_m;
        r
    }

    proptest! {
        #[test]
        fn loosening_thresholds_never_breaks_a_pass(
            mass in 0.9f64..1.1,
            energy in 0.0f64..1e-2,
            min_m in 1e-10f64..1.0,
            mass_tol in 1e-12f64..1e-1,
            energy_tol in 1e-6f64..1e-1,
            floor in 1e-10f64..1e-1,
            loosen in 1.0f64..100.0,
        ) {
            let r = report_with(mass, energy, min_m);
            let tight = Thresholds { mass_tol, energy_tol, min_m_floor: floor, ..Thresholds::default() };
            let loose = Thresholds {
                mass_tol: mass_tol * loosen,
                energy_tol: energy_tol * loosen,
                min_m_floor: floor / loosen,
                ..Thresholds::default()
            };
            for (a, b) in certify(&r, &tight, None).iter().zip(certify(&r, &loose, None)) {
                prop_assert!(!a.passed || b.passed, "{} passed tight but failed loose", a.name);
            }
        }
    }
}
