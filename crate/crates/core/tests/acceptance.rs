//! Acceptance criteria for the solver, one test per criterion. Each prints a `PASS`/`FAIL` line
//! with the measured value and its pinned tolerance (visible with `--nocapture`).

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use congestion_mfg::config::RunConfig;
use congestion_mfg::diagnostics::{energy_identity, estimate_suite, monotonicity_spot_check, SuiteOptions};
use congestion_mfg::hamiltonian::{
    audit_assumptions, check_parameter_admissibility, conjugate_exponent, eval_example, example_lagrangian,
    momentum_for_speed, solve_optimal_speed, Coefficient, CouplingSign, HamiltonianModel, SampleBox,
};
use congestion_mfg::solver::{continuation_run, newton_solve, ContinuationConfig, NewtonConfig, SolvePath};
use congestion_mfg::system::{assemble_jacobian, residual, MfgProblem, MfgState};
use congestion_mfg::{ScalarField, TorusGrid};

struct Ledger {
    lines: Vec<(usize, bool, String)>,
}

impl Ledger {
    fn record(&mut self, id: usize, passed: bool, text: String) {
        self.lines.push((id, passed, text));
    }
}

type Outcomes = Vec<(usize, bool, String)>;

fn evaluate(group: fn(&mut Ledger)) -> Outcomes {
    let mut ledger = Ledger { lines: Vec::new() };
    group(&mut ledger);
    ledger.lines
}

fn check(outcomes: &Outcomes, id: usize) {
    let (_, passed, text) = outcomes.iter().find(|l| l.0 == id).expect("criterion evaluated");
    println!("criterion {id:>2} {} {text}", if *passed { "PASS" } else { "FAIL" });
    assert!(*passed, "criterion {id} failed: {text}");
}

fn reference_problem(dim: usize, n: usize, sign: CouplingSign) -> MfgProblem {
    let cfg = RunConfig { dim, n, sign, ..RunConfig::default() };
    cfg.build_problem().unwrap()
}

fn run(problem: &MfgProblem) -> (SolvePath, Duration) {
    let t = Instant::now();
    let path = continuation_run(problem, &NewtonConfig::default(), &ContinuationConfig::default());
    (path, t.elapsed())
}

fn smooth(g: &TorusGrid, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-amp..amp)).collect();
    g.sample(|x| {
        let (s, t) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        c[0] * s.sin()
            + c[1] * s.cos()
            + c[2] * (2.0 * s).sin()
            + c[3] * t.cos()
            + c[4] * (s + t).sin()
            + c[5] * (s - 2.0 * t).cos()
            + c[6] * (3.0 * s).cos()
            + c[7]
    })
}

fn sci_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", items.join(", "))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn criterion_1(ledger: &mut Ledger) {
    let p = reference_problem(1, 128, CouplingSign::PaperLiteral);
    let s = p.trivial_state().unwrap();
    let r = residual(&s, &p).unwrap().sup_norm();
    let u_ok = s.u.values().iter().all(|&u| u == -(1.0 + FRAC_PI_4));
    ledger.record(
        1,
        r < 1e-12 && u_ok && s.m.values().iter().all(|&m| m == 1.0),
        format!("trivial solution u0 = -(1+pi/4), m0 = 1: residual {r:.3e} (tol 1e-12)"),
    );
}

/// Runs criteria 2, 3 and 4, which share the reference runs.
fn criteria_2_3_4(ledger: &mut Ledger) {
    let p128 = reference_problem(1, 128, CouplingSign::PaperLiteral);
    let (path, t1) = run(&p128);
    let p2d = reference_problem(2, 64, CouplingSign::PaperLiteral);
    let (path2d, t2) = run(&p2d);

    let path_ok = |p: &SolvePath| {
        p.reached_one() && p.last().unwrap().residual < 1e-10 && p.points.iter().all(|q| q.min_m > 1e-3)
    };
    let min_m = path.points.iter().map(|q| q.min_m).fold(f64::INFINITY, f64::min);
    ledger.record(
        2,
        path_ok(&path) && path_ok(&path2d) && t1 < Duration::from_secs(30) && t2 < Duration::from_secs(300),
        format!(
            "continuation to lambda=1: 1D n=128 final residual {:.3e} (tol 1e-10), path min m {:.4} (> 1e-3), \
             {:.2?} (< 30 s); 2D n=64 reached_one={} residual {:.3e}, {:.2?} (< 300 s)",
            path.last().unwrap().residual,
            min_m,
            t1,
            path2d.reached_one(),
            path2d.last().unwrap().residual,
            t2
        ),
    );

    let worst_mass = path.points.iter().chain(&path2d.points).map(|q| (q.mass - 1.0).abs()).fold(0.0f64, f64::max);
    ledger.record(
        3,
        worst_mass < 1e-10 && !path.points.is_empty(),
        format!(
            "mass conservation over {} accepted states: max |int m - 1| = {worst_mass:.3e} (tol 1e-10)",
            path.points.len() + path2d.points.len()
        ),
    );

    let p64 = reference_problem(1, 64, CouplingSign::PaperLiteral);
    let (path64, _) = run(&p64);
    let e128 = energy_identity(&path.last().unwrap().state, &p128).unwrap().residual;
    let e64 = energy_identity(&path64.last().unwrap().state, &p64).unwrap().residual;
    let ratio = e64 / e128;
    ledger.record(
        4,
        path64.reached_one() && e128 < 1e-3 && (3.2..=4.8).contains(&ratio),
        format!("energy identity residual n=128 {e128:.3e} (tol 1e-3), n=64/n=128 ratio {ratio:.3} (in [3.2, 4.8])"),
    );
}

fn criterion_5(ledger: &mut Ledger) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let (dim, n) = if trial % 4 == 3 { (2, 12) } else { (1, 32) };
        let sign = if trial % 2 == 0 { CouplingSign::PaperLiteral } else { CouplingSign::Monotone };
        let p = reference_problem(dim, n, sign);
        let g = *p.grid();
        let u = smooth(&g, &mut rng, 0.5);
        let m = smooth(&g, &mut rng, 0.1).map(|v| 1.0 + v);
        let lambda = rng.gen_range(0.0..=1.0);
        let state = MfgState::new(u, m, lambda).unwrap();
        let jac = assemble_jacobian(&state, &p).unwrap();
        let w: Vec<f64> = (0..2 * g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jw = jac.apply(&w);
        let t = 1e-6;
        let f0 = residual(&state.stepped(&w, -t), &p).unwrap().to_vector();
        let f1 = residual(&state.stepped(&w, t), &p).unwrap().to_vector();
        let fd: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| (a - b) / (2.0 * t)).collect();
        let scale = jw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        worst = worst.max(sup_diff(&jw, &fd) / scale);
    }

    let p = reference_problem(1, 128, CouplingSign::PaperLiteral);
    let (path, _) = run(&p);
    let solved = &path.last().unwrap().state;
    let g = *p.grid();
    let bump = g.sample(|x| (2.0 * PI * x[0]).sin());
    let init =
        MfgState::new(solved.u.zip_map(&bump, |a, b| a + 0.5 * b), solved.m.zip_map(&bump, |a, b| a + 0.2 * b), 1.0)
            .unwrap();
    let out = newton_solve(&init, 1.0, &p, &NewtonConfig::default()).unwrap();
    let h = &out.residual_history;
    // Late iterations: those starting from a residual below 0.1.
    let ratios: Vec<f64> = h.windows(2).filter(|w| w[0] < 1e-1).map(|w| w[1].ln() / w[0].ln()).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ledger.record(
        5,
        worst < 1e-6 && !ratios.is_empty() && min_ratio >= 1.8,
        format!(
            "jacobian vs central differences over 20 states: max rel err {worst:.3e} (tol 1e-6); \
             newton residuals {}, min late log-ratio {min_ratio:.3} (>= 1.8)",
            sci_list(h)
        ),
    );
}

fn criteria_6_7(ledger: &mut Ledger) {
    let p = reference_problem(1, 128, CouplingSign::Monotone);
    let (path, _) = run(&p);
    let a = path.last().unwrap().state.clone();

    // Distinct start: the lambda=0 solution, taken straight to lambda = 1.
    let cold = newton_solve(&p.trivial_state().unwrap(), 1.0, &p, &NewtonConfig::default());
    // Another one: a strongly perturbed density with the mass kept at one.
    let g = *p.grid();
    let warp = MfgState::new(
        g.sample(|x| 2.0 * (4.0 * PI * x[0]).cos()),
        g.sample(|x| 1.0 + 0.6 * (2.0 * PI * x[0]).cos()),
        1.0,
    )
    .unwrap();
    let far = newton_solve(&warp, 1.0, &p, &NewtonConfig::default());
    let literal = run(&reference_problem(1, 128, CouplingSign::PaperLiteral)).0;

    let mut diffs = Vec::new();
    let mut ok = path.reached_one() && literal.reached_one();
    for out in [&cold, &far] {
        match out {
            Ok(o) => diffs.push(sup_diff(&a.to_vector(), &o.state.to_vector())),
            Err(_) => ok = false,
        }
    }
    diffs.push(sup_diff(&a.to_vector(), &literal.last().unwrap().state.to_vector()));
    let worst = diffs.iter().copied().fold(0.0f64, f64::max);
    ledger.record(
        6,
        ok && worst < 1e-8,
        format!(
            "uniqueness at lambda=1 (monotone): sup distance from continuation solution to cold start, \
             perturbed start, literal-sign path: {} (tol 1e-8)",
            sci_list(&diffs)
        ),
    );

    let check = monotonicity_spot_check(&a, &p, 100, 7).unwrap();
    ledger.record(
        7,
        check.max_value <= 1e-10 && check.strictly_negative,
        format!(
            "monotonicity form over {} random w: max B[w,w] = {:.3e} (<= 1e-10), strictly negative: {}",
            check.samples, check.max_value, check.strictly_negative
        ),
    );
}

fn criterion_8(ledger: &mut Ledger) {
    let gamma = 1.25;
    let gp = conjugate_exponent(gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Legendre round trip, plus an independent golden-section maximization of -v.p - L(v).
    let mut roundtrip = 0.0f64;
    let mut fenchel = 0.0f64;
    let mut brute = 0.0f64;
    for _ in 0..100 {
        let s = rng.gen_range(1e-3..20.0);
        let a = rng.gen_range(0.5..1.5);
        let theta = rng.gen_range(0.0..2.0 * PI);
        let pm = momentum_for_speed(s, a, gp);
        let p = [pm * theta.cos(), pm * theta.sin()];
        let s_back = solve_optimal_speed(pm, a, gp).unwrap();
        roundtrip = roundtrip.max((s_back - s).abs() / s.max(1.0));
        let e = eval_example(a, p, gp).unwrap();
        let v = e.v_opt;
        fenchel =
            fenchel.max((e.h + example_lagrangian(a, v, gp) + v[0] * p[0] + v[1] * p[1]).abs() / e.h.abs().max(1.0));
        let value = |t: f64| t * pm - example_lagrangian(a, [t, 0.0], gp);
        let (mut lo, mut hi) = (0.0, 4.0 * s + 1.0);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let (x1, x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
            if value(x1) < value(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        brute = brute.max((value(0.5 * (lo + hi)) - e.h).abs() / e.h.abs().max(1.0));
    }

    let grid = TorusGrid::new(1, 64).unwrap();
    let a_field = Coefficient::SinBump.sample(&grid);
    let zero_ok = a_field.values().iter().all(|&a| eval_example(a, [0.0, 0.0], gp).unwrap().h == -a);

    let mut fd = 0.0f64;
    let step = 1e-6;
    for _ in 0..100 {
        let a = rng.gen_range(0.5..1.5);
        let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let e = eval_example(a, p, gp).unwrap();
        for i in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[i] += step;
            pm[i] -= step;
            let (ep, em) = (eval_example(a, pp, gp).unwrap(), eval_example(a, pm, gp).unwrap());
            fd = fd.max(((ep.h - em.h) / (2.0 * step) - e.dp_h[i]).abs());
            for j in 0..2 {
                fd = fd.max(((ep.dp_h[j] - em.dp_h[j]) / (2.0 * step) - e.dpp_h[j][i]).abs());
            }
        }
    }

    let model = HamiltonianModel::example(gamma, a_field).unwrap();
    let report = audit_assumptions(&model, 1.0, &SampleBox::for_dim(1)).unwrap();
    let passed = roundtrip < 1e-10
        && fenchel < 1e-10
        && brute < 1e-10
        && zero_ok
        && fd < 1e-6
        && report.alpha_tilde_inf >= 4.0 / gamma;
    ledger.record(
        8,
        passed,
        format!(
            "hamiltonian oracles: speed round trip {roundtrip:.2e}, Fenchel equality {fenchel:.2e}, \
             brute-force sup {brute:.2e} (tol 1e-10); H(x,0) = -a(x) exactly: {zero_ok}; \
             DpH/DppH finite differences {fd:.2e} (tol 1e-6); inf alpha_tilde {:.4} (>= 4/gamma = {:.4})",
            report.alpha_tilde_inf,
            4.0 / gamma
        ),
    );
}

fn criterion_9(ledger: &mut Ledger) {
    let accept = check_parameter_admissibility(1.25, 1.0, 1);
    let reject_gamma = check_parameter_admissibility(1.9, 1.5, 2);
    let reject_alpha = check_parameter_admissibility(1.25, 2.0, 1);
    let names = |a: &congestion_mfg::hamiltonian::Admissibility| a.violations().map(|c| c.name).collect::<Vec<_>>();
    let passed = accept.admissible()
        && !reject_gamma.admissible()
        && names(&reject_gamma).contains(&"gamma_range")
        && !reject_alpha.admissible()
        && names(&reject_alpha).contains(&"alpha_range");
    ledger.record(
        9,
        passed,
        format!(
            "admissibility gate: (1.25,1,1) admissible={}; (1.9,1.5,2) violates {:?}; (1.25,2,1) violates {:?}",
            accept.admissible(),
            names(&reject_gamma),
            names(&reject_alpha)
        ),
    );
}

fn criterion_10(ledger: &mut Ledger) {
    let mut worst = 0.0f64;
    for (dim, n) in [(1, 128), (2, 32)] {
        let p = reference_problem(dim, n, CouplingSign::PaperLiteral);
        for c in [0.25, 0.8, 1.0, 3.5] {
            let state = MfgState::new(p.grid().constant(-1.0), p.grid().constant(c), 1.0).unwrap();
            let opts = SuiteOptions::default();
            let r = estimate_suite(&state, &p, &opts).unwrap();
            worst = worst.max((r.entropy.0 - c * c.ln()).abs());
            assert_eq!(r.inverse_moments.len(), opts.r_list.len());
            for &(_, v) in &r.inverse_moments {
                worst = worst.max((v - 1.0 / c).abs());
            }
        }
    }
    ledger.record(
        10,
        worst < 1e-12,
        format!("closed forms on m = c: max |entropy - c log c|, |‖1/m‖_r - 1/c| = {worst:.3e} (tol 1e-12)"),
    );
}

fn shared_runs() -> &'static Outcomes {
    static CELL: OnceLock<Outcomes> = OnceLock::new();
    CELL.get_or_init(|| evaluate(criteria_2_3_4))
}

fn monotone_runs() -> &'static Outcomes {
    static CELL: OnceLock<Outcomes> = OnceLock::new();
    CELL.get_or_init(|| evaluate(criteria_6_7))
}

#[test]
fn criterion_01_trivial_solution() {
    check(&evaluate(criterion_1), 1);
}

#[test]
fn criterion_02_full_continuation() {
    check(shared_runs(), 2);
}

#[test]
fn criterion_03_mass_conservation() {
    check(shared_runs(), 3);
}

#[test]
fn criterion_04_energy_identity_convergence() {
    check(shared_runs(), 4);
}

#[test]
fn criterion_05_jacobian_fidelity() {
    check(&evaluate(criterion_5), 5);
}

#[test]
fn criterion_06_monotone_uniqueness() {
    check(monotone_runs(), 6);
}

#[test]
fn criterion_07_monotonicity_form() {
    check(monotone_runs(), 7);
}

#[test]
fn criterion_08_hamiltonian_oracles() {
    check(&evaluate(criterion_8), 8);
}

#[test]
fn criterion_09_admissibility_gate() {
    check(&evaluate(criterion_9), 9);
}

#[test]
fn criterion_10_diagnostics_closed_forms() {
    check(&evaluate(criterion_10), 10);
}
