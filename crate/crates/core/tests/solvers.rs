use std::f64::consts::FRAC_PI_3;

use dmp_core::assembly::{load_vector, Load};
use dmp_core::generators::{defect_mesh, embed_degenerate, rhombus_mesh, three_line_mesh, Cut, DefectSpec, DegenerateSpec, Placement, RhombusConvention, RhombusSpec};
use dmp_core::linalg::Lu;
use dmp_core::mesh::{classify_boundary, ring};
use dmp_core::solvers::{
    boundary_influence, empirical_dmp_test, empirical_semilinear_test, greens_column, restrict_to_subdomain, solve_linear, solve_semilinear,
    trial_data, validate_reaction, LinearReaction, NewtonOptions, Reaction, SolverError, TableReaction, TanhReaction, TrialMode, TrialOptions,
    ViolationKind,
};
use dmp_core::{Mesh, System};

fn acute(n: usize) -> Mesh {
    rhombus_mesh(&RhombusSpec::uniform(FRAC_PI_3, n, Cut::Short, RhombusConvention::Centered).trimmed()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn constants_are_preserved() {
    let m = acute(4);
    let sys = System::new(&m, 0.0).unwrap();
    let n = m.num_vertices();
    let u = solve_linear(&sys, &vec![0.0; n], &vec![0.7; n]).unwrap();
    assert!(u.values.iter().all(|v| (v - 0.7).abs() < 1e-13));
    assert!(u.residual < 1e-13);
}

#[test]
fn affine_data_is_reproduced() {
    let m = acute(5);
    let sys = System::new(&m, 0.0).unwrap();
    let n = m.num_vertices();
    let affine: Vec<f64> = m.vertices().iter().map(|p| 0.3 * p[0] - 1.2 * p[1] + 0.5).collect();
    let u = solve_linear(&sys, &vec![0.0; n], &affine).unwrap();
    assert!(max_diff(&u.values, &affine) < 1e-12);
}

#[test]
fn three_line_corners_do_not_influence() {
    let t = three_line_mesh::<f64>(5).unwrap();
    let sys = System::new(&t, 0.0).unwrap();
    let n = t.num_vertices();
    let (f, g) = trial_data::<f64>(&sys.partition, 3, 5, false);
    let base = solve_linear(&sys, &f, &g).unwrap().values;
    let mut g2 = g.clone();
    for corner in [0, 5, 30, 35] {
        g2[corner] += 10.0;
    }
    let moved = solve_linear(&sys, &f, &g2).unwrap().values;
    for &i in &sys.partition.interior {
        assert!((base[i] - moved[i]).abs() < 1e-12);
    }
    let influence = boundary_influence(&sys).unwrap();
    for (col, &b) in sys.partition.boundary.iter().enumerate() {
        let zero = (0..influence.rows()).all(|r| influence[(r, col)].abs() < 1e-14);
        assert_eq!(zero, [0, 5, 30, 35].contains(&b), "boundary vertex {b}");
    }
    assert_eq!(n, 36);
}

#[test]
fn influence_rows_sum_to_one_without_reaction() {
    let m = acute(4);
    let inf = boundary_influence(&System::new(&m, 0.0).unwrap()).unwrap();
    for r in inf.to_rows() {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let damped = boundary_influence(&System::new(&m, 5.0).unwrap()).unwrap();
    for r in damped.to_rows() {
        assert!(r.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}

#[test]
fn greens_columns_are_inverse_columns() {
    let d = defect_mesh(&DefectSpec::four_g1()).unwrap();
    let sys = System::new(d.mesh(), 0.0).unwrap();
    let inv = Lu::factor(&sys.interior_block()).unwrap().inverse();
    let p = &sys.partition;
    for (k, &src) in p.interior.iter().enumerate().step_by(7) {
        let g = greens_column(&sys, src).unwrap();
        for (r, &i) in p.interior.iter().enumerate() {
            assert!((g[i] - inv[(r, k)]).abs() < 1e-13);
            assert!(g[i] > 0.0);
        }
        assert!(p.boundary.iter().all(|&b| g[b] == 0.0));
    }
    assert!(greens_column(&sys, p.boundary[0]).is_err());
}

#[test]
fn green_sign_at_n() {
    let at = embed_degenerate(&DegenerateSpec { alpha: 0.05, placement: Placement::AtBoundary, n: 8 }).unwrap();
    let sys = System::new(&at.mesh, 0.0).unwrap();
    let g = greens_column(&sys, at.vertices.p).unwrap();
    assert!(g[at.vertices.n] < -1e-12);
}

#[test]
fn input_lengths_are_checked() {
    let m = acute(3);
    let sys = System::new(&m, 0.0).unwrap();
    assert!(matches!(solve_linear(&sys, &[0.0], &[0.0]), Err(SolverError::InvalidInput(_))));
}

#[test]
fn newton_reduces_to_linear() {
    let m = acute(5);
    let n = m.num_vertices();
    let linear = System::new(&m, 2.0).unwrap();
    let plain = System::new(&m, 0.0).unwrap();
    for t in 1..6 {
        let (f, g) = trial_data::<f64>(&plain.partition, 11, t, false);
        let a = solve_linear(&linear, &f, &g).unwrap().values;
        let b = solve_semilinear(&m, &plain, &LinearReaction(2.0), &f, &g, &NewtonOptions::default()).unwrap();
        assert!(max_diff(&a, &b.values) < 1e-10);
        assert!(b.iterations <= 2);
    }
    let zero = solve_semilinear(&m, &plain, &TanhReaction(3.0), &vec![0.0; n], &vec![0.0; n], &NewtonOptions::default()).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
}

/// Picard iteration `A_aa u_a = F_a - A_ab g_b - [M c(u)]_a`, contractive for a small reaction.
fn picard(m: &Mesh, sys: &System, r: &dyn Reaction<f64>, f: &[f64], g: &[f64]) -> Vec<f64> {
    let x = m.vertices();
    let mut u = g.to_vec();
    for _ in 0..500 {
        let cu: Vec<f64> = (0..u.len()).map(|k| r.value(x[k], u[k])).collect();
        let mc = sys.mass.mul_vec(&cu).unwrap();
        let rhs: Vec<f64> = f.iter().zip(&mc).map(|(a, b)| a - b).collect();
        let next = solve_linear(sys, &rhs, g).unwrap().values;
        let done = max_diff(&next, &u) < 1e-14;
        u = next;
        if done {
            break;
        }
    }
    u
}

#[test]
fn newton_matches_picard() {
    let m = acute(5);
    let sys = System::new(&m, 0.0).unwrap();
    let reaction = TanhReaction(1.0);
    for t in [1, 2, 3, 9] {
        let (f0, g) = trial_data::<f64>(&sys.partition, 5, t, false);
        let f = load_vector(&sys.mass, &Load::Nodal(f0.iter().map(|v| 20.0 * v).collect())).unwrap();
        let newton = solve_semilinear(&m, &sys, &reaction, &f, &g, &NewtonOptions::default()).unwrap();
        let fixed = picard(&m, &sys, &reaction, &f, &g);
        assert!(max_diff(&newton.values, &fixed) < 1e-8);
        assert!(newton.residual < 1e-12 * (1.0 + f.iter().fold(0.0f64, |a, v| a.max(v.abs()))));
    }
}

#[test]
fn table_reaction_uses_finite_differences() {
    let m = acute(4);
    let sys = System::new(&m, 0.0).unwrap();
    let table = TableReaction::<f64>::new(vec![(-1.0, -2.0), (0.0, 0.0), (1.0, 1.0), (3.0, 1.5)]).unwrap();
    assert!((table.value([0.0, 0.0], 0.5) - 0.5).abs() < 1e-15);
    assert!((table.value([0.0, 0.0], -2.0) + 4.0).abs() < 1e-15);
    assert_eq!(table.lipschitz(), 2.0);
    validate_reaction(&table, &m, 3.0).unwrap();
    let (f, g) = trial_data::<f64>(&sys.partition, 1, 3, false);
    let u = solve_semilinear(&m, &sys, &table, &f, &g, &NewtonOptions::default()).unwrap();
    assert!(u.residual < 1e-11);
    assert!(TableReaction::new(vec![(0.0, 0.0)]).is_err());
    assert!(TableReaction::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
}

struct Shifted;
impl Reaction<f64> for Shifted {
    fn value(&self, _x: [f64; 2], u: f64) -> f64 {
        u + 0.1
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
}

struct Decreasing;
impl Reaction<f64> for Decreasing {
    fn value(&self, _x: [f64; 2], u: f64) -> f64 {
        -u
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
}

#[test]
fn invalid_reactions_are_rejected() {
    let m = acute(3);
    assert!(matches!(validate_reaction(&Shifted, &m, 1.0), Err(SolverError::InvalidReaction(_))));
    assert!(matches!(validate_reaction(&Decreasing, &m, 1.0), Err(SolverError::InvalidReaction(_))));
    assert!(validate_reaction(&TanhReaction(2.0), &m, 5.0).is_ok());
    assert!(validate_reaction(&LinearReaction(0.5), &m, 5.0).is_ok());
}

#[test]
fn newton_reports_non_convergence() {
    let m = acute(4);
    let sys = System::new(&m, 0.0).unwrap();
    let (f, g) = trial_data::<f64>(&sys.partition, 1, 3, false);
    let opts = NewtonOptions { max_iterations: 1, rel_tol: 1e-30, max_halvings: 2 };
    assert!(matches!(solve_semilinear(&m, &sys, &TanhReaction(5.0), &f, &g, &opts), Err(SolverError::NoConvergence { .. })));
}

#[test]
fn trial_data_is_deterministic() {
    let p = classify_boundary(&acute(4));
    assert_eq!(trial_data::<f64>(&p, 9, 17, false), trial_data::<f64>(&p, 9, 17, false));
    assert_ne!(trial_data::<f64>(&p, 9, 17, false), trial_data::<f64>(&p, 9, 18, false));
    let (f, _) = trial_data::<f64>(&p, 9, 4, false);
    assert!(f.iter().all(|&v| v == 0.0));
    let (_, g) = trial_data::<f64>(&p, 9, 8, false);
    let first = g[p.boundary[0]];
    assert!(p.boundary.iter().all(|&b| g[b] == first));
    let (f, g) = trial_data::<f64>(&p, 9, 0, true);
    assert_eq!(f[p.interior[0]], 1.0);
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn trials_reproduce_with_any_thread_count() {
    let sys = System::new(&acute(5), 1.0).unwrap();
    let opts = TrialOptions { trials: 200, seed: 42, ..TrialOptions::default() };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| empirical_dmp_test(&sys, TrialMode::SdmpB, &opts).unwrap());
    let b = empirical_dmp_test(&sys, TrialMode::SdmpB, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
}

#[test]
fn three_line_trials() {
    let sys = System::new(&three_line_mesh(5).unwrap(), 0.0).unwrap();
    let opts = TrialOptions { trials: 400, seed: 1, ..TrialOptions::default() };
    assert!(empirical_dmp_test(&sys, TrialMode::WdmpA, &opts).unwrap().passed());
    let strong = empirical_dmp_test(&sys, TrialMode::SdmpA, &TrialOptions { adversarial: true, ..opts }).unwrap();
    assert!(strong.violations.iter().all(|v| v.kind == ViolationKind::StrongNonConstant));
}

#[test]
fn adversarial_trials_break_the_at_boundary_mesh() {
    let at = embed_degenerate(&DegenerateSpec { alpha: 0.05, placement: Placement::AtBoundary, n: 8 }).unwrap();
    let sys = System::new(&at.mesh, 0.0).unwrap();
    let opts = TrialOptions { trials: 100, seed: 7, adversarial: true, ..TrialOptions::default() };
    let r = empirical_dmp_test(&sys, TrialMode::WdmpA, &opts).unwrap();
    assert!(r.violations.iter().any(|v| v.kind == ViolationKind::WeakBound && v.vertex == at.vertices.n));
    assert!(r.min_margin < 0.0);
}

#[test]
fn semilinear_trials_on_acute_mesh() {
    let m = acute(5);
    let sys = System::new(&m, 0.0).unwrap();
    let opts = TrialOptions { trials: 100, seed: 3, ..TrialOptions::default() };
    let r = empirical_semilinear_test(&m, &sys, &TanhReaction(1.0), TrialMode::SdmpB, &opts).unwrap();
    assert!(r.passed(), "{:?}", r.violations.first());
    assert!(empirical_semilinear_test(&m, &sys, &TanhReaction(1.0), TrialMode::SdmpA, &opts).is_err());
}

#[test]
fn restriction_commutes_with_solving() {
    let m = acute(6);
    let sys = System::new(&m, 0.0).unwrap();
    let (f, g) = trial_data::<f64>(&sys.partition, 2, 5, false);
    let u = solve_linear(&sys, &f, &g).unwrap().values;
    let centre = sys.partition.interior[sys.partition.interior.len() / 2];
    let sub = ring(&m, centre, 2).unwrap();
    let (fs, gs) = restrict_to_subdomain(&sub, &f, &u);
    let local = solve_linear(&System::new(&sub.mesh, 0.0).unwrap(), &fs, &gs).unwrap().values;
    for (l, &v) in local.iter().enumerate() {
        assert!((v - u[sub.to_parent(l)]).abs() < 1e-12);
    }

    let tanh = TanhReaction(1.0);
    let us = solve_semilinear(&m, &sys, &tanh, &f, &g, &NewtonOptions::default()).unwrap().values;
    let (fs, gs) = restrict_to_subdomain(&sub, &f, &us);
    let sub_sys = System::new(&sub.mesh, 0.0).unwrap();
    let local = solve_semilinear(&sub.mesh, &sub_sys, &tanh, &fs, &gs, &NewtonOptions::default()).unwrap().values;
    for (l, &v) in local.iter().enumerate() {
        assert!((v - us[sub.to_parent(l)]).abs() < 1e-10);
    }
}
