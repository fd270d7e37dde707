//! Linear and semilinear discrete solves, discrete Green's functions and
//! randomized maximum-principle trials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{AssembledSystem, AssemblyError};
use crate::linalg::{DenseMatrix, LinalgError, Lu};
use crate::mesh::{IndexPartition, Subdomain, TriMesh};
use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid reaction: {0}")]
    InvalidReaction(String),
    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Nodal solution on every vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution<T> {
    pub values: Vec<T>,
    /// Max-norm of the interior residual.
    pub residual: T,
    pub iterations: usize,
}

fn check_len<T>(v: &[T], n: usize, what: &str) -> Result<(), SolverError> {
    if v.len() != n {
        return Err(SolverError::InvalidInput(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

fn max_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Factorized `(A + C)_aa` for repeated linear solves.
#[derive(Debug, Clone)]
pub struct LinearSolver<T> {
    lu: Lu<T>,
    operator: DenseMatrix<T>,
    partition: IndexPartition,
}

impl<T: Real> LinearSolver<T> {
    pub fn new(system: &AssembledSystem<T>) -> Result<Self, SolverError> {
        Ok(Self { lu: Lu::factor(&system.interior_block())?, operator: system.operator().clone(), partition: system.partition.clone() })
    }

    /// Solves `(A + C)_aa u_a = F_a - (A + C)_ab g_b`.
    ///
    /// `f_dual` and `g` are full-length vectors; only the interior entries of
    /// `f_dual` and the boundary entries of `g` are read.
    pub fn solve(&self, f_dual: &[T], g: &[T]) -> Result<Solution<T>, SolverError> {
        let n = self.partition.num_vertices();
        check_len(f_dual, n, "load")?;
        check_len(g, n, "boundary data")?;
        let p = &self.partition;
        let rhs: Vec<T> = p
            .interior
            .iter()
            .map(|&i| p.boundary.iter().fold(f_dual[i], |s, &b| s - self.operator[(i, b)] * g[b]))
            .collect();
        let ua = self.lu.solve(&rhs)?;
        let mut values = vec![T::zero(); n];
        for &b in &p.boundary {
            values[b] = g[b];
        }
        for (k, &i) in p.interior.iter().enumerate() {
            values[i] = ua[k];
        }
        let residual = p
            .interior
            .iter()
            .map(|&i| (self.operator.row(i).iter().zip(&values).fold(T::zero(), |s, (&a, &u)| s + a * u) - f_dual[i]).abs())
            .fold(T::zero(), T::max);
        Ok(Solution { values, residual, iterations: 1 })
    }
}

pub fn solve_linear<T: Real>(system: &AssembledSystem<T>, f_dual: &[T], g: &[T]) -> Result<Solution<T>, SolverError> {
    LinearSolver::new(system)?.solve(f_dual, g)
}

/// Column `source` of `(A + C)_aa^{-1}` as a nodal function (zero on the boundary).
pub fn greens_column<T: Real>(system: &AssembledSystem<T>, source: usize) -> Result<Vec<T>, SolverError> {
    let n = system.partition.num_vertices();
    if source >= n || system.partition.is_boundary[source] {
        return Err(SolverError::InvalidInput(format!("source {source} is not an interior vertex")));
    }
    let mut f = vec![T::zero(); n];
    f[source] = T::one();
    Ok(solve_linear(system, &f, &vec![T::zero(); n])?.values)
}

/// `-(A + C)_aa^{-1} (A + C)_ab`.
pub fn boundary_influence<T: Real>(system: &AssembledSystem<T>) -> Result<DenseMatrix<T>, SolverError> {
    let lu = Lu::factor(&system.interior_block())?;
    Ok(lu.solve_matrix(&system.coupling_block())?.scale(-T::one()))
}

/// Reaction term `c(x, u)`, nondecreasing in `u` with `c(x, 0) = 0`.
pub trait Reaction<T: Real>: Send + Sync {
    fn value(&self, x: [T; 2], u: T) -> T;

    /// Exact derivative in `u`, if known.
    fn derivative(&self, _x: [T; 2], _u: T) -> Option<T> {
        None
    }

    /// Lipschitz constant in `u`.
    fn lipschitz(&self) -> T;
}

/// `c(x, u) = c u`.
#[derive(Debug, Clone, Copy)]
pub struct LinearReaction<T>(pub T);

impl<T: Real> Reaction<T> for LinearReaction<T> {
    fn value(&self, _x: [T; 2], u: T) -> T {
        self.0 * u
    }
    fn derivative(&self, _x: [T; 2], _u: T) -> Option<T> {
        Some(self.0)
    }
    fn lipschitz(&self) -> T {
        self.0.abs()
    }
}

/// `c(x, u) = s tanh(u)`.
#[derive(Debug, Clone, Copy)]
pub struct TanhReaction<T>(pub T);

impl<T: Real> Reaction<T> for TanhReaction<T> {
    fn value(&self, _x: [T; 2], u: T) -> T {
        self.0 * u.tanh()
    }
    fn derivative(&self, _x: [T; 2], u: T) -> Option<T> {
        let t = u.tanh();
        Some(self.0 * (T::one() - t * t))
    }
    fn lipschitz(&self) -> T {
        self.0.abs()
    }
}

/// Piecewise linear `c(u)` through tabulated points, extended linearly
/// beyond the ends. The derivative is left to finite differences.
#[derive(Debug, Clone)]
pub struct TableReaction<T> {
    points: Vec<(T, T)>,
}

impl<T: Real> TableReaction<T> {
    /// Needs at least two points with strictly increasing abscissae.
    pub fn new(mut points: Vec<(T, T)>) -> Result<Self, SolverError> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite table"));
        if points.len() < 2 || points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(SolverError::InvalidReaction("table needs two or more distinct abscissae".into()));
        }
        Ok(Self { points })
    }

    fn segment(&self, u: T) -> usize {
        let last = self.points.len() - 2;
        (0..=last).find(|&k| u <= self.points[k + 1].0).unwrap_or(last)
    }
}

impl<T: Real> Reaction<T> for TableReaction<T> {
    fn value(&self, _x: [T; 2], u: T) -> T {
        let k = self.segment(u);
        let ((u0, c0), (u1, c1)) = (self.points[k], self.points[k + 1]);
        c0 + (c1 - c0) * (u - u0) / (u1 - u0)
    }
    fn lipschitz(&self) -> T {
        self.points.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).fold(T::zero(), T::max)
    }
}

/// Spot-checks `c(x, 0) = 0` at every vertex, monotonicity and the Lipschitz
/// bound on a grid of `u` values in `[-range, range]`.
pub fn validate_reaction<T: Real>(reaction: &dyn Reaction<T>, mesh: &TriMesh<T>, range: T) -> Result<(), SolverError> {
    let l = reaction.lipschitz();
    let slack = lit::<T>(1e-9);
    let grid: Vec<T> = (0..=64).map(|k| -range + range * lit::<T>(k as f64 / 32.0)).collect();
    for &x in mesh.vertices() {
        let c0 = reaction.value(x, T::zero());
        if c0.abs() > slack {
            return Err(SolverError::InvalidReaction(format!("c(x, 0) = {c0} at {x:?}")));
        }
        for w in grid.windows(2) {
            let (a, b) = (reaction.value(x, w[0]), reaction.value(x, w[1]));
            if b < a - slack {
                return Err(SolverError::InvalidReaction(format!("c decreases between u = {} and {}", w[0], w[1])));
            }
            if (b - a).abs() > l * (w[1] - w[0]) * (T::one() + slack) + slack {
                return Err(SolverError::InvalidReaction(format!("Lipschitz bound {l} exceeded near u = {}", w[0])));
            }
        }
    }
    Ok(())
}

fn reaction_derivative<T: Real>(r: &dyn Reaction<T>, x: [T; 2], u: T) -> T {
    r.derivative(x, u).unwrap_or_else(|| {
        let h = lit::<T>(1e-6) * (T::one() + u.abs());
        (r.value(x, u + h) - r.value(x, u - h)) / (h + h)
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NewtonOptions<T> {
    pub max_iterations: usize,
    /// Converged when `|R|_max < rel_tol (1 + |F|_max)`.
    pub rel_tol: T,
    pub max_halvings: usize,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self { max_iterations: 50, rel_tol: lit(1e-12), max_halvings: 30 }
    }
}

/// Damped Newton for `A_aa U_a + A_ab U_b + [M c(U)]_a = F_a` with
/// `U_b = g_b`. The reaction is integrated through the consistent mass
/// matrix applied to nodal values of `c`; `system.reaction` is ignored.
pub fn solve_semilinear<T: Real>(
    mesh: &TriMesh<T>,
    system: &AssembledSystem<T>,
    reaction: &dyn Reaction<T>,
    f_dual: &[T],
    g: &[T],
    opts: &NewtonOptions<T>,
) -> Result<Solution<T>, SolverError> {
    let n = mesh.num_vertices();
    check_len(f_dual, n, "load")?;
    check_len(g, n, "boundary data")?;
    let p = &system.partition;
    let (a, m) = (&system.stiffness, &system.mass);
    let x = mesh.vertices();
    let residual = |u: &[T]| -> Vec<T> {
        let cu: Vec<T> = (0..n).map(|k| reaction.value(x[k], u[k])).collect();
        p.interior
            .iter()
            .map(|&i| {
                let au = a.row(i).iter().zip(u).fold(T::zero(), |s, (&aij, &uj)| s + aij * uj);
                let mc = m.row(i).iter().zip(&cu).fold(T::zero(), |s, (&mij, &cj)| s + mij * cj);
                au + mc - f_dual[i]
            })
            .collect()
    };
    // start from the reaction-free solution
    let free = AssembledSystem::from_parts(a.clone(), m.clone(), T::zero(), p.clone(), system.mesh_size);
    let mut u = solve_linear(&free, f_dual, g)?.values;
    let tol = opts.rel_tol * (T::one() + max_norm(&p.interior.iter().map(|&i| f_dual[i]).collect::<Vec<_>>()));
    let mut r = residual(&u);
    let mut rnorm = max_norm(&r);
    for it in 0..opts.max_iterations {
        if rnorm < tol {
            return Ok(Solution { values: u, residual: rnorm, iterations: it });
        }
        let jac = DenseMatrix::from_fn(p.interior.len(), p.interior.len(), |r_, c_| {
            let (i, j) = (p.interior[r_], p.interior[c_]);
            a[(i, j)] + m[(i, j)] * reaction_derivative(reaction, x[j], u[j])
        });
        let step = Lu::factor(&jac)?.solve(&r.iter().map(|&v| -v).collect::<Vec<_>>())?;
        let mut lambda = T::one();
        let mut halvings = 0;
        loop {
            let mut trial = u.clone();
            for (k, &i) in p.interior.iter().enumerate() {
                trial[i] = u[i] + lambda * step[k];
            }
            let rt = residual(&trial);
            let tn = max_norm(&rt);
            if tn <= rnorm || halvings >= opts.max_halvings {
                log::debug!("newton step {it}: damping {lambda}, residual {tn}");
                u = trial;
                r = rt;
                rnorm = tn;
                break;
            }
            lambda = lambda / lit(2.0);
            halvings += 1;
        }
    }
    if rnorm < tol {
        return Ok(Solution { values: u, residual: rnorm, iterations: opts.max_iterations });
    }
    Err(SolverError::NoConvergence { iterations: opts.max_iterations, residual: crate::scalar::to_f64(rnorm) })
}

/// Data for a subproblem on `sub`: the parent load on the subdomain's
/// interior vertices and the parent solution as boundary data.
pub fn restrict_to_subdomain<T: Real>(sub: &Subdomain<T>, f_dual_parent: &[T], u_parent: &[T]) -> (Vec<T>, Vec<T>) {
    let n = sub.mesh.num_vertices();
    let mut f = vec![T::zero(); n];
    let mut g = vec![T::zero(); n];
    for l in 0..n {
        let p = sub.to_parent(l);
        if sub.partition.is_boundary[l] {
            g[l] = u_parent[p];
        } else {
            f[l] = f_dual_parent[p];
        }
    }
    (f, g)
}

/// Which principle a randomized trial checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialMode {
    WdmpA,
    SdmpA,
    WdmpB,
    SdmpB,
}

impl TrialMode {
    fn strong(self) -> bool {
        matches!(self, TrialMode::SdmpA | TrialMode::SdmpB)
    }
    fn with_reaction(self) -> bool {
        matches!(self, TrialMode::WdmpB | TrialMode::SdmpB)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialOptions {
    pub trials: usize,
    pub seed: u64,
    /// Allowed undershoot of the weak bound.
    pub tol: f64,
    /// Tolerance for "attains the minimum" and "is constant".
    pub strong_tol: f64,
    /// Start with unit sources at every interior vertex and zero boundary data.
    pub adversarial: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { trials: 1000, seed: 0, tol: 1e-10, strong_tol: 1e-12, adversarial: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// An interior value below the weak bound.
    WeakBound,
    /// Interior attainment of the minimum by a non-constant solution.
    StrongNonConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub trial: usize,
    pub kind: ViolationKind,
    pub vertex: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub mode: TrialMode,
    pub trials: usize,
    pub seed: u64,
    pub violations: Vec<Violation>,
    /// Smallest `min u - bound` over all trials.
    pub min_margin: f64,
    /// Trials whose solve failed.
    pub failed_solves: Vec<usize>,
}

impl TrialReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.failed_solves.is_empty()
    }
}

/// Source and boundary data of trial `t`. Every fourth trial has no source and
/// every eighth has constant boundary data.
pub fn trial_data<T: Real>(partition: &IndexPartition, seed: u64, t: usize, adversarial: bool) -> (Vec<T>, Vec<T>) {
    let n = partition.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let mut f = vec![T::zero(); n];
    let mut g = vec![T::zero(); n];
    if adversarial && t < partition.interior.len() {
        f[partition.interior[t]] = T::one();
        return (f, g);
    }
    if t % 4 != 0 {
        for &i in &partition.interior {
            f[i] = lit(rng.gen_range(0.0..=1.0));
        }
    }
    if t % 8 == 0 {
        let c: f64 = rng.gen_range(-1.0..=1.0);
        for &b in &partition.boundary {
            g[b] = lit(c);
        }
    } else {
        for &b in &partition.boundary {
            g[b] = lit(rng.gen_range(-1.0..=1.0));
        }
    }
    (f, g)
}

fn judge(partition: &IndexPartition, u: &[f64], g: &[f64], mode: TrialMode, opts: &TrialOptions, t: usize) -> (Vec<Violation>, f64) {
    let boundary_min = partition.boundary.iter().map(|&b| g[b]).fold(f64::INFINITY, f64::min);
    let bound = if mode.with_reaction() {
        -partition.boundary.iter().map(|&b| (-g[b]).max(0.0)).fold(0.0, f64::max)
    } else {
        boundary_min
    };
    let mut out = Vec::new();
    let mut margin = f64::INFINITY;
    for &i in &partition.interior {
        margin = margin.min(u[i] - bound);
        if u[i] < bound - opts.tol {
            out.push(Violation { trial: t, kind: ViolationKind::WeakBound, vertex: i, value: u[i], bound });
        }
    }
    if mode.strong() {
        let global_min = u.iter().copied().fold(f64::INFINITY, f64::min);
        let global_max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let applies = !mode.with_reaction() || global_min <= opts.strong_tol;
        if applies && global_max - global_min > opts.strong_tol {
            if let Some(&i) = partition.interior.iter().find(|&&i| u[i] <= global_min + opts.strong_tol) {
                out.push(Violation { trial: t, kind: ViolationKind::StrongNonConstant, vertex: i, value: u[i], bound: global_min });
            }
        }
    }
    (out, margin)
}

fn collect(mode: TrialMode, opts: &TrialOptions, results: Vec<Result<(Vec<Violation>, f64), usize>>) -> TrialReport {
    let mut report = TrialReport { mode, trials: opts.trials, seed: opts.seed, violations: Vec::new(), min_margin: f64::INFINITY, failed_solves: Vec::new() };
    for r in results {
        match r {
            Ok((v, m)) => {
                report.violations.extend(v);
                report.min_margin = report.min_margin.min(m);
            }
            Err(t) => report.failed_solves.push(t),
        }
    }
    report
}

/// Randomized linear trials. Weak and strong `A` modes use the stiffness
/// alone; `B` modes include the system's reaction.
pub fn empirical_dmp_test(system: &AssembledSystem<f64>, mode: TrialMode, opts: &TrialOptions) -> Result<TrialReport, SolverError> {
    let sys = if mode.with_reaction() {
        system.clone()
    } else {
        AssembledSystem::from_parts(system.stiffness.clone(), system.mass.clone(), 0.0, system.partition.clone(), system.mesh_size)
    };
    let solver = LinearSolver::new(&sys)?;
    let p = &system.partition;
    let results = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let (f, g) = trial_data::<f64>(p, opts.seed, t, opts.adversarial);
            let u = solver.solve(&f, &g).map_err(|_| t)?;
            Ok(judge(p, &u.values, &g, mode, opts, t))
        })
        .collect();
    Ok(collect(mode, opts, results))
}

/// Randomized semilinear trials checked against the bounds of `mode`
/// (`WdmpB` or `SdmpB`).
pub fn empirical_semilinear_test(
    mesh: &TriMesh<f64>,
    system: &AssembledSystem<f64>,
    reaction: &dyn Reaction<f64>,
    mode: TrialMode,
    opts: &TrialOptions,
) -> Result<TrialReport, SolverError> {
    if !mode.with_reaction() {
        return Err(SolverError::InvalidInput("semilinear trials use the reaction bounds (wdmp-b or sdmp-b)".into()));
    }
    let p = &system.partition;
    let newton = NewtonOptions::default();
    let results = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let (f, g) = trial_data::<f64>(p, opts.seed, t, opts.adversarial);
            let u = solve_semilinear(mesh, system, reaction, &f, &g, &newton).map_err(|_| t)?;
            Ok(judge(p, &u.values, &g, mode, opts, t))
        })
        .collect();
    Ok(collect(mode, opts, results))
}
