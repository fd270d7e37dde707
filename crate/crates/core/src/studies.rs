//! Parameter sweeps and matrix studies on defective meshes.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{barycentric_gradients, stiffness_gradient, AssembledSystem, AssemblyError};
use crate::certify::{bisect, check_sdmp_a};
use crate::generators::{degenerate_patch, embed_degenerate, gk_patch, three_line_mesh, DegenerateSpec, Placement};
use crate::linalg::{condition_inf, invert, singular_values, DenseMatrix, LinalgError, Lu};
use crate::mesh::{signed_area, MeshError};
use crate::scalar::ratio;
use crate::solvers::{greens_column, SolverError};
use crate::{Matrix, RationalMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `count` points equally spaced in `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// `count` points equally spaced in `log` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    linear_grid(lo.ln(), hi.ln(), count).into_iter().map(f64::exp).collect()
}

/// Smallest entry of `A_aa^{-1}` for `G_k(theta)` and the direct strong verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GkRecord {
    pub k: usize,
    pub theta: f64,
    pub min_entry: f64,
    pub argmin: (usize, usize),
    pub certified: bool,
}

pub fn gk_record(k: usize, theta: f64) -> Result<GkRecord, StudyError> {
    let mesh = gk_patch::<f64>(k, theta)?;
    let sys = AssembledSystem::new(&mesh, 0.0)?;
    let inv = Lu::factor(&sys.interior_block())?.inverse();
    let (min_entry, argmin) = inv.min_entry().expect("G_k has interior vertices");
    Ok(GkRecord { k, theta, min_entry, argmin, certified: check_sdmp_a(&sys, 1e-12).passed })
}

/// Every `(k, theta)` combination, in input order.
pub fn sweep_gk(ks: &[usize], thetas: &[f64]) -> Result<Vec<GkRecord>, StudyError> {
    let jobs: Vec<(usize, f64)> = ks.iter().flat_map(|&k| thetas.iter().map(move |&t| (k, t))).collect();
    jobs.par_iter().map(|&(k, t)| gk_record(k, t)).collect()
}

/// Angle interval on which the smallest inverse entry changes sign from
/// nonpositive to positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignChange {
    pub k: usize,
    pub below: f64,
    pub above: f64,
}

/// Scans `thetas` for the first nonpositive-to-positive transition of the
/// smallest inverse entry and bisects it down to `tol` radians.
pub fn gk_sign_change(k: usize, thetas: &[f64], tol: f64) -> Result<Option<SignChange>, StudyError> {
    let positive = |t: f64| -> Result<bool, StudyError> { Ok(gk_record(k, t)?.min_entry > 0.0) };
    let mut prev: Option<(f64, bool)> = None;
    for &t in thetas {
        let pos = positive(t)?;
        if let Some((tp, false)) = prev {
            if pos {
                // bisect treats "pass" as nonpositive here
                let (below, above) = bisect(tp, t, tol, 0.0, |x| positive(x).map(|p| !p))?;
                return Ok(Some(SignChange { k, below, above }));
            }
        }
        prev = Some((t, pos));
    }
    Ok(None)
}

/// `S(alpha)` of the degenerate patch in the order `B, C, A, M, N, P`.
pub fn degenerate_block(alpha: f64) -> Result<Matrix, StudyError> {
    let dp = degenerate_patch::<f64>(alpha)?;
    let a = stiffness_gradient(&dp.patch.mesh)?;
    Ok(a.submatrix(&dp.order, &dp.order)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateRecord {
    pub alpha: f64,
    pub min_entry: f64,
    pub argmin: (usize, usize),
    pub condition: f64,
}

pub fn sweep_degenerate(alphas: &[f64]) -> Result<Vec<DegenerateRecord>, StudyError> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let s = degenerate_block(alpha)?;
            let inv = Lu::factor(&s)?.inverse();
            let (min_entry, argmin) = inv.min_entry().expect("6x6");
            Ok(DegenerateRecord { alpha, min_entry, argmin, condition: condition_inf(&s)? })
        })
        .collect()
}

/// Exact constant blocks of the hierarchical splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitBlocks {
    /// Coarse-coarse stiffness block (rows and columns `B, C, A`).
    pub a: RationalMatrix,
    /// Coarse-fine block (rows `B, C, A`, columns `M, N, P`).
    pub b: RationalMatrix,
    /// Leading term of `tan(alpha)` times the fine-fine block.
    pub c0: RationalMatrix,
    /// Limit of the coarse hat values at `M, N, P`.
    pub r0: RationalMatrix,
}

impl LimitBlocks {
    pub fn new() -> Self {
        let m = |rows: [[(i64, i64); 3]; 3]| {
            RationalMatrix::from_rows(&rows.map(|r| r.map(|(p, q)| ratio(p, q)).to_vec())).expect("3x3")
        };
        Self {
            a: m([[(4, 1), (-1, 1), (-1, 1)], [(-1, 1), (4, 1), (0, 1)], [(-1, 1), (0, 1), (4, 1)]]),
            b: m([[(1, 2), (0, 1), (0, 1)], [(1, 2), (0, 1), (0, 1)], [(-1, 2), (0, 1), (0, 1)]]),
            c0: m([[(3, 2), (-1, 1), (-1, 1)], [(-1, 1), (5, 4), (1, 4)], [(-1, 1), (1, 4), (5, 4)]]),
            r0: m([[(1, 2), (3, 4), (1, 4)], [(1, 2), (1, 4), (3, 4)], [(0, 1), (0, 1), (0, 1)]]),
        }
    }

    /// Exact `A^{-1}`, `A^{-1} R0`, `R0^T A^{-1} R0`, `C0^{-1}` and the
    /// limit matrix `T0`.
    pub fn exact_limit(&self) -> Result<ExactLimit, LinalgError> {
        let a_inv = Lu::factor(&self.a)?.inverse();
        let a_inv_r0 = a_inv.matmul(&self.r0)?;
        let r0t_a_inv_r0 = self.r0.transpose().matmul(&a_inv_r0)?;
        let c0_inv = Lu::factor(&self.c0)?.inverse();
        let r0t_a_inv = a_inv_r0.transpose();
        let t0 = RationalMatrix::from_fn(6, 6, |i, j| match (i < 3, j < 3) {
            (true, true) => a_inv[(i, j)],
            (true, false) => a_inv_r0[(i, j - 3)],
            (false, true) => r0t_a_inv[(i - 3, j)],
            (false, false) => r0t_a_inv_r0[(i - 3, j - 3)],
        });
        Ok(ExactLimit { a_inv, a_inv_r0, r0t_a_inv_r0, c0_inv, t0 })
    }
}

impl Default for LimitBlocks {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactLimit {
    pub a_inv: RationalMatrix,
    pub a_inv_r0: RationalMatrix,
    pub r0t_a_inv_r0: RationalMatrix,
    pub c0_inv: RationalMatrix,
    pub t0: RationalMatrix,
}

/// All matrices of the hierarchical analysis at one `alpha`.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchicalBundle {
    pub alpha: f64,
    /// Nodal stiffness block, order `B, C, A, M, N, P`.
    pub s: Matrix,
    /// Stiffness in the hierarchical basis (coarse hats of `B, C, A`, fine hats of `M, N, P`).
    pub s_tilde: Matrix,
    /// `[[I, -R], [0, I]]` with `R[X][Y]` the coarse hat of `X` at `Y`.
    pub e: Matrix,
    /// Blocks of `s_tilde`.
    pub block_a: Matrix,
    pub block_b: Matrix,
    pub block_c: Matrix,
    /// `-B C^{-1}` and the Schur complement `A - B C^{-1} B^T`.
    pub d: Matrix,
    pub schur: Matrix,
    pub t0: Matrix,
    pub s_inverse: Matrix,
    /// `max|S - E S_tilde E^T| / max|S|`.
    pub factorization_residual: f64,
    /// `max|S_tilde^{-1}` from the Schur formula minus the LU inverse`|`.
    pub schur_inverse_residual: f64,
    /// `max|S^{-1} - T0|`.
    pub limit_error: f64,
}

/// Builds every matrix of the hierarchical splitting at `alpha`, computing `S_tilde` by direct
/// integration of hierarchical basis gradients.
pub fn hierarchical_matrices(alpha: f64) -> Result<HierarchicalBundle, StudyError> {
    let host = embed_degenerate::<f64>(&DegenerateSpec { alpha, placement: Placement::OneLayerInside, n: 4 })?;
    let coarse = three_line_mesh::<f64>(4)?;
    let e_patch = host.patch_e()?;
    let order = host.vertices.ordered();
    let s = stiffness_gradient(&host.mesh)?.submatrix(&order, &order)?;
    let coarse_nodes = &order[..3];
    let fine_nodes = &order[3..];

    let mut s_tilde = Matrix::zeros(6, 6);
    for &t in &e_patch.parent_triangles {
        let tri = host.mesh.triangles()[t];
        let pts = host.mesh.triangle_points(t);
        let centroid = [(pts[0][0] + pts[1][0] + pts[2][0]) / 3.0, (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0];
        let ct = (0..coarse.num_triangles())
            .find(|&c| {
                let q = coarse.triangle_points(c);
                (0..3).all(|k| signed_area(q[k], q[(k + 1) % 3], centroid) > 0.0)
            })
            .ok_or_else(|| StudyError::InvalidParameter("fine triangle outside the coarse mesh".into()))?;
        let coarse_tri = coarse.triangles()[ct];
        let coarse_grad = barycentric_gradients(coarse.triangle_points(ct));
        let fine_grad = barycentric_gradients(pts);
        let grads: Vec<[f64; 2]> = (0..6)
            .map(|k| {
                let (verts, g, node) = if k < 3 { (coarse_tri, &coarse_grad, coarse_nodes[k]) } else { (tri, &fine_grad, fine_nodes[k - 3]) };
                verts.iter().position(|&v| v == node).map_or([0.0, 0.0], |p| g[p])
            })
            .collect();
        let area = host.mesh.area(t);
        for i in 0..6 {
            for j in 0..6 {
                s_tilde[(i, j)] += area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
    }

    // coarse hat values at the fine nodes, from barycentric coordinates in ABC
    let mut e = Matrix::identity(6);
    for (c, &x) in coarse_nodes.iter().enumerate() {
        for (f, &y) in fine_nodes.iter().enumerate() {
            let p = host.mesh.vertex(y);
            let ct = (0..coarse.num_triangles())
                .find(|&k| coarse.triangles()[k].contains(&order[0]) && coarse.triangles()[k].contains(&order[1]) && coarse.triangles()[k].contains(&order[2]))
                .expect("ABC is a coarse triangle");
            let q = coarse.triangle_points(ct);
            let total = signed_area(q[0], q[1], q[2]);
            let k = coarse.triangles()[ct].iter().position(|&v| v == x).expect("vertex of ABC");
            let value = signed_area(p, q[(k + 1) % 3], q[(k + 2) % 3]) / total;
            e[(c, 3 + f)] = -value;
        }
    }

    let s_hier = e.matmul(&s_tilde)?.matmul(&e.transpose())?;
    let factorization_residual = s.max_abs_diff(&s_hier)? / s.max_abs();

    let idx_c = [0, 1, 2];
    let idx_f = [3, 4, 5];
    let block_a = s_tilde.submatrix(&idx_c, &idx_c)?;
    let block_b = s_tilde.submatrix(&idx_c, &idx_f)?;
    let block_c = s_tilde.submatrix(&idx_f, &idx_f)?;
    let c_inv = Lu::factor(&block_c)?.inverse();
    let d = block_b.matmul(&c_inv)?.scale(-1.0);
    let schur = block_a.add(&d.matmul(&block_b.transpose())?)?;
    let schur_inv = Lu::factor(&schur)?.inverse();
    // [[A, B], [B^T, C]]^{-1} via the Schur complement
    let top_right = schur_inv.matmul(&d)?;
    let bottom_right = c_inv.add(&d.transpose().matmul(&schur_inv)?.matmul(&d)?)?;
    let block_inverse = Matrix::from_fn(6, 6, |i, j| match (i < 3, j < 3) {
        (true, true) => schur_inv[(i, j)],
        (true, false) => top_right[(i, j - 3)],
        (false, true) => top_right[(j, i - 3)],
        (false, false) => bottom_right[(i - 3, j - 3)],
    });
    let schur_inverse_residual = block_inverse.max_abs_diff(&invert(&s_tilde)?.matrix)?;

    let t0 = LimitBlocks::new().exact_limit()?.t0.to_f64();
    let s_inverse = invert(&s)?.matrix;
    let limit_error = s_inverse.max_abs_diff(&t0)?;
    Ok(HierarchicalBundle {
        alpha,
        s,
        s_tilde,
        e,
        block_a,
        block_b,
        block_c,
        d,
        schur,
        t0,
        s_inverse,
        factorization_residual,
        schur_inverse_residual,
        limit_error,
    })
}

/// Convergence of `S(alpha)^{-1}` to `T0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRate {
    pub alphas: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log alpha`.
    pub slope: f64,
}

pub fn limit_rate(alphas: &[f64]) -> Result<LimitRate, StudyError> {
    if alphas.len() < 2 {
        return Err(StudyError::InvalidParameter("need at least two alpha values".into()));
    }
    let t0 = LimitBlocks::new().exact_limit()?.t0.to_f64();
    let errors = alphas
        .par_iter()
        .map(|&a| Ok(invert(&degenerate_block(a)?)?.matrix.max_abs_diff(&t0)?))
        .collect::<Result<Vec<f64>, StudyError>>()?;
    let xs: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(LimitRate { alphas: alphas.to_vec(), errors, slope: sxy / sxx })
}

/// Singular values of `T0`, largest first.
pub fn limit_singular_values() -> Result<Vec<f64>, StudyError> {
    Ok(singular_values(&LimitBlocks::new().exact_limit()?.t0.to_f64()))
}

/// Green's function with source at `P` for one placement.
#[derive(Debug, Clone, Serialize)]
pub struct GreenRun {
    pub placement: Placement,
    pub vertices: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub is_boundary: Vec<bool>,
    pub min_interior: f64,
    pub argmin: usize,
    pub value_at_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenComparison {
    pub alpha: f64,
    pub n: usize,
    pub one_layer_inside: GreenRun,
    pub at_boundary: GreenRun,
}

pub fn green_run(alpha: f64, n: usize, placement: Placement) -> Result<GreenRun, StudyError> {
    let dm = embed_degenerate::<f64>(&DegenerateSpec { alpha, placement, n })?;
    let sys = AssembledSystem::new(&dm.mesh, 0.0)?;
    let values = greens_column(&sys, dm.vertices.p)?;
    let (argmin, min_interior) = sys
        .partition
        .interior
        .iter()
        .map(|&i| (i, values[i]))
        .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(GreenRun {
        placement,
        vertices: dm.mesh.vertices().to_vec(),
        value_at_n: values[dm.vertices.n],
        values,
        is_boundary: sys.partition.is_boundary.clone(),
        min_interior,
        argmin,
    })
}

/// The Green's function with source at `P` for the one-layer-inside and
/// at-boundary placements.
pub fn green_comparison(alpha: f64, n: usize) -> Result<GreenComparison, StudyError> {
    Ok(GreenComparison {
        alpha,
        n,
        one_layer_inside: green_run(alpha, n, Placement::OneLayerInside)?,
        at_boundary: green_run(alpha, n, Placement::AtBoundary)?,
    })
}

/// Converts an exact matrix to rows of `"p/q"` strings.
pub fn rational_rows(m: &RationalMatrix) -> Vec<Vec<String>> {
    m.to_rows().into_iter().map(|r| r.into_iter().map(|x| x.to_string()).collect()).collect()
}

/// Convenience: `DenseMatrix<f64>` rows.
pub fn float_rows(m: &DenseMatrix<f64>) -> Vec<Vec<f64>> {
    m.to_rows()
}
