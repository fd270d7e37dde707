//! Discrete maximum principle certificates.
//!
//! A certificate combines three global conditions (connected interior graph,
//! every boundary vertex next to an interior vertex, every interior vertex
//! interior to some patch) with local matrix conditions on each patch of a
//! cover. The same local test applied to the whole mesh gives the direct
//! full-domain criterion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssembledSystem, AssemblyError};
use crate::linalg::{sign_test, DenseMatrix, LinalgError, Lu, SignMode, SignReport};
use crate::mesh::{
    boundary_adjacent_to_interior, classify_boundary, covers_interior, extract_subdomain, interior_components, ring,
    Edge, IndexPartition, MeshError, Subdomain, TriMesh,
};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("patch {0} does not belong to this mesh")]
    ForeignPatch(usize),
}

/// The property to certify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMode {
    /// Strong principle without reaction.
    SdmpA,
    /// Strong principle with a nonnegative constant reaction.
    SdmpB,
    /// Weak principle without reaction.
    WdmpA,
    /// Strong principle for a monotone semilinear reaction.
    Semilinear,
}

impl CertMode {
    pub fn strength(self) -> Strength {
        match self {
            CertMode::WdmpA => Strength::Weak,
            _ => Strength::Strong,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strength {
    /// `B_aa^{-1} > 0` and `B_aa^{-1} B_ab < 0`.
    Strong,
    /// `B_aa^{-1} > 0` and `B_ab <= 0`.
    Weak,
}

/// How the coupling condition was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingPath {
    /// `B_ab <= 0` with a strictly negative entry in every column, combined
    /// with `B_aa^{-1} > 0`.
    Shortcut,
    /// Entrywise test of the product `B_aa^{-1} B_ab`.
    Direct,
    /// Entrywise test of `B_ab` alone.
    Weak,
}

/// Local matrix conditions on one domain or patch.
#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck<T> {
    pub strength: Strength,
    pub interior: usize,
    pub boundary: usize,
    /// Sign test of `B_aa^{-1}`, or the factorization failure.
    pub inverse: Result<SignReport<T>, String>,
    pub coupling: Option<SignReport<T>>,
    pub coupling_path: Option<CouplingPath>,
    pub passed: bool,
}

/// Applies the local conditions to the operator `op` of a domain.
pub fn check_block<T: Real>(op: &DenseMatrix<T>, partition: &IndexPartition, strength: Strength, tol_rel: T) -> BlockCheck<T> {
    let (a, b) = (&partition.interior, &partition.boundary);
    let mut out = BlockCheck {
        strength,
        interior: a.len(),
        boundary: b.len(),
        inverse: Err(String::new()),
        coupling: None,
        coupling_path: None,
        passed: false,
    };
    let inner = op.submatrix(a, a).expect("partition in range");
    let coupling = op.submatrix(a, b).expect("partition in range");
    let lu = match Lu::factor(&inner) {
        Ok(lu) => lu,
        Err(e) => {
            out.inverse = Err(e.to_string());
            return out;
        }
    };
    let inverse = lu.inverse();
    let inv_report = sign_test(&inverse, SignMode::Pos, tol_rel);
    let inverse_ok = inv_report.passed();
    out.inverse = Ok(inv_report);
    let coupling_nonpos = sign_test(&coupling, SignMode::Nonpos, tol_rel);
    match strength {
        Strength::Weak => {
            out.passed = inverse_ok && coupling_nonpos.passed();
            out.coupling = Some(coupling_nonpos);
            out.coupling_path = Some(CouplingPath::Weak);
        }
        Strength::Strong => {
            let tau = coupling_nonpos.threshold;
            let columns_negative = (0..coupling.cols()).all(|j| (0..coupling.rows()).any(|i| coupling[(i, j)] < -tau));
            if inverse_ok && coupling_nonpos.passed() && columns_negative {
                out.coupling = Some(coupling_nonpos);
                out.coupling_path = Some(CouplingPath::Shortcut);
                out.passed = true;
            } else {
                let product = lu.solve_matrix(&coupling).expect("shapes agree");
                let report = sign_test(&product, SignMode::Neg, tol_rel);
                out.passed = inverse_ok && report.passed();
                out.coupling = Some(report);
                out.coupling_path = Some(CouplingPath::Direct);
            }
        }
    }
    out
}

/// Direct full-domain strong test on `A`.
pub fn check_sdmp_a<T: Real>(system: &AssembledSystem<T>, tol_rel: T) -> BlockCheck<T> {
    check_block(&system.stiffness, &system.partition, Strength::Strong, tol_rel)
}

/// Direct full-domain strong test on `A + C`.
pub fn check_sdmp_b<T: Real>(system: &AssembledSystem<T>, tol_rel: T) -> BlockCheck<T> {
    check_block(system.operator(), &system.partition, Strength::Strong, tol_rel)
}

/// Exact full-domain characterization of the weak principle without
/// reaction: `A_aa^{-1} >= 0` and `-A_aa^{-1} A_ab >= 0`.
#[derive(Debug, Clone, Serialize)]
pub struct WeakDirectCheck<T> {
    pub inverse: SignReport<T>,
    pub influence: SignReport<T>,
    pub passed: bool,
}

pub fn check_wdmp_a_direct<T: Real>(system: &AssembledSystem<T>, tol_rel: T) -> Result<WeakDirectCheck<T>, CertifyError> {
    let p = &system.partition;
    let inner = system.stiffness.submatrix(&p.interior, &p.interior)?;
    let coupling = system.stiffness.submatrix(&p.interior, &p.boundary)?;
    let lu = Lu::factor(&inner)?;
    let inverse = sign_test(&lu.inverse(), SignMode::Nonneg, tol_rel);
    let influence = sign_test(&lu.solve_matrix(&coupling)?.scale(-T::one()), SignMode::Nonneg, tol_rel);
    let passed = inverse.passed() && influence.passed();
    Ok(WeakDirectCheck { inverse, influence, passed })
}

/// Per-edge angle-condition audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAudit<T> {
    pub edge: Edge,
    /// Angles opposite the edge (one for boundary edges).
    pub opposite_angles: Vec<T>,
    pub angle_sum: T,
    pub stiffness_entry: T,
    pub interior_edge: bool,
    /// Interior edge whose stiffness entry is not strictly negative.
    pub defect: bool,
}

pub fn angle_audit<T: Real>(mesh: &TriMesh<T>, stiffness: &DenseMatrix<T>, tol_rel: T) -> Vec<EdgeAudit<T>> {
    let tau = tol_rel * stiffness.max_abs();
    mesh.topology()
        .edges
        .iter()
        .map(|(&(i, j), tris)| {
            let opposite_angles: Vec<T> = tris
                .iter()
                .map(|&t| {
                    let tri = mesh.triangles()[t];
                    let k = (0..3).find(|&k| tri[k] != i && tri[k] != j).expect("triangle has a third vertex");
                    mesh.angles(t)[k]
                })
                .collect();
            let angle_sum = opposite_angles.iter().copied().sum();
            let entry = stiffness[(i, j)];
            let interior_edge = tris.len() == 2;
            EdgeAudit { edge: (i, j), opposite_angles, angle_sum, stiffness_entry: entry, interior_edge, defect: interior_edge && entry >= -tau }
        })
        .collect()
}

/// Interior edges with a nonnegative stiffness entry.
pub fn defect_edges<T: Real>(mesh: &TriMesh<T>, tol_rel: T) -> Result<Vec<Edge>, CertifyError> {
    let a = crate::assembly::stiffness_gradient(mesh)?;
    Ok(angle_audit(mesh, &a, tol_rel).into_iter().filter(|e| e.defect).map(|e| e.edge).collect())
}

/// Result of the semilinear mesh condition.
#[derive(Debug, Clone, Serialize)]
pub struct SemilinearReport<T> {
    /// Edges with an interior endpoint and a nonnegative stiffness entry.
    pub failing_edges: Vec<Edge>,
    /// `max M_ij / (h^2 |A_ij|)` over edges with an interior endpoint.
    pub c_a: Option<T>,
    pub worst_edge: Option<Edge>,
    pub mesh_size: T,
    pub lipschitz: T,
    /// `sqrt(1 / (L C_A))`; `None` when unbounded.
    pub h_max: Option<T>,
    /// `cot(a0)^2 / 24` where all angles lie in `[a0, pi/2 - a0]`.
    pub angle_window_bound: Option<T>,
    pub holds: bool,
}

pub fn semilinear_condition<T: Real>(mesh: &TriMesh<T>, lipschitz: T) -> Result<SemilinearReport<T>, CertifyError> {
    if lipschitz < T::zero() || !lipschitz.is_finite() {
        return Err(CertifyError::InvalidParameter(format!("Lipschitz constant {lipschitz} must be finite and nonnegative")));
    }
    let a = crate::assembly::stiffness_gradient(mesh)?;
    let m = crate::assembly::mass_matrix(mesh)?;
    let partition = classify_boundary(mesh);
    let h = mesh.mesh_size();
    let mut failing_edges = Vec::new();
    let mut c_a: Option<(T, Edge)> = None;
    for &(i, j) in mesh.topology().edges.keys() {
        if partition.is_boundary[i] && partition.is_boundary[j] {
            continue;
        }
        let aij = a[(i, j)];
        if aij >= T::zero() {
            failing_edges.push((i, j));
            continue;
        }
        let ratio = m[(i, j)] / (h * h * -aij);
        if c_a.map_or(true, |(c, _)| ratio > c) {
            c_a = Some((ratio, (i, j)));
        }
    }
    let h_max = match c_a {
        Some((c, _)) if lipschitz > T::zero() => Some((T::one() / (lipschitz * c)).sqrt()),
        _ => None,
    };
    let (lo, hi) = mesh.angle_range();
    let a0 = lo.min(T::FRAC_PI_2() - hi);
    let angle_window_bound = (a0 > T::zero()).then(|| {
        let cot = a0.cos() / a0.sin();
        cot * cot / lit(24.0)
    });
    let holds = failing_edges.is_empty() && h_max.map_or(true, |hm| h < hm);
    Ok(SemilinearReport {
        failing_edges,
        c_a: c_a.map(|c| c.0),
        worst_edge: c_a.map(|c| c.1),
        mesh_size: h,
        lipschitz,
        h_max,
        angle_window_bound,
        holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions<T> {
    pub mode: CertMode,
    /// Constant reaction coefficient for `SdmpB`.
    pub c_tilde: T,
    /// Lipschitz constant of the reaction for `Semilinear`.
    pub lipschitz: T,
    pub tol_rel: T,
}

impl<T: Real> CertifyOptions<T> {
    pub fn new(mode: CertMode) -> Self {
        Self { mode, c_tilde: T::zero(), lipschitz: T::one(), tol_rel: T::default_tolerance() }
    }

    pub fn with_reaction(mut self, c_tilde: T) -> Self {
        self.c_tilde = c_tilde;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PatchReport<T> {
    pub index: usize,
    /// Parent ids of the patch's interior vertices.
    pub interior_vertices: Vec<usize>,
    pub check: BlockCheck<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate<T> {
    pub mode: CertMode,
    pub holds: bool,
    pub interior_components: usize,
    /// Boundary vertices without an interior neighbour.
    pub isolated_boundary: Vec<usize>,
    /// Triangles dropped before a weak check because they only touch
    /// isolated boundary vertices (this does not change interior equations).
    pub reduced_triangles: Vec<usize>,
    pub uncovered: Vec<usize>,
    pub patches: Vec<PatchReport<T>>,
    pub semilinear: Option<SemilinearReport<T>>,
    pub failures: Vec<String>,
}

/// Certifies `opts.mode` on `mesh` from a patch cover.
pub fn certify_cover<T: Real>(mesh: &TriMesh<T>, patches: &[Subdomain<T>], opts: &CertifyOptions<T>) -> Result<Certificate<T>, CertifyError> {
    if opts.mode == CertMode::SdmpB && (opts.c_tilde < T::zero() || opts.c_tilde.is_nan()) {
        return Err(CertifyError::InvalidParameter("the strong principle with reaction needs c_tilde >= 0".into()));
    }
    for (k, p) in patches.iter().enumerate() {
        let consistent = p.parent_triangles.last().is_some_and(|&t| t < mesh.num_triangles())
            && p.local_to_parent.iter().all(|&v| v < mesh.num_vertices() && mesh.vertex(v) == p.mesh.vertex(p.to_local(v).expect("own vertex")));
        if !consistent {
            return Err(CertifyError::ForeignPatch(k));
        }
    }
    let partition = classify_boundary(mesh);
    let isolated_boundary = boundary_adjacent_to_interior(mesh, &partition);
    let mut failures = Vec::new();
    let mut reduced_triangles = Vec::new();

    // Weak principles survive removing triangles that only touch isolated
    // boundary vertices; strong ones do not.
    let (work_mesh, work_patches) = if !isolated_boundary.is_empty() && opts.mode.strength() == Strength::Weak {
        let drop: Vec<bool> = mesh.triangles().iter().map(|t| t.iter().any(|v| isolated_boundary.contains(v))).collect();
        reduced_triangles = (0..mesh.num_triangles()).filter(|&t| drop[t]).collect();
        let kept: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| !drop[t]).collect();
        let reduced = extract_subdomain(mesh, &kept)?;
        let new_id: Vec<Option<usize>> = {
            let mut ids = vec![None; mesh.num_triangles()];
            for (k, &t) in kept.iter().enumerate() {
                ids[t] = Some(k);
            }
            ids
        };
        let mut mapped = Vec::with_capacity(patches.len());
        for p in patches {
            let tris: Vec<usize> = p.parent_triangles.iter().filter_map(|&t| new_id[t]).collect();
            let sub = extract_subdomain(&reduced.mesh, &tris)?;
            mapped.push(sub);
        }
        (reduced.mesh, Some(mapped))
    } else {
        (mesh.clone(), None)
    };
    let work_partition = classify_boundary(&work_mesh);
    let components = interior_components(&work_mesh, &work_partition);
    if components != 1 {
        failures.push(format!("interior graph has {components} components"));
    }
    let still_isolated = boundary_adjacent_to_interior(&work_mesh, &work_partition);
    if !still_isolated.is_empty() {
        failures.push(format!("{} boundary vertices have no interior neighbour", still_isolated.len()));
    }
    let uncovered = covers_interior(mesh, &partition, patches);
    if !uncovered.is_empty() {
        failures.push(format!("{} interior vertices are not interior to any patch", uncovered.len()));
    }

    let mut semilinear = None;
    let mut reports = Vec::new();
    if opts.mode == CertMode::Semilinear {
        let report = semilinear_condition(mesh, opts.lipschitz)?;
        if !report.holds {
            failures.push("semilinear mesh condition fails".into());
        }
        semilinear = Some(report);
    } else {
        let c = if opts.mode == CertMode::SdmpB { opts.c_tilde } else { T::zero() };
        let strength = opts.mode.strength();
        let local: Vec<&Subdomain<T>> = match &work_patches {
            Some(mapped) => mapped.iter().collect(),
            None => patches.iter().collect(),
        };
        reports = local
            .par_iter()
            .enumerate()
            .map(|(k, p)| -> Result<PatchReport<T>, CertifyError> {
                let sys = AssembledSystem::new(&p.mesh, c)?;
                Ok(PatchReport { index: k, interior_vertices: patches[k].interior_parent(), check: check_block(sys.operator(), &sys.partition, strength, opts.tol_rel) })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let bad = reports.iter().filter(|r| !r.check.passed).count();
        if bad > 0 {
            failures.push(format!("{bad} of {} patches fail the local test", reports.len()));
        }
    }
    Ok(Certificate {
        mode: opts.mode,
        holds: failures.is_empty(),
        interior_components: components,
        isolated_boundary,
        reduced_triangles,
        uncovered,
        patches: reports,
        semilinear,
        failures,
    })
}

/// Patches found by [`auto_cover`].
#[derive(Debug, Clone)]
pub struct AutoCover<T> {
    pub patches: Vec<Subdomain<T>>,
    /// `(vertex, ring radius)` for every vertex that seeded a patch.
    pub seeds: Vec<(usize, usize)>,
    /// Interior vertices for which no ring up to the cap passes.
    pub uncoverable: Vec<usize>,
}

/// Builds a cover from stars, growing `k`-rings (up to `cap`) around vertices
/// whose star fails the local test. Vertices already interior to an accepted
/// patch are skipped.
pub fn auto_cover<T: Real>(mesh: &TriMesh<T>, opts: &CertifyOptions<T>, cap: usize) -> Result<AutoCover<T>, CertifyError> {
    if cap == 0 {
        return Err(CertifyError::InvalidParameter("ring cap must be at least 1".into()));
    }
    let partition = classify_boundary(mesh);
    let c = if opts.mode == CertMode::SdmpB { opts.c_tilde } else { T::zero() };
    let strength = if opts.mode == CertMode::Semilinear { Strength::Strong } else { opts.mode.strength() };
    let mut covered = vec![false; mesh.num_vertices()];
    let mut out = AutoCover { patches: Vec::new(), seeds: Vec::new(), uncoverable: Vec::new() };
    for &v in &partition.interior {
        if covered[v] {
            continue;
        }
        let mut accepted = None;
        for k in 1..=cap {
            let patch = ring(mesh, v, k)?;
            let sys = AssembledSystem::new(&patch.mesh, c)?;
            if check_block(sys.operator(), &sys.partition, strength, opts.tol_rel).passed {
                accepted = Some((patch, k));
                break;
            }
        }
        match accepted {
            Some((patch, k)) => {
                for w in patch.interior_parent() {
                    covered[w] = true;
                }
                out.seeds.push((v, k));
                out.patches.push(patch);
            }
            None => out.uncoverable.push(v),
        }
    }
    Ok(out)
}

/// Bisection between a passing and a failing parameter value.
///
/// Returns the final `(pass, fail)` bracket once
/// `|fail - pass| <= abs_tol + rel_tol * |pass|`.
pub fn bisect<T: Real, E>(mut pass: T, mut fail: T, abs_tol: T, rel_tol: T, mut pred: impl FnMut(T) -> Result<bool, E>) -> Result<(T, T), E> {
    for _ in 0..200 {
        if (fail - pass).abs() <= abs_tol + rel_tol * pass.abs() {
            break;
        }
        let mid = (pass + fail) / lit(2.0);
        if pred(mid)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok((pass, fail))
}

/// Outcome of [`critical_mesh_size`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshSizeSearch<T> {
    /// Largest certified mesh size found, `None` if even tiny meshes fail.
    pub h_max: Option<T>,
    /// Smallest failing mesh size found, `None` if no failure up to the search limit.
    pub h_fail: Option<T>,
}

/// Finds, by scaling the mesh geometry, the largest mesh size at which the
/// cover still certifies the strong principle with reaction `c_tilde`.
pub fn critical_mesh_size<T: Real>(mesh: &TriMesh<T>, patches: &[Subdomain<T>], c_tilde: T, rel_tol: T) -> Result<MeshSizeSearch<T>, CertifyError> {
    let h0 = mesh.mesh_size();
    let opts = CertifyOptions::new(CertMode::SdmpB).with_reaction(c_tilde);
    let holds_at = |s: T| -> Result<bool, CertifyError> {
        let scaled = mesh.scaled(s);
        let scaled_patches = patches.iter().map(|p| extract_subdomain(&scaled, &p.parent_triangles)).collect::<Result<Vec<_>, _>>()?;
        Ok(certify_cover(&scaled, &scaled_patches, &opts)?.holds)
    };
    let two = lit::<T>(2.0);
    let (mut pass, mut fail) = (None, None);
    let mut s = T::one();
    if holds_at(s)? {
        pass = Some(s);
        for _ in 0..60 {
            s = s * two;
            if holds_at(s)? {
                pass = Some(s);
            } else {
                fail = Some(s);
                break;
            }
        }
    } else {
        fail = Some(s);
        for _ in 0..60 {
            s = s / two;
            if holds_at(s)? {
                pass = Some(s);
                break;
            }
            fail = Some(s);
        }
    }
    if let (Some(p), Some(f)) = (pass, fail) {
        let (p, f) = bisect(p, f, T::zero(), rel_tol, holds_at)?;
        return Ok(MeshSizeSearch { h_max: Some(p * h0), h_fail: Some(f * h0) });
    }
    Ok(MeshSizeSearch { h_max: pass.map(|p| p * h0), h_fail: fail.map(|f| f * h0) })
}

/// Smallest reaction coefficient at which the direct strong test with
/// reaction fails, bracketed to `rel_tol`. `None` if it never fails below `c_max`.
pub fn critical_reaction<T: Real>(mesh: &TriMesh<T>, c_max: T, rel_tol: T) -> Result<Option<(T, T)>, CertifyError> {
    let stiffness = crate::assembly::stiffness_gradient(mesh)?;
    let mass = crate::assembly::mass_matrix(mesh)?;
    let partition = classify_boundary(mesh);
    let h = mesh.mesh_size();
    let holds_at = |c: T| -> Result<bool, CertifyError> {
        let sys = AssembledSystem::from_parts(stiffness.clone(), mass.clone(), c, partition.clone(), h);
        Ok(check_sdmp_b(&sys, T::default_tolerance()).passed)
    };
    if !holds_at(T::zero())? {
        return Ok(Some((T::zero(), T::zero())));
    }
    let mut hi = T::one();
    while hi <= c_max {
        if !holds_at(hi)? {
            let lo = hi / lit(2.0);
            let lo = if holds_at(lo)? { lo } else { T::zero() };
            return bisect(lo, hi, T::zero(), rel_tol, holds_at).map(Some);
        }
        hi = hi * lit(2.0);
    }
    Ok(None)
}

/// Converts a certificate verdict into a short label.
pub fn verdict_label(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "not certified"
    }
}

/// Worst entry of a sign report as `f64` for display.
pub fn worst_f64<T: Real>(r: &SignReport<T>) -> Option<f64> {
    r.worst().map(|(v, _)| to_f64(v))
}
