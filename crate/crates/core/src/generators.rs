//! Structured mesh generators: three-line squares, rhombus partitions,
//! `G_k` macro-patches, rhombi with embedded `G_k` blocks, and the
//! degenerate-triangle family.

use serde::{Deserialize, Serialize};

use crate::mesh::{extract_subdomain, star, triangles_around, MeshError, Subdomain, TriMesh};
use crate::scalar::{lit, Real};

/// Unit square, `n x n` cells, each cut by the diagonal from `(i+1, j)` to `(i, j+1)`.
///
/// Vertex `(i, j)` (column `i`, row `j`) has index `j * (n + 1) + i`.
pub fn three_line_mesh<T: Real>(n: usize) -> Result<TriMesh<T>, MeshError> {
    Ok(three_line_lattice(n)?.mesh)
}

/// Like [`three_line_mesh`] but keeps the lattice lookup.
pub fn three_line_lattice<T: Real>(n: usize) -> Result<LatticeMesh<T>, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameter("three-line mesh needs n >= 1".into()));
    }
    let h = T::one() / lit(n as f64);
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let vertices = (0..=n).flat_map(|j| (0..=n).map(move |i| (i, j))).map(|(i, j)| [lit::<T>(i as f64) * h, lit::<T>(j as f64) * h]).collect();
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
            triangles.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    Ok(LatticeMesh { mesh, n, lattice: (0..(n + 1) * (n + 1)).map(Some).collect() })
}

/// Which rhombus diagonal cuts a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cut {
    Short,
    Long,
}

/// Placement of the rhombus in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhombusConvention {
    /// Sides `(1, 0)` and `(cos t, sin t)` from the origin, `pi/2 <= t < pi`.
    /// The extreme corners are `(1, 0)` and `(cos t, sin t)`.
    Sheared,
    /// Unit sides `(cos t/2, -sin t/2)` and `(cos t/2, sin t/2)` starting at
    /// `(-cos t/2, 0)`, `0 < t <= pi/2`, centred at the origin. The extreme
    /// corners are the two on the x-axis.
    Centered,
}

/// Per-cell cut choice; cell `(i, j)` is stored at `j * n + i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPattern {
    n: usize,
    cells: Vec<Cut>,
}

impl CutPattern {
    pub fn uniform(n: usize, cut: Cut) -> Self {
        Self { n, cells: vec![cut; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Cut {
        self.cells[j * self.n + i]
    }

    pub fn set(&mut self, i: usize, j: usize, cut: Cut) {
        self.cells[j * self.n + i] = cut;
    }

    pub fn count(&self, cut: Cut) -> usize {
        self.cells.iter().filter(|&&c| c == cut).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhombusSpec<T> {
    pub theta: T,
    pub n: usize,
    pub cuts: CutPattern,
    /// Drop the triangles touching the two extreme corners.
    pub trim_corners: bool,
    pub convention: RhombusConvention,
}

impl<T: Real> RhombusSpec<T> {
    pub fn uniform(theta: T, n: usize, cut: Cut, convention: RhombusConvention) -> Self {
        Self { theta, n, cuts: CutPattern::uniform(n, cut), trim_corners: false, convention }
    }

    pub fn trimmed(mut self) -> Self {
        self.trim_corners = true;
        self
    }
}

/// A mesh built on an `(n+1) x (n+1)` lattice, possibly with lattice points removed.
#[derive(Debug, Clone)]
pub struct LatticeMesh<T> {
    pub mesh: TriMesh<T>,
    pub n: usize,
    /// Vertex id of lattice point `(s, t)` at `t * (n + 1) + s`.
    pub lattice: Vec<Option<usize>>,
}

impl<T: Real> LatticeMesh<T> {
    pub fn vertex_at(&self, s: usize, t: usize) -> Option<usize> {
        if s > self.n || t > self.n {
            return None;
        }
        self.lattice[t * (self.n + 1) + s]
    }
}

/// Uniform partition of a rhombus into `n x n` similar cells.
pub fn rhombus_mesh<T: Real>(spec: &RhombusSpec<T>) -> Result<TriMesh<T>, MeshError> {
    Ok(rhombus_lattice(spec)?.mesh)
}

/// Like [`rhombus_mesh`] but keeps the lattice lookup.
pub fn rhombus_lattice<T: Real>(spec: &RhombusSpec<T>) -> Result<LatticeMesh<T>, MeshError> {
    let n = spec.n;
    let theta = spec.theta;
    let half_pi = T::FRAC_PI_2();
    if n == 0 {
        return Err(MeshError::InvalidParameter("rhombus mesh needs n >= 1".into()));
    }
    if spec.cuts.n() != n {
        return Err(MeshError::InvalidParameter(format!("cut pattern is {0}x{0}, expected {n}x{n}", spec.cuts.n())));
    }
    let valid = match spec.convention {
        RhombusConvention::Sheared => theta >= half_pi && theta < T::PI(),
        RhombusConvention::Centered => theta > T::zero() && theta <= half_pi,
    };
    if !valid || !theta.is_finite() {
        return Err(MeshError::InvalidParameter(format!("angle {theta} outside the range of the {:?} convention", spec.convention)));
    }
    let (origin, e1, e2) = match spec.convention {
        RhombusConvention::Sheared => ([T::zero(), T::zero()], [T::one(), T::zero()], [theta.cos(), theta.sin()]),
        RhombusConvention::Centered => {
            let (c, s) = ((theta / lit(2.0)).cos(), (theta / lit(2.0)).sin());
            ([-c, T::zero()], [c, -s], [c, s])
        }
    };
    let inv_n = T::one() / lit(n as f64);
    let point = |s: usize, t: usize| {
        let (a, b) = (lit::<T>(s as f64) * inv_n, lit::<T>(t as f64) * inv_n);
        [origin[0] + a * e1[0] + b * e2[0], origin[1] + a * e1[1] + b * e2[1]]
    };
    let id = |s: usize, t: usize| t * (n + 1) + s;
    let extreme = match spec.convention {
        RhombusConvention::Sheared => [id(n, 0), id(0, n)],
        RhombusConvention::Centered => [id(0, 0), id(n, n)],
    };
    let mut triangles = Vec::with_capacity(2 * n * n);
    for t in 0..n {
        for s in 0..n {
            let (a, b, c, d) = (id(s, t), id(s + 1, t), id(s + 1, t + 1), id(s, t + 1));
            // "main" diagonal a-c versus "anti" diagonal b-d
            let main = matches!(
                (spec.convention, spec.cuts.get(s, t)),
                (RhombusConvention::Sheared, Cut::Short) | (RhombusConvention::Centered, Cut::Long)
            );
            let pair = if main { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
            for tri in pair {
                if spec.trim_corners && tri.iter().any(|v| extreme.contains(v)) {
                    continue;
                }
                triangles.push(tri);
            }
        }
    }
    let all: Vec<[T; 2]> = (0..=n).flat_map(|t| (0..=n).map(move |s| (s, t))).map(|(s, t)| point(s, t)).collect();
    compact(all, triangles, n)
}

fn compact<T: Real>(points: Vec<[T; 2]>, triangles: Vec<[usize; 3]>, n: usize) -> Result<LatticeMesh<T>, MeshError> {
    let mut used = vec![false; points.len()];
    for tri in &triangles {
        for &v in tri {
            used[v] = true;
        }
    }
    let mut lattice = vec![None; points.len()];
    let mut vertices = Vec::new();
    for (k, p) in points.into_iter().enumerate() {
        if used[k] {
            lattice[k] = Some(vertices.len());
            vertices.push(p);
        }
    }
    let triangles = triangles.into_iter().map(|t| t.map(|v| lattice[v].expect("used vertex"))).collect();
    Ok(LatticeMesh { mesh: TriMesh::new(vertices, triangles)?, n, lattice })
}

/// `G_k(theta)`: a `(k+2) x (k+2)` centred rhombus whose inner `k x k` cells
/// take the long diagonal, lined by short-diagonal cells, with the two
/// x-axis corner triangles removed.
pub fn gk_patch<T: Real>(k: usize, theta: T) -> Result<TriMesh<T>, MeshError> {
    Ok(gk_lattice(k, theta)?.mesh)
}

pub fn gk_lattice<T: Real>(k: usize, theta: T) -> Result<LatticeMesh<T>, MeshError> {
    if k == 0 {
        return Err(MeshError::InvalidParameter("G_k needs k >= 1".into()));
    }
    let n = k + 2;
    let mut cuts = CutPattern::uniform(n, Cut::Short);
    for j in 1..=k {
        for i in 1..=k {
            cuts.set(i, j, Cut::Long);
        }
    }
    rhombus_lattice(&RhombusSpec { theta, n, cuts, trim_corners: true, convention: RhombusConvention::Centered })
}

/// A `k x k` block of long-diagonal cells whose lower-left cell is `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectPlacement {
    pub k: usize,
    pub anchor: (usize, usize),
}

impl DefectPlacement {
    fn cells(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (self.anchor.0..self.anchor.0 + self.k, self.anchor.1..self.anchor.1 + self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec<T> {
    pub theta: T,
    pub n: usize,
    pub placements: Vec<DefectPlacement>,
}

impl DefectSpec<f64> {
    /// Four `G_1` blocks in a trimmed rhombus with `theta = pi/3`.
    pub fn four_g1() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_3,
            n: 8,
            placements: [(2, 2), (2, 5), (5, 2), (5, 5)].map(|anchor| DefectPlacement { k: 1, anchor }).to_vec(),
        }
    }

    /// `G_1` and `G_2` blocks in a trimmed rhombus with `theta = 2 pi/5`.
    pub fn mixed_g1_g2() -> Self {
        Self {
            theta: 0.4 * std::f64::consts::PI,
            n: 10,
            placements: vec![
                DefectPlacement { k: 2, anchor: (2, 2) },
                DefectPlacement { k: 1, anchor: (2, 6) },
                DefectPlacement { k: 1, anchor: (6, 2) },
                DefectPlacement { k: 2, anchor: (6, 6) },
            ],
        }
    }
}

/// One embedded block and its lined patch.
#[derive(Debug, Clone)]
pub struct DefectBlock {
    pub placement: DefectPlacement,
    /// Triangles of the block plus its one-cell lining, minus the lining's
    /// two x-axis corner triangles: a translated, scaled copy of `G_k`.
    pub patch_triangles: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DefectMesh<T> {
    pub lattice: LatticeMesh<T>,
    pub blocks: Vec<DefectBlock>,
}

impl<T: Real> DefectMesh<T> {
    pub fn mesh(&self) -> &TriMesh<T> {
        &self.lattice.mesh
    }

    pub fn block_patches(&self) -> Result<Vec<Subdomain<T>>, MeshError> {
        self.blocks.iter().map(|b| extract_subdomain(self.mesh(), &b.patch_triangles)).collect()
    }

    /// Block patches followed by the stars of every interior vertex that no
    /// block patch contains in its interior.
    pub fn cover(&self) -> Result<Vec<Subdomain<T>>, MeshError> {
        let mut patches = self.block_patches()?;
        let partition = crate::mesh::classify_boundary(self.mesh());
        for v in crate::mesh::covers_interior(self.mesh(), &partition, &patches) {
            patches.push(star(self.mesh(), v)?);
        }
        Ok(patches)
    }
}

/// Trimmed centred rhombus with long-diagonal blocks at the given placements.
///
/// Each block must keep at least one short-diagonal cell between itself and
/// the outer boundary and between itself and every other block.
pub fn defect_mesh<T: Real>(spec: &DefectSpec<T>) -> Result<DefectMesh<T>, MeshError> {
    let n = spec.n;
    let mut cuts = CutPattern::uniform(n, Cut::Short);
    for (idx, p) in spec.placements.iter().enumerate() {
        let (i0, j0) = p.anchor;
        if p.k == 0 || i0 < 1 || j0 < 1 || i0 + p.k > n.saturating_sub(1) || j0 + p.k > n.saturating_sub(1) {
            return Err(MeshError::InvalidParameter(format!(
                "block {idx} (k={}, anchor={:?}) is not separated from the boundary of a {n}x{n} grid",
                p.k, p.anchor
            )));
        }
        for (jdx, q) in spec.placements.iter().enumerate().take(idx) {
            let (a, b) = (p.cells(), q.cells());
            let near = |r: &std::ops::Range<usize>, s: &std::ops::Range<usize>| r.start <= s.end && s.start <= r.end;
            if near(&a.0, &b.0) && near(&a.1, &b.1) {
                return Err(MeshError::InvalidParameter(format!("blocks {jdx} and {idx} are not separated by a short-diagonal cell")));
            }
        }
        for j in p.cells().1 {
            for i in p.cells().0 {
                cuts.set(i, j, Cut::Long);
            }
        }
    }
    let lattice = rhombus_lattice(&RhombusSpec { theta: spec.theta, n, cuts, trim_corners: true, convention: RhombusConvention::Centered })?;
    let mut blocks = Vec::new();
    for p in &spec.placements {
        let (i0, j0) = (p.anchor.0 - 1, p.anchor.1 - 1);
        let (i1, j1) = (p.anchor.0 + p.k + 1, p.anchor.1 + p.k + 1);
        let inside = |v: usize| (i0..=i1).flat_map(|s| (j0..=j1).map(move |t| (s, t))).any(|(s, t)| lattice.vertex_at(s, t) == Some(v));
        let corners = [lattice.vertex_at(i0, j0), lattice.vertex_at(i1, j1)];
        let patch_triangles = (0..lattice.mesh.num_triangles())
            .filter(|&t| {
                let tri = lattice.mesh.triangles()[t];
                tri.iter().all(|&v| inside(v)) && !tri.iter().any(|&v| corners.contains(&Some(v)))
            })
            .collect();
        blocks.push(DefectBlock { placement: *p, patch_triangles });
    }
    Ok(DefectMesh { lattice, blocks })
}

/// Where the degenerate triangle sits in the ambient three-line mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// The triangle `ABC` alone.
    Standalone,
    /// Edge `BC` on the bottom boundary.
    AtBoundary,
    /// One row of cells between `BC` and the bottom boundary.
    OneLayerInside,
    /// `BC` on row `layers` of the ambient lattice.
    Inside(usize),
}

impl Placement {
    fn row(self) -> Option<usize> {
        match self {
            Placement::Standalone => None,
            Placement::AtBoundary => Some(0),
            Placement::OneLayerInside => Some(1),
            Placement::Inside(r) => Some(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateSpec<T> {
    pub alpha: T,
    pub placement: Placement,
    /// Ambient three-line mesh resolution (ignored for `Standalone`).
    pub n: usize,
}

/// Vertex ids of the distinguished points of a degenerate-triangle mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DegenerateVertices {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    /// Vertex across `BC` from `A`, when the ambient mesh has one.
    pub a_prime: Option<usize>,
}

impl DegenerateVertices {
    /// The six vertices in the order `B, C, A, M, N, P`.
    pub fn ordered(&self) -> [usize; 6] {
        [self.b, self.c, self.a, self.m, self.n, self.p]
    }
}

#[derive(Debug, Clone)]
pub struct DegenerateMesh<T> {
    pub mesh: TriMesh<T>,
    pub vertices: DegenerateVertices,
}

impl<T: Real> DegenerateMesh<T> {
    /// The patch `E`: union of the stars of `B, C, A, M, N, P`.
    pub fn patch_e(&self) -> Result<Subdomain<T>, MeshError> {
        extract_subdomain(&self.mesh, &triangles_around(&self.mesh, &self.vertices.ordered())?)
    }

    /// `E` together with the star of `A'`.
    pub fn patch_e_extended(&self) -> Result<Subdomain<T>, MeshError> {
        let a_prime = self.vertices.a_prime.ok_or_else(|| MeshError::InvalidParameter("no vertex A' in this mesh".into()))?;
        let mut centers = self.vertices.ordered().to_vec();
        centers.push(a_prime);
        extract_subdomain(&self.mesh, &triangles_around(&self.mesh, &centers)?)
    }

    /// `E` plus the stars of every interior vertex not interior to `E`.
    pub fn cover(&self, extended: bool) -> Result<Vec<Subdomain<T>>, MeshError> {
        let e = if extended { self.patch_e_extended()? } else { self.patch_e()? };
        let partition = crate::mesh::classify_boundary(&self.mesh);
        let mut patches = vec![e];
        for v in crate::mesh::covers_interior(&self.mesh, &partition, &patches) {
            patches.push(star(&self.mesh, v)?);
        }
        Ok(patches)
    }
}

fn check_alpha<T: Real>(alpha: T) -> Result<(), MeshError> {
    // P = B + (3/4, tan(alpha)/4) stays inside ABC only for tan(alpha) < 1.
    if !(alpha > T::zero() && alpha < T::FRAC_PI_4()) {
        return Err(MeshError::InvalidParameter(format!("alpha = {alpha} must lie in (0, pi/4)")));
    }
    Ok(())
}

/// `B = (0,0)`, `C = (1,0)`, `A = (0,1)`, `M` the midpoint of `BC`,
/// `N = (1/4, tan(alpha)/4)`, `P = (3/4, tan(alpha)/4)`.
///
/// Triangles: `BMN, MPN, MCP, BNA, NPA, PCA`. Vertex order `B, C, A, M, N, P`.
pub fn degenerate_triangle_mesh<T: Real>(alpha: T) -> Result<DegenerateMesh<T>, MeshError> {
    check_alpha(alpha)?;
    let q = alpha.tan() / lit(4.0);
    let vertices = vec![
        [T::zero(), T::zero()],
        [T::one(), T::zero()],
        [T::zero(), T::one()],
        [lit(0.5), T::zero()],
        [lit(0.25), q],
        [lit(0.75), q],
    ];
    let (b, c, a, m, nn, p) = (0, 1, 2, 3, 4, 5);
    let triangles = vec![[b, m, nn], [m, p, nn], [m, c, p], [b, nn, a], [nn, p, a], [p, c, a]];
    let vertices_ids = DegenerateVertices { a, b, c, m, n: nn, p, a_prime: None };
    Ok(DegenerateMesh { mesh: label(TriMesh::new(vertices, triangles)?, &vertices_ids)?, vertices: vertices_ids })
}

fn label<T: Real>(mesh: TriMesh<T>, v: &DegenerateVertices) -> Result<TriMesh<T>, MeshError> {
    let mut mesh = mesh.with_label("A", v.a)?.with_label("B", v.b)?.with_label("C", v.c)?;
    mesh = mesh.with_label("M", v.m)?.with_label("N", v.n)?.with_label("P", v.p)?;
    match v.a_prime {
        Some(ap) => mesh.with_label("A'", ap),
        None => Ok(mesh),
    }
}

/// Three-line mesh of the unit square with the degenerate triangle placed in
/// cell `((n-1)/2, row)`, its edge `BC` horizontal and `A` above `B`.
///
/// When `row > 0` the triangle `A'CB` below `BC` is split by the edge `MA'`.
pub fn embed_degenerate<T: Real>(spec: &DegenerateSpec<T>) -> Result<DegenerateMesh<T>, MeshError> {
    let Some(row) = spec.placement.row() else {
        return degenerate_triangle_mesh(spec.alpha);
    };
    check_alpha(spec.alpha)?;
    let n = spec.n;
    if n < 4 {
        return Err(MeshError::InvalidParameter("the ambient mesh needs n >= 4".into()));
    }
    if row + 2 > n {
        return Err(MeshError::InvalidParameter(format!("row {row} leaves no room for A in a {n}x{n} mesh")));
    }
    let ci = (n - 1) / 2;
    let base = three_line_lattice::<T>(n)?;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let (b, c, a) = (idx(ci, row), idx(ci + 1, row), idx(ci, row + 1));
    let a_prime = (row > 0).then(|| idx(ci + 1, row - 1));
    let h = T::one() / lit(n as f64);
    let bx = base.mesh.vertex(b);
    let q = spec.alpha.tan() * h / lit(4.0);
    let mut vertices = base.mesh.vertices().to_vec();
    let (m, nn, p) = (vertices.len(), vertices.len() + 1, vertices.len() + 2);
    vertices.push([bx[0] + h * lit(0.5), bx[1]]);
    vertices.push([bx[0] + h * lit(0.25), bx[1] + q]);
    vertices.push([bx[0] + h * lit(0.75), bx[1] + q]);
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for &tri in base.mesh.triangles() {
        let mut sorted = tri;
        sorted.sort_unstable();
        let is = |mut x: [usize; 3]| {
            x.sort_unstable();
            x == sorted
        };
        if is([b, c, a]) {
            triangles.extend([[b, m, nn], [m, p, nn], [m, c, p], [b, nn, a], [nn, p, a], [p, c, a]]);
        } else if a_prime.is_some_and(|ap| is([ap, c, b])) {
            let ap = a_prime.expect("checked");
            triangles.extend([[b, ap, m], [m, ap, c]]);
        } else {
            triangles.push(tri);
        }
    }
    let ids = DegenerateVertices { a, b, c, m, n: nn, p, a_prime };
    Ok(DegenerateMesh { mesh: label(TriMesh::new(vertices, triangles)?, &ids)?, vertices: ids })
}

/// The patch `E` cut out of a one-layer-inside embedding, with the local ids
/// of `B, C, A, M, N, P` in that order.
#[derive(Debug, Clone)]
pub struct DegeneratePatch<T> {
    pub patch: Subdomain<T>,
    pub order: [usize; 6],
}

pub fn degenerate_patch<T: Real>(alpha: T) -> Result<DegeneratePatch<T>, MeshError> {
    let host = embed_degenerate(&DegenerateSpec { alpha, placement: Placement::OneLayerInside, n: 4 })?;
    let patch = host.patch_e()?;
    let order = host.vertices.ordered().map(|v| patch.to_local(v).expect("center vertex is in its own star"));
    debug_assert_eq!(patch.partition.interior.len(), 6);
    Ok(DegeneratePatch { patch, order })
}
