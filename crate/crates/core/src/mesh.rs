//! Triangle meshes, boundary classification and discrete subdomains.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh has no triangles")]
    Empty,
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexIndexOutOfRange { triangle: usize, vertex: usize, count: usize },
    #[error("triangle {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("triangle {0} has zero area")]
    DegenerateTriangle(usize),
    #[error("vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("edge ({0}, {1}) is shared by {2} triangles")]
    NonManifoldEdge(usize, usize, usize),
    #[error("vertex {0} belongs to no triangle")]
    UnusedVertex(usize),
    #[error("triangle index {0} out of range")]
    TriangleIndexOutOfRange(usize),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("subdomain selection is empty")]
    EmptySelection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed mesh file: {0}")]
    Format(String),
}

/// Undirected edge key with `lo < hi`.
pub type Edge = (usize, usize);

#[inline]
pub fn edge_key(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Triangle mesh with counter-clockwise triangles and cached topology.
#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    labels: BTreeMap<String, usize>,
    topology: Topology,
}

/// Edge and vertex incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Triangles incident to each edge (one or two).
    pub edges: BTreeMap<Edge, Vec<usize>>,
    /// Sorted neighbours of each vertex.
    pub neighbors: Vec<Vec<usize>>,
    /// Triangles containing each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
}

impl<T: Real> TriMesh<T> {
    /// Validates and builds a mesh. Clockwise triangles are reoriented.
    ///
    /// Rejects out-of-range indices, repeated indices, zero-area triangles,
    /// vertices closer than `1e-12` times the bounding-box diameter, unused
    /// vertices and edges shared by more than two triangles.
    pub fn new(vertices: Vec<[T; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let count = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        let mut triangles = triangles;
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= count {
                    return Err(MeshError::VertexIndexOutOfRange { triangle: t, vertex: v, count });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex(t));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area == T::zero() {
                return Err(MeshError::DegenerateTriangle(t));
            }
            if area < T::zero() {
                tri.swap(1, 2);
            }
        }
        check_duplicates(&vertices)?;
        let topology = Topology::build(count, &triangles)?;
        if let Some(v) = topology.vertex_triangles.iter().position(Vec::is_empty) {
            return Err(MeshError::UnusedVertex(v));
        }
        Ok(Self { vertices, triangles, labels: BTreeMap::new(), topology })
    }

    /// Attaches a named vertex label.
    pub fn with_label(mut self, name: impl Into<String>, vertex: usize) -> Result<Self, MeshError> {
        if vertex >= self.vertices.len() {
            return Err(MeshError::VertexOutOfRange(vertex));
        }
        self.labels.insert(name.into(), vertex);
        Ok(self)
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn labels(&self) -> &BTreeMap<String, usize> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<usize> {
        self.labels.get(name).copied()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> [T; 2] {
        self.vertices[i]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.topology.neighbors[v]
    }

    pub fn triangle_points(&self, t: usize) -> [[T; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Positive area of triangle `t`.
    pub fn area(&self, t: usize) -> T {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Interior angles of triangle `t`, ordered like its vertices.
    pub fn angles(&self, t: usize) -> [T; 3] {
        let p = self.triangle_points(t);
        [angle_at(p[0], p[1], p[2]), angle_at(p[1], p[2], p[0]), angle_at(p[2], p[0], p[1])]
    }

    /// Mesh size: the longest edge.
    pub fn mesh_size(&self) -> T {
        self.topology
            .edges
            .keys()
            .map(|&(a, b)| dist(self.vertices[a], self.vertices[b]))
            .fold(T::zero(), T::max)
    }

    pub fn bbox_diameter(&self) -> T {
        bbox_diameter(&self.vertices)
    }

    /// Smallest and largest interior angle over all triangles.
    pub fn angle_range(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for t in 0..self.num_triangles() {
            for a in self.angles(t) {
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        (lo, hi)
    }

    /// Returns a copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            v[0] = v[0] * factor;
            v[1] = v[1] * factor;
        }
        out
    }

    /// Converts to another floating point type.
    pub fn cast<U: Real>(&self) -> Result<TriMesh<U>, MeshError> {
        let vertices = self.vertices.iter().map(|v| [lit(crate::scalar::to_f64(v[0])), lit(crate::scalar::to_f64(v[1]))]).collect();
        let mut m = TriMesh::new(vertices, self.triangles.clone())?;
        m.labels = self.labels.clone();
        Ok(m)
    }
}

impl Topology {
    fn build(count: usize, triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        let mut edges: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
        let mut vertex_triangles = vec![Vec::new(); count];
        let mut nb: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); count];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.entry(edge_key(a, b)).or_default().push(t);
                nb[a].insert(b);
                nb[b].insert(a);
                vertex_triangles[tri[k]].push(t);
            }
        }
        if let Some((&(a, b), ts)) = edges.iter().find(|(_, ts)| ts.len() > 2) {
            return Err(MeshError::NonManifoldEdge(a, b, ts.len()));
        }
        Ok(Self { edges, neighbors: nb.into_iter().map(|s| s.into_iter().collect()).collect(), vertex_triangles })
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().filter(|(_, ts)| ts.len() == 1).map(|(&e, _)| e)
    }
}

pub fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * lit(0.5)
}

pub fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Angle at `p` in the triangle `p q r`.
pub fn angle_at<T: Real>(p: [T; 2], q: [T; 2], r: [T; 2]) -> T {
    let u = [q[0] - p[0], q[1] - p[1]];
    let v = [r[0] - p[0], r[1] - p[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

fn bbox_diameter<T: Real>(vertices: &[[T; 2]]) -> T {
    let (mut x0, mut y0, mut x1, mut y1) = (T::infinity(), T::infinity(), T::neg_infinity(), T::neg_infinity());
    for v in vertices {
        x0 = x0.min(v[0]);
        x1 = x1.max(v[0]);
        y0 = y0.min(v[1]);
        y1 = y1.max(v[1]);
    }
    (x1 - x0).hypot(y1 - y0)
}

fn check_duplicates<T: Real>(vertices: &[[T; 2]]) -> Result<(), MeshError> {
    let tol = bbox_diameter(vertices) * lit(1e-12);
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| vertices[a][0].partial_cmp(&vertices[b][0]).expect("finite"));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if vertices[j][0] - vertices[i][0] > tol {
                break;
            }
            if dist(vertices[i], vertices[j]) <= tol {
                return Err(MeshError::DuplicateVertex(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

/// Split of the vertices into interior (`alpha`) and boundary (`beta`) sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexPartition {
    /// Interior vertices, ascending.
    pub interior: Vec<usize>,
    /// Boundary vertices, ascending.
    pub boundary: Vec<usize>,
    /// `is_boundary[v]`.
    pub is_boundary: Vec<bool>,
}

impl IndexPartition {
    pub fn num_vertices(&self) -> usize {
        self.is_boundary.len()
    }

    pub fn is_interior(&self, v: usize) -> bool {
        !self.is_boundary[v]
    }
}

/// A vertex is on the boundary iff it lies on an edge that belongs to exactly one triangle.
pub fn classify_boundary<T: Real>(mesh: &TriMesh<T>) -> IndexPartition {
    let mut is_boundary = vec![false; mesh.num_vertices()];
    for (a, b) in mesh.topology().boundary_edges() {
        is_boundary[a] = true;
        is_boundary[b] = true;
    }
    let interior = (0..is_boundary.len()).filter(|&v| !is_boundary[v]).collect();
    let boundary = (0..is_boundary.len()).filter(|&v| is_boundary[v]).collect();
    IndexPartition { interior, boundary, is_boundary }
}

/// Number of connected components of the graph on interior vertices.
pub fn interior_components<T: Real>(mesh: &TriMesh<T>, partition: &IndexPartition) -> usize {
    let mut seen = vec![false; mesh.num_vertices()];
    let mut components = 0;
    for &start in &partition.interior {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in mesh.neighbors(v) {
                if partition.is_interior(w) && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    components
}

/// True when the interior vertices form one connected graph.
pub fn interior_graph_connected<T: Real>(mesh: &TriMesh<T>, partition: &IndexPartition) -> bool {
    interior_components(mesh, partition) == 1
}

/// Boundary vertices with no interior neighbour. Empty when the condition holds.
pub fn boundary_adjacent_to_interior<T: Real>(mesh: &TriMesh<T>, partition: &IndexPartition) -> Vec<usize> {
    partition
        .boundary
        .iter()
        .copied()
        .filter(|&b| !mesh.neighbors(b).iter().any(|&w| partition.is_interior(w)))
        .collect()
}

/// A union of triangles of a parent mesh, re-indexed as a mesh of its own.
///
/// Local vertices are numbered in ascending order of their parent index.
#[derive(Debug, Clone)]
pub struct Subdomain<T> {
    pub mesh: TriMesh<T>,
    pub partition: IndexPartition,
    /// Parent triangle ids, ascending.
    pub parent_triangles: Vec<usize>,
    pub local_to_parent: Vec<usize>,
    parent_to_local: HashMap<usize, usize>,
}

impl<T: Real> Subdomain<T> {
    pub fn to_local(&self, parent: usize) -> Option<usize> {
        self.parent_to_local.get(&parent).copied()
    }

    pub fn to_parent(&self, local: usize) -> usize {
        self.local_to_parent[local]
    }

    /// Parent indices of the subdomain's interior vertices.
    pub fn interior_parent(&self) -> Vec<usize> {
        self.partition.interior.iter().map(|&v| self.local_to_parent[v]).collect()
    }

    /// Parent indices of the subdomain's boundary vertices.
    pub fn boundary_parent(&self) -> Vec<usize> {
        self.partition.boundary.iter().map(|&v| self.local_to_parent[v]).collect()
    }
}

/// Extracts the subdomain made of the given parent triangles.
pub fn extract_subdomain<T: Real>(mesh: &TriMesh<T>, triangle_ids: &[usize]) -> Result<Subdomain<T>, MeshError> {
    if triangle_ids.is_empty() {
        return Err(MeshError::EmptySelection);
    }
    let ids: BTreeSet<usize> = triangle_ids.iter().copied().collect();
    if let Some(&bad) = ids.iter().find(|&&t| t >= mesh.num_triangles()) {
        return Err(MeshError::TriangleIndexOutOfRange(bad));
    }
    let used: BTreeSet<usize> = ids.iter().flat_map(|&t| mesh.triangles()[t]).collect();
    let local_to_parent: Vec<usize> = used.into_iter().collect();
    let parent_to_local: HashMap<usize, usize> = local_to_parent.iter().enumerate().map(|(l, &p)| (p, l)).collect();
    let vertices = local_to_parent.iter().map(|&p| mesh.vertex(p)).collect();
    let triangles = ids.iter().map(|&t| mesh.triangles()[t].map(|p| parent_to_local[&p])).collect();
    let mut sub = TriMesh::new(vertices, triangles)?;
    for (name, &p) in mesh.labels() {
        if let Some(&l) = parent_to_local.get(&p) {
            sub.labels.insert(name.clone(), l);
        }
    }
    let partition = classify_boundary(&sub);
    Ok(Subdomain { mesh: sub, partition, parent_triangles: ids.into_iter().collect(), local_to_parent, parent_to_local })
}

/// Triangles containing any of the given vertices.
pub fn triangles_around<T: Real>(mesh: &TriMesh<T>, centers: &[usize]) -> Result<Vec<usize>, MeshError> {
    let mut out = BTreeSet::new();
    for &v in centers {
        if v >= mesh.num_vertices() {
            return Err(MeshError::VertexOutOfRange(v));
        }
        out.extend(mesh.topology().vertex_triangles[v].iter().copied());
    }
    Ok(out.into_iter().collect())
}

/// The star of `v`: every triangle containing it.
pub fn star<T: Real>(mesh: &TriMesh<T>, v: usize) -> Result<Subdomain<T>, MeshError> {
    extract_subdomain(mesh, &triangles_around(mesh, &[v])?)
}

/// Union of the stars of all vertices within graph distance `k - 1` of `v`
/// (so `k = 1` is the star).
pub fn ring<T: Real>(mesh: &TriMesh<T>, v: usize, k: usize) -> Result<Subdomain<T>, MeshError> {
    if v >= mesh.num_vertices() {
        return Err(MeshError::VertexOutOfRange(v));
    }
    if k == 0 {
        return Err(MeshError::InvalidParameter("ring radius must be at least 1".into()));
    }
    let mut dist = HashMap::from([(v, 0usize)]);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d + 1 >= k {
            continue;
        }
        for &w in mesh.neighbors(u) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    let mut centers: Vec<usize> = dist.into_keys().collect();
    centers.sort_unstable();
    extract_subdomain(mesh, &triangles_around(mesh, &centers)?)
}

/// Interior vertices of `mesh` that are not interior to any patch.
pub fn covers_interior<T: Real>(mesh: &TriMesh<T>, partition: &IndexPartition, patches: &[Subdomain<T>]) -> Vec<usize> {
    let mut covered = vec![false; mesh.num_vertices()];
    for p in patches {
        for v in p.interior_parent() {
            covered[v] = true;
        }
    }
    partition.interior.iter().copied().filter(|&v| !covered[v]).collect()
}
