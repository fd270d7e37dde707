//! P1 stiffness, mass and reaction matrices.
//!
//! Two independent stiffness paths are provided: integration of products of
//! barycentric gradients and the angle (cotangent) formulas. They agree up to
//! round-off and are cross-checked in the tests.

use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError};
use crate::mesh::{classify_boundary, IndexPartition, MeshError, TriMesh};
use crate::scalar::{abs, lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("triangle {triangle} is degenerate (area {area:e} below {threshold:e})")]
    DegenerateTriangle { triangle: usize, area: f64, threshold: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_areas<T: Real>(mesh: &TriMesh<T>) -> Result<(), AssemblyError> {
    let d = mesh.bbox_diameter();
    let threshold = lit::<T>(1e-14) * d * d;
    for t in 0..mesh.num_triangles() {
        let area = mesh.area(t);
        if area < threshold {
            return Err(AssemblyError::DegenerateTriangle {
                triangle: t,
                area: crate::scalar::to_f64(area),
                threshold: crate::scalar::to_f64(threshold),
            });
        }
    }
    Ok(())
}

/// Gradients of the three barycentric coordinates of a triangle.
pub fn barycentric_gradients<T: Real>(p: [[T; 2]; 3]) -> [[T; 2]; 3] {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = |j: usize, k: usize| [(p[j][1] - p[k][1]) / two_area, (p[k][0] - p[j][0]) / two_area];
    [g(1, 2), g(2, 0), g(0, 1)]
}

/// Element stiffness by gradient integration.
pub fn element_stiffness_gradient<T: Real>(p: [[T; 2]; 3]) -> [[T; 3]; 3] {
    let g = barycentric_gradients(p);
    let area = crate::mesh::signed_area(p[0], p[1], p[2]).abs();
    let mut k = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// Element stiffness from the interior angles: `-cot(theta_k)/2` off the
/// diagonal and `sin(theta_i) / (2 sin(theta_j) sin(theta_k))` on it.
pub fn element_stiffness_angles<T: Real>(angles: [T; 3]) -> [[T; 3]; 3] {
    let two = lit::<T>(2.0);
    let mut k = [[T::zero(); 3]; 3];
    for i in 0..3 {
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        k[i][i] = angles[i].sin() / (two * angles[j].sin() * angles[l].sin());
        let off = -(angles[l].cos() / angles[l].sin()) / two;
        k[i][j] = off;
        k[j][i] = off;
    }
    k
}

fn scatter<T: Real>(mesh: &TriMesh<T>, element: impl Fn(usize) -> [[T; 3]; 3]) -> DenseMatrix<T> {
    let n = mesh.num_vertices();
    let mut a = DenseMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = element(t);
        for i in 0..3 {
            for j in 0..3 {
                a[(tri[i], tri[j])] = a[(tri[i], tri[j])] + k[i][j];
            }
        }
    }
    a
}

/// Stiffness matrix `a(phi_j, phi_i)` by gradient integration.
pub fn stiffness_gradient<T: Real>(mesh: &TriMesh<T>) -> Result<DenseMatrix<T>, AssemblyError> {
    check_areas(mesh)?;
    Ok(scatter(mesh, |t| element_stiffness_gradient(mesh.triangle_points(t))))
}

/// Stiffness matrix from the angle formulas.
pub fn stiffness_cotangent<T: Real>(mesh: &TriMesh<T>) -> Result<DenseMatrix<T>, AssemblyError> {
    check_areas(mesh)?;
    Ok(scatter(mesh, |t| element_stiffness_angles(mesh.angles(t))))
}

/// Consistent mass matrix: `area/6` on the diagonal, `area/12` off it.
pub fn mass_matrix<T: Real>(mesh: &TriMesh<T>) -> Result<DenseMatrix<T>, AssemblyError> {
    check_areas(mesh)?;
    Ok(scatter(mesh, |t| {
        let s = mesh.area(t) / lit(12.0);
        let mut k = [[s; 3]; 3];
        for (i, row) in k.iter_mut().enumerate() {
            row[i] = s + s;
        }
        k
    }))
}

/// Off-diagonal stiffness of an interior edge with opposite angles `theta1`, `theta2`.
pub fn edge_entry_from_angles<T: Real>(theta1: T, theta2: T) -> Result<T, AssemblyError> {
    let ok = |t: T| t > T::zero() && t < T::PI();
    if !ok(theta1) || !ok(theta2) {
        return Err(AssemblyError::InvalidInput(format!("angles {theta1}, {theta2} must lie in (0, pi)")));
    }
    Ok(-(theta1 + theta2).sin() / (lit::<T>(2.0) * theta1.sin() * theta2.sin()))
}

/// Maximum relative entrywise difference between two stiffness matrices,
/// measured against `max|A|`.
pub fn relative_discrepancy<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<T, AssemblyError> {
    let scale = crate::scalar::max(a.max_abs(), b.max_abs());
    let diff = a.max_abs_diff(b)?;
    Ok(if scale > T::zero() { diff / scale } else { diff })
}

/// Nodal data turned into a dual load vector `F = M f`, or a dual vector given directly.
#[derive(Debug, Clone, PartialEq)]
pub enum Load<T> {
    Nodal(Vec<T>),
    Dual(Vec<T>),
}

pub fn load_vector<T: Real>(mass: &DenseMatrix<T>, load: &Load<T>) -> Result<Vec<T>, AssemblyError> {
    let n = mass.rows();
    let (v, nodal) = match load {
        Load::Nodal(v) => (v, true),
        Load::Dual(v) => (v, false),
    };
    if v.len() != n {
        return Err(AssemblyError::InvalidInput(format!("load of length {} for {n} vertices", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(AssemblyError::InvalidInput("load has non-finite entries".into()));
    }
    if nodal {
        Ok(mass.mul_vec(v)?)
    } else {
        Ok(v.clone())
    }
}

/// Stiffness, mass and reaction matrices of a mesh with a constant reaction coefficient.
#[derive(Debug, Clone)]
pub struct AssembledSystem<T> {
    pub stiffness: DenseMatrix<T>,
    pub mass: DenseMatrix<T>,
    /// `c_tilde * mass`.
    pub reaction: DenseMatrix<T>,
    pub c_tilde: T,
    pub partition: IndexPartition,
    pub mesh_size: T,
    operator: DenseMatrix<T>,
}

impl<T: Real> AssembledSystem<T> {
    /// Assembles with the gradient stiffness path. A negative `c_tilde` is
    /// accepted (see [`Self::has_negative_reaction`]) for perturbation studies.
    pub fn new(mesh: &TriMesh<T>, c_tilde: T) -> Result<Self, AssemblyError> {
        if !c_tilde.is_finite() {
            return Err(AssemblyError::InvalidInput("reaction coefficient must be finite".into()));
        }
        let stiffness = stiffness_gradient(mesh)?;
        let mass = mass_matrix(mesh)?;
        Ok(Self::from_parts(stiffness, mass, c_tilde, classify_boundary(mesh), mesh.mesh_size()))
    }

    pub fn from_parts(stiffness: DenseMatrix<T>, mass: DenseMatrix<T>, c_tilde: T, partition: IndexPartition, mesh_size: T) -> Self {
        let reaction = mass.scale(c_tilde);
        let operator = stiffness.add(&reaction).expect("stiffness and mass share a shape");
        Self { stiffness, mass, reaction, c_tilde, partition, mesh_size, operator }
    }

    pub fn has_negative_reaction(&self) -> bool {
        self.c_tilde < T::zero()
    }

    /// `A + C`.
    pub fn operator(&self) -> &DenseMatrix<T> {
        &self.operator
    }

    pub fn interior_block(&self) -> DenseMatrix<T> {
        let p = &self.partition;
        self.operator.submatrix(&p.interior, &p.interior).expect("partition indices are in range")
    }

    pub fn coupling_block(&self) -> DenseMatrix<T> {
        let p = &self.partition;
        self.operator.submatrix(&p.interior, &p.boundary).expect("partition indices are in range")
    }

    /// Largest `|sum_j A_ij|`, which vanishes for the pure stiffness matrix.
    pub fn stiffness_row_sum_defect(&self) -> T {
        (0..self.stiffness.rows())
            .map(|i| abs(self.stiffness.row(i).iter().fold(T::zero(), |s, &x| s + x)))
            .fold(T::zero(), crate::scalar::max)
    }
}
