//! Discrete maximum principles for P1 finite elements on triangle meshes.
//!
//! The crate assembles stiffness, mass and reaction matrices, certifies
//! strong and weak discrete maximum principles through patch covers, solves
//! linear and semilinear problems, and reproduces a set of numerical studies
//! on defective meshes. The numerical core is generic over [`scalar::Scalar`]
//! (dense algebra) and [`scalar::Real`] (geometry); the aliases below fix
//! the common `f64` instantiation.

pub mod assembly;
pub mod certify;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod scalar;
pub mod solvers;
pub mod studies;

pub use num_rational::Rational64;

/// Dense `f64` matrix.
pub type Matrix = linalg::DenseMatrix<f64>;
/// Dense exact rational matrix.
pub type RationalMatrix = linalg::DenseMatrix<Rational64>;
/// `f64` triangle mesh.
pub type Mesh = mesh::TriMesh<f64>;
/// Single precision triangle mesh.
pub type Mesh32 = mesh::TriMesh<f32>;
/// `f64` subdomain.
pub type Patch = mesh::Subdomain<f64>;
/// `f64` assembled system.
pub type System = assembly::AssembledSystem<f64>;
