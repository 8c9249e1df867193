//! Non-rigid registration of triangle meshes by matching signed distance
//! fields, with the deformation restricted to an adaptively enriched
//! linear blend skinning subspace built from Laplacian eigenmodes.
//!
//! Pipeline: [`operators`] assembles the cotangent Laplacian and lumped
//! mass, [`subspace`] solves for skinning weights and builds the basis,
//! [`sdf`] evaluates exact signed distances on a fixed quadrature grid,
//! [`energy`] measures the mismatch, and [`optimizer`] runs reduced
//! gradient descent, adding one mode each time progress stalls.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double precision instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod obj;
pub mod operators;
pub mod optimizer;
pub mod scalar;
pub mod sdf;
pub mod selftest;
pub mod shapes;
pub mod subspace;

pub use energy::{dirichlet_energy, energy, energy_gradient, total_energy, EnergyReport, RegistrationObjective, SdfObjective};
pub use error::{RegError, Result};
pub use geometry::{Aabb, Mat3, Vec3};
pub use mesh::{joint_bounding_box, FlatCoords, Similarity, TriMesh};
pub use obj::{load_obj, read_obj, save_obj, write_obj};
pub use operators::{cotan_laplacian, lumped_mass, SparseSymMatrix};
pub use optimizer::{
    line_search, register, register_on_quadrature, register_with_observer, stall_check, stall_schedule,
    LineSearchParams, OptimizerConfig, OptimizerTrace, QuadratureOptions, Registration, Termination,
    TraceEvent, TraceRecord,
};
pub use scalar::Real;
pub use sdf::{make_quadrature, signed_distance, ClosestPointRecord, QuadratureSet, SdfMesh, SignMode};
pub use subspace::{build_basis, compute_modes, ReducedCoords, SkinningModes, SubspaceBasis};

pub type Vec3f64 = Vec3<f64>;
pub type TriMesh64 = TriMesh<f64>;
pub type FlatCoords64 = FlatCoords<f64>;
pub type SparseSymMatrix64 = SparseSymMatrix<f64>;
pub type SkinningModes64 = SkinningModes<f64>;
pub type SubspaceBasis64 = SubspaceBasis<f64>;
pub type ReducedCoords64 = ReducedCoords<f64>;
pub type QuadratureSet64 = QuadratureSet<f64>;
pub type OptimizerConfig64 = OptimizerConfig<f64>;
pub type Registration64 = Registration<f64>;

pub type TriMesh32 = TriMesh<f32>;
pub type OptimizerConfig32 = OptimizerConfig<f32>;
