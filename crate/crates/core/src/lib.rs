//! Feature-preserving denoising of triangulated surfaces.
//!
//! The pipeline runs in two stages. First, face normals are filtered by
//! minimizing a weighted second-order roughness measure with an augmented
//! Lagrangian splitting ([`filter`]); the weights adapt to the evolving
//! normal field so sharp creases survive while noise is flattened. Second,
//! vertex positions are recovered by descending an orientation-aware energy
//! that matches actual face normals — direction included — to the filtered
//! ones ([`vertex`]), which is what keeps folded-over triangles from
//! appearing.
//!
//! Supporting layers: [`mesh`] holds validated connectivity, [`field`] and
//! [`ops`] provide the piecewise-constant calculus the filter is built on,
//! [`noise`] and [`metrics`] cover synthetic corruption and quality
//! measures, and [`io`] reads and writes OBJ/OFF files.

// Indexed loops over parallel slices and fixed channel counts are the house
// style in the numeric kernels; iterator rewrites obscure the math.
#![allow(clippy::needless_range_loop)]

pub mod field;
pub mod filter;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod noise;
pub mod ops;
pub mod shapes;
pub mod sparse;
pub mod vertex;

pub use field::{EdgeField, FaceField, LineField};
pub use filter::{FilterConfig, FilterError, FilterOutcome};
pub use mesh::{Mesh, MeshError};
pub use ops::Regularizer;
pub use vertex::{UpdateConfig, UpdateOutcome};
