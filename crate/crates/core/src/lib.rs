//! Flat magic-unitary matrix models.
//!
//! Builds magic unitaries whose entries are rank-one projections from
//! group-theoretic unitary bases and from a Sinkhorn-type flattening
//! iteration, and estimates the moments of their main characters.

pub mod conjectures;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod magic;
pub mod mc;
pub mod moments;
pub mod rng;
pub mod sinkhorn;

pub use conjectures::{ProjectionQuadruple, QuadrupleMode, QuadrupleSpec, TrialReport};
pub use error::{Error, Result};
pub use groups::{
    AlgebraKind, Cocycle, FiniteAbelianGroup, GroupElement, GroupTable, LatinSquare,
    OrthonormalUnitaryBasis,
};
pub use linalg::{CMatrix, CVector, Projection, C64};
pub use magic::{FlatMagicUnitary, MagicResidual, ProjectionGrid, VectorGrid};
pub use moments::{MomentSeries, MomentTransferMatrix, SetPartition};
pub use sinkhorn::{FlatteningTrace, UnitaryTuple};

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
