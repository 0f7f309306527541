//! Approximate projection onto the tangent cone to the variety of third-order
//! tensors with bounded tensor-train rank.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor3`]: dense third-order tensors, unfoldings and mode contractions.
//! - [`linalg`]: SVD, truncated SVD, orthogonal projectors and complements.
//! - [`ttd`]: tensor-train decompositions and their two orthogonal canonical forms.
//! - [`tangent`]: the tangent-cone parametrization (assembly, extraction,
//!   closed-form optimal parameters, tangent-space projection).
//! - [`projection`]: alternating truncated SVDs for the free frames and the
//!   resulting approximate projection together with its angle bounds.
//! - [`oracle`]: desk-scale exact projection used as a benchmark.
//! - [`t3d`]: the plain-text tensor file format.

pub mod error;
pub mod linalg;
pub mod oracle;
pub mod projection;
pub mod t3d;
pub mod tangent;
pub mod tensor3;
pub mod ttd;

pub use error::{Error, Result};
pub use linalg::TruncatedSvd;
pub use oracle::{OracleMethod, OracleResult};
pub use projection::{AlternatingOptions, Branch, ProjectionResult};
pub use tangent::TangentParams;
pub use tensor3::Tensor3;
pub use ttd::{CanonicalTtPair, Ttd};

/// Dense real matrix type used throughout (column-major).
pub type Matrix = nalgebra::DMatrix<f64>;
