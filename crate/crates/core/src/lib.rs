//! Step-truncation time integration of tensor ODEs in hierarchical Tucker format.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fokker_planck;
pub mod htucker;
pub mod integrators;
pub mod linalg;
pub mod manifold;
pub mod operators;
pub mod randgen;
pub mod reference;
pub mod spectral;
pub mod suites;
pub mod tensor;

pub use error::{Error, Result};
pub use htucker::{DimensionTree, HTensor, TreeShape, Truncation, TruncationControl};
pub use tensor::{DenseTensor, Matrix, ModeSet};
