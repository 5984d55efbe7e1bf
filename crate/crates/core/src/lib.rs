//! Block-permuted sparse sketching with deterministic, tiled CPU kernels.
//!
//! The operator family partitions the input coordinates into M blocks,
//! connects each output block to kappa input blocks through edge-disjoint
//! block permutations, and fills each selected block with a sparse
//! sign-pattern column (s nonzeros of magnitude 1/sqrt(kappa*s)). Everything
//! is a pure function of a 64-bit seed, so sketches are reproducible bit for
//! bit across runs, worker counts and machines.

pub mod coherence;
pub mod data;
pub mod error;
pub mod hashing;
pub mod layout;
pub mod matrix;
pub mod operator;
pub mod tasks;
pub mod theoryval;
pub mod wiring;

pub use error::{Error, Result};
pub use hashing::IntraMode;
pub use layout::{make_layout, make_layout_default, BlockLayout, Precision, SketchParams};
pub use matrix::DenseMatrix;
pub use operator::{apply_blockrow, blockrow_neighborhood, SketchOperator};
pub use wiring::Wiring;
