//! SMOTE oversampling and privacy attacks against its output.
//!
//! The crate contains a provenance-tracking SMOTE implementation, two
//! geometric attacks (separating real from synthetic minority rows in an
//! augmented dataset, and reconstructing real minority rows from a synthetic
//! release), closed-form recall bounds for the reconstruction attack, and
//! desk-scale baseline privacy evaluations (distance to closest record,
//! linkability, classifier distinguishing and membership inference).

pub mod attacks;
pub mod baselines;
pub mod bounds;
pub mod data;
pub mod error;
pub mod geometry;
pub mod knn;
pub mod matrix;
pub mod seed;
pub mod smote;

pub use data::{LabeledDataset, Origin};
pub use error::{Error, Result};
pub use matrix::Matrix;
