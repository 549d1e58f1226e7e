//! Differentially private synthetic database release with companion
//! estimators, analytic distortion bounds and exact reference oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod continuous;
pub mod estimators;
pub mod graph;
pub mod harness;
pub mod mechanism;
pub mod model;
pub mod oracle;
pub mod queries;

pub use error::{Error, Result};
pub use mechanism::{sample_synthetic, verify_dp, MechanismParams};
pub use model::{enumerate_databases, hamming_distance, is_neighbor, DataUniverse, Database, RandomSource};
