#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod convexity;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod matching;
pub mod material;
pub mod monge_ampere;
pub mod par;
pub mod recovery;
pub mod shell_energy;

pub use error::{Error, Result};
