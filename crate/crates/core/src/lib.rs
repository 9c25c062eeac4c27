//! Computation of a linear function of two sources over a multiple access
//! channel using nested coset codes over prime fields.

pub mod error;
pub mod galois;
pub mod harness;
pub mod km;
pub mod model;
pub mod ncc;
pub mod probability;
pub mod regions;

pub use error::{Error, Result};
