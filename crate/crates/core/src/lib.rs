//! Exact verification, bound computation and photon-counting simulation for
//! the 40-ray eight-dimensional Kochen-Specker set.

pub mod error;
pub mod exact;
pub mod ksset;
pub mod pentagram;

pub use error::{Error, Result};
pub mod bounds;
pub mod quantum;
pub mod analysis;
pub mod pipeline;
pub mod simulator;
