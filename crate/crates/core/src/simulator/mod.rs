//! Pulse-level Monte Carlo of the single-photon experiment.
//!
//! A run fixes one realization of the apparatus (a bank of jitter frames
//! per mask), prepares the state once, then projects each weak pulse onto a test drawn
//! uniformly from the pool. Detection is Bernoulli with probability
//! `(1 - e^{-mu}) * p_noisy`. Normalization comes from a separate all-pass
//! flux measurement per basis, never from the test counts themselves.

mod calibrate;
mod campaign;
mod mask;
mod noise;
pub mod rng;
mod run;

pub use calibrate::*;
pub use campaign::*;
pub use mask::*;
pub use noise::*;
pub use run::*;
