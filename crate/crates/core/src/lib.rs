//! Gaussian-mechanism laboratory: the Gaussian mechanism, its backdoored
//! Gaussian-pancake counterpart, privacy accounting for both, the
//! key-holder's distinguishing attack, and the mitigations against it.
//!
//! Every sampler takes an explicit [`RngStream`], so any run is reproducible
//! from `(seed, stream_id)`.

pub mod accounting;
pub mod attacks;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
