//! Cooperative passive bistatic sensing between a low-band macro base
//! station (MBS) and a high-band micro base station (MiBS).
//!
//! The crate synthesizes post-cancellation OFDM echo tensors for both
//! receivers ([`waveform`]), fuses them on a common subcarrier lattice
//! ([`fusion`]), localizes targets with a grid matched filter and with
//! 3D-DFT / 3D-MUSIC baselines ([`estimators`]) and evaluates everything in
//! a Monte-Carlo harness ([`eval`]).

pub mod dump;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod fusion;
pub mod scenario;
pub mod tensor;
pub mod waveform;

pub use error::{Error, Result};
