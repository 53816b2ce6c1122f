//! Monte Carlo lab for zero-crossing information leaks in KLJN-style
//! key exchangers.
//!
//! A bit is one connection of Alice's and Bob's resistors over a wire, each
//! resistor driven by its own band-limited noise source. [`noise`] makes the
//! source waveforms, [`circuit`] solves the loop, [`crossing`] samples one
//! wire quantity at the zero crossings of the other, and [`attack`] turns
//! those samples into Eve's bit guesses. [`schemes`] holds the resistor and
//! noise-level presets; [`harness`] runs the experiments and writes results.

pub mod attack;
pub mod bitsim;
pub mod circuit;
pub mod crossing;
pub mod error;
pub mod harness;
pub mod noise;
pub mod schemes;
pub mod stats;

pub use error::{Error, Result};
