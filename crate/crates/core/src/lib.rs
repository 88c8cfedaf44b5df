//! Sparse frequency-domain extrapolation of 2D signals, applied to
//! concealment of lost blocks in grayscale images.
//!
//! The library models the known surroundings of a lost region as a sparse
//! sum of 2D Fourier basis functions, selected and weighted iteratively
//! (FSE), optionally refining several candidate functions per iteration by
//! a joint least-squares fit (MuSE). The model evaluated over the lost
//! region replaces the missing samples.

pub mod basis;
pub mod conceal;
pub mod error;
pub mod fse;
pub mod grid;
pub mod muse;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
