//! Numerical model of motional coherence created in an atomic matterwave by a
//! single spontaneous emission event close to a mirror.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerics:
//!
//! * [`grid`] and [`wavepacket`]: the mirror-normal motional state on a
//!   uniform momentum grid, its construction and the elementary unitaries.
//! * [`emission`]: the post-emission mixed state as a weighted ensemble of
//!   pure recoil superpositions, plus the semiclassical disk-overlap model.
//! * [`interferometer`]: Bragg recombination, free flight, momentum-resolved
//!   detection and averaging over the atomic beam.
//! * [`analysis`]: fringe fitting, visibility curves and deconvolution.
//!
//! Momenta are measured in units of the photon recoil `ħk0`, positions in
//! metres and times in seconds throughout.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod constants;
pub mod emission;
mod error;
pub mod fft;
pub mod grid;
pub mod interferometer;
pub mod params;
pub mod quadrature;
pub mod wavepacket;

pub use error::{Error, Result};
pub use grid::MomentumGrid;
pub use params::ExperimentParams;
pub use wavepacket::Wavepacket;

pub use num_complex::Complex64;
