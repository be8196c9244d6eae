//! Detector tomography for qubit readout.
//!
//! The crate covers the full loop of characterizing an imperfect measurement
//! device and correcting for it:
//!
//! * [`simulator`] produces shot counts from a noisy detector model driven by
//!   a deterministic, seedable RNG;
//! * [`mle`] reconstructs the detector POVM from those counts by iterative
//!   maximum-likelihood detector tomography, with bootstrap error bars;
//! * [`analysis`] quantifies inter-qubit readout crosstalk by comparing
//!   conditioned single-qubit detectors;
//! * [`mitigation`] builds the classical response matrix of a detector and
//!   undoes readout error on measured distributions, by direct inversion or
//!   by simplex-constrained least squares.
//!
//! Operators live in [`tensor`] as dense complex matrices or as real
//! coefficient vectors over the N-qubit Pauli product basis; [`detector`]
//! wraps a full POVM keyed by outcome bitstring, and [`states`] supplies the
//! Pauli-eigenstate test ensemble that drives tomography.

pub mod analysis;
pub mod detector;
pub mod error;
pub mod io;
pub mod mitigation;
pub mod mle;
pub mod rng;
pub mod simulator;
pub mod states;
pub mod tensor;

pub use error::{QdtError, Result};
