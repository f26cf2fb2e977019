//! Influence matrix of the kicked transverse-field Ising chain.
//!
//! - [`model`]: closed-form single-particle analytics (dispersion, Bloch data, edge modes, phases)
//! - [`majorana`]: Majorana dynamics of the environment, memory kernel, spectral density
//! - [`gaussian`]: the exact IM as a fermionic pairing state and its temporal entanglement
//! - [`spin`]: dense spin-basis oracles (Floquet operator, IM tensors, autocorrelations)
//! - [`mps`]: MPS fixed-point iteration of the dual transfer matrix for `h ≠ 0`

pub mod gaussian;
pub mod majorana;
pub mod model;
pub mod mps;
pub mod quad;
pub mod spin;

pub use model::ModelParams;
