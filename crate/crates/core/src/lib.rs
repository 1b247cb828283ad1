//! Maximum-likelihood decoding of the planar surface code under unitary
//! errors.
//!
//! The crate samples syndromes from the corrupted code state through an
//! isometric tensor-network construction ([`isotns`]), maps each homology
//! class to a complex-weight Ising partition function ([`rbim`]), and
//! evaluates those partition functions by transfer-matrix contraction of a
//! boundary MPS ([`decode`]). [`code`] holds the lattice, the stabilizer
//! algebra and exact dense-statevector oracles for small codes, and
//! [`exper`] drives parameter sweeps and finite-size-scaling fits.

pub mod code;
pub mod decode;
pub mod error;
pub mod exper;
pub mod isotns;
pub mod mps;
pub mod rbim;
pub mod rng;
pub mod tensors;

pub use error::{Error, Result};
pub use tensors::{ComplexTensor, C64};
