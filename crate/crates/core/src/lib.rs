//! Simulation of a heralded three-photon GHZ source built from cascaded
//! parametric downconversion, and reconstruction of its density-matrix
//! elements by multimode homodyne tomography.
//!
//! The crate is organized bottom-up:
//!
//! - [`fock`]: sparse kets over a truncated multimode Fock basis.
//! - [`source`]: the downconversion cascade and detector heralding.
//! - [`homodyne`]: exact joint quadrature densities and an exact sampler.
//! - [`kernel`]: unbiased tomographic estimator kernels.
//! - [`experiment`]: the Monte-Carlo reconstruction of the GHZ phase curve.
//! - [`config`]: the on-disk experiment configuration.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod homodyne;
pub mod kernel;
pub mod quadrature;
pub mod source;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
