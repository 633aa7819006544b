//! Latent-surface shape fitting.
//!
//! A shape decoder maps a latent vector plus a point on a template sphere to a
//! vertex offset. Training learns the decoder weights jointly with one latent
//! vector per training shape (auto-decoding). Fitting freezes the decoder and
//! optimizes one latent vector per template vertex, regularized by a Dirichlet
//! energy on the latent field, against point clouds, planar curve annotations,
//! or voxel segmentations.
//!
//! Data-parallel kernels run on rayon when the default `parallel` feature is
//! enabled; every kernel has a sequential twin (`*_seq`) that produces
//! bitwise-identical results and is used as the fallback and in benchmarks.

pub mod decoder;
pub mod diffcore;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod training;
pub mod volume;

pub use error::{Error, Result};
