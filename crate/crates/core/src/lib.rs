//! Wavelet-domain masked pretraining and temporal fusion for LDR to HDR
//! video reconstruction.
//!
//! This crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core: a dense [`Tensor`] with a reverse-mode [`Graph`], orthogonal 2D
//! wavelet filter banks with the wavelet masking pretext task, the network
//! (encoder, temporal mixture of experts, scene memory, decoder), training
//! losses, evaluation metrics, the two-phase training loops and a synthetic
//! paired-scene generator. File formats and the command-line driver live in
//! the `wmnet` crate.

#![no_std]

extern crate alloc;

mod error;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod wavelet;

pub use error::{Error, Result};
pub use graph::{Graph, OpKind, Var};
pub use tensor::Tensor;
