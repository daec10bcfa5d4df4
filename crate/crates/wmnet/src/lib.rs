//! File formats, checkpoints and the command-line driver for `wmnet-core`.
//!
//! Frames are stored as PFM images in scene directories
//! (`<scene>/ldr/NNNN.pfm`, `<scene>/hdr/NNNN.pfm`), tensors as WTNS
//! containers, and checkpoints as a directory of WTNS files with a manifest.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod pfm;
pub mod wtns;

pub use error::{CliError, Result};
