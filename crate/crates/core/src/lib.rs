//! Core library for byte-stream classification with a conditioning sub-net.
//!
//! A sub-net reads a raw byte window, predicts a global class distribution,
//! and that distribution is appended to every position of the main net's
//! input by a broadcast concatenator. The main net's bias-free first layer
//! then maps each position into a subspace selected by the conditioning
//! vector, which is what lets one classifier handle byte streams whose
//! local blocks mean different things in different global contexts.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all file formats are
//! defined as byte-level encoders/decoders and the operating-system I/O
//! lives in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod object;
pub mod optim;
pub mod regimes;
pub mod report;
pub mod rng;
pub mod schema;
pub mod synth;
pub mod tensor;
mod wire;

pub use error::Error;
pub use tensor::Tensor;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
