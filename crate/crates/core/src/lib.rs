//! Codeword selection for RIS-aided mmWave MIMO links.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: Rician transmitter→RIS and RIS→receiver channel synthesis.
//! - [`codebook`]: phase-dependent amplitude response and DFT codebooks.
//! - [`precoding`]: effective channel, SVD precoder, rates, exhaustive
//!   search and the composite feature matrix fed to the classifier.
//! - [`mlp`]: a from-scratch MLP classifier with batch normalization and Adam.
//! - [`harness`]: datasets, sweeps, timing benchmarks and the CLI plumbing.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod harness;
pub mod mlp;
pub mod precoding;
pub mod rng;

pub use num_complex::Complex64;

pub use channel::{ChannelPair, LinkGeometry, PathAngles, SystemConfig};
pub use codebook::{Codebook, CodebookMode, RisProfile};
pub use error::{Error, Result};
pub use precoding::{EffectiveChannel, FeatureMatrix, SelectionResult};
pub use rng::SimRng;
