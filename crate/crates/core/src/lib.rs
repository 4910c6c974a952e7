//! Robustness benchmark for multi-modal semantic segmentation under missing and
//! noisy modalities.
//!
//! Corruption regimes: whole-modality dropout (EMM), random element dropout
//! (RMM) and Gaussian plus salt-and-pepper noise (NM). Scores are mIoU per
//! modality combination, aggregated as a plain average and as an expected value
//! under independent modality failure.

pub mod aggregate;
pub mod corrupt;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod modality;
pub mod rng;
pub mod scenario;
pub mod tensor;

pub use error::{Error, Result};
