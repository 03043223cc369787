//! Speech enhancement with complex Gaussian mixture posteriors.
//!
//! A compact network maps a noisy STFT to, per time-frequency bin, `L`
//! Wiener masks, `L` variances and `L` mixture weights. Together they form
//! the posterior of the clean coefficient, which yields the enhanced
//! estimate (posterior mean) and its aleatoric and epistemic uncertainty.
//!
//! Modules, bottom-up:
//!
//! - [`dsp`]: STFT/iSTFT, WAV and spectrogram files.
//! - [`posterior`]: closed-form mixture posterior and variance decomposition.
//! - [`losses`]: MSE, complex Gaussian and mixture NLLs, the stop-gradient
//!   variance weighting and winner-takes-all, all with analytic gradients.
//! - [`net`]: the mask network with hand-written backward pass.
//! - [`train`]: Adam, learning-rate plateau schedule, early stopping, WTA
//!   pre-training and mixture fine-tuning.
//! - [`data`]: synthetic speech/noise corpus.
//! - [`eval`]: SI-SDR and friends, sparsification curves and AUSE.
//! - [`config`] and [`cli`]: the `cgmmse` command line.

pub mod cli;
pub mod config;
pub mod data;
pub mod dsp;
pub mod eval;
pub mod error;
pub mod losses;
pub mod net;
pub mod posterior;
pub mod train;

pub use error::{Error, Result};

/// Floor applied to every variance that enters a denominator or logarithm.
pub const EPS_VAR: f64 = 1e-6;
