//! Multi-channel phonocardiogram screening for coronary artery disease.
//!
//! The crate covers the whole chain: reading multitrack recordings and their
//! epoch annotations, low-pass filtering and resampling to 2 kHz, Welch
//! sub-band and cepstral (LFCC/MFCC/GFCC) features, MRMR and ReliefF ranking,
//! SMO-trained SVM and k-NN classifiers, and subject-grouped repeated
//! cross-validation with majority voting and channel fusion. A synthetic
//! generator produces labelled datasets for end-to-end runs.

pub mod cepstral;
pub mod dataio;
pub mod error;
pub mod evaluate;
pub mod learn;
pub mod pipeline;
pub mod preprocess;
pub mod selection;
pub mod spectral;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
