//! Low-complexity acoustic scene classification: spectrogram front-ends,
//! network specifications with compression rewrites, a reference CPU
//! trainer, late fusion, sound-event embeddings and scene reporting.

pub mod audio;
pub mod augment;
pub mod cli;
pub(crate) mod codec;
pub mod compress;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod fusion;
pub mod netspec;
pub mod report;
pub mod sed;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
