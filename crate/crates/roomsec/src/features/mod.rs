//! Log-mel spectrogram frontend: the (64 bands, 100 frames) network input.

pub mod cache;
mod mel;

pub use mel::{
    mel_filterbank, mel_spectrogram, mel_spectrogram_of, rir_features, MelFilterbank, MelParams,
    MelSpec, SourceKind, N_FRAMES, N_MELS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid frequency bounds: f_min {f_min} Hz, f_max {f_max} Hz, nyquist {nyquist} Hz")]
    InvalidBounds {
        f_min: f64,
        f_max: f64,
        nyquist: f64,
    },
    #[error("expected a {expected}-sample clip at {rate} Hz, got {got} samples at {got_rate} Hz")]
    WrongShape {
        expected: usize,
        rate: u32,
        got: usize,
        got_rate: u32,
    },
    #[error("feature cache: {0}")]
    Cache(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
