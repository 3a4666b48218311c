//! Time-domain signal primitives.
//!
//! Everything here is a pure function over immutable [`AudioClip`] values;
//! internal computation is `f64` throughout so the oracle suites can use
//! tight tolerances.

mod clip;
mod convolve;
mod resample;
pub mod wav;

pub use clip::{crop_pad, normalize_max, AudioClip, NormalizeOutcome};
pub use convolve::fft_convolve;
pub use resample::resample;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("empty input signal")]
    EmptyInput,
    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },
    #[error("invalid sample rate: {0}")]
    InvalidSampleRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("invalid duration: {0} s")]
    InvalidDuration(f64),
    #[error("wav: {0}")]
    Wav(#[from] wav::WavError),
}
