use super::SignalError;

/// Mono sample buffer with a sample rate. The carrier of every time-domain
/// signal in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Build a clip, validating the type invariants: positive rate,
    /// finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::InvalidSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Unchecked constructor for internal call sites that guarantee
    /// finiteness by construction.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate > 0);
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Peak absolute amplitude.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Total energy, sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// Result of [`normalize_max`]; `was_silent` flags the all-zero degenerate
/// case, which is passed through unchanged rather than treated as an error.
#[derive(Debug, Clone)]
pub struct NormalizeOutcome {
    pub clip: AudioClip,
    pub was_silent: bool,
}

/// Scale so the peak absolute sample is 1. All-zero input is returned
/// unchanged with the warning flag set.
pub fn normalize_max(clip: &AudioClip) -> NormalizeOutcome {
    let peak = clip.peak();
    if peak == 0.0 {
        return NormalizeOutcome {
            clip: clip.clone(),
            was_silent: true,
        };
    }
    // Divide (not multiply by a reciprocal): the peak sample becomes
    // exactly +-1, which makes a second application a bit-exact identity.
    let samples = clip.samples.iter().map(|s| s / peak).collect();
    NormalizeOutcome {
        clip: AudioClip::from_parts(samples, clip.sample_rate),
        was_silent: false,
    }
}

/// Truncate or zero-pad to exactly `round(duration_s * sample_rate)`
/// samples. Longer inputs keep their front-aligned start; shorter inputs
/// are padded with trailing zeros.
pub fn crop_pad(clip: &AudioClip, duration_s: f64) -> Result<AudioClip, SignalError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(SignalError::InvalidDuration(duration_s));
    }
    let target = (duration_s * clip.sample_rate as f64).round() as usize;
    let mut samples = Vec::with_capacity(target);
    let take = clip.samples.len().min(target);
    samples.extend_from_slice(&clip.samples[..take]);
    samples.resize(target, 0.0);
    Ok(AudioClip::from_parts(samples, clip.sample_rate))
}
