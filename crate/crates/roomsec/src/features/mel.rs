use std::sync::{Arc, OnceLock};

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::signal::{crop_pad, normalize_max, AudioClip};
use crate::util;

pub const N_MELS: usize = 64;
pub const N_FRAMES: usize = 100;

/// Log floor added before compression.
const LOG_FLOOR: f64 = 1e-10;

/// Frontend parameters. Defaults give the (64, 100) input: 32 ms Hann
/// window, 10 ms hop, 125-7500 Hz mel range at 16 kHz.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MelParams {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_fft: 512,
            hop: 160,
            n_mels: N_MELS,
            f_min: 125.0,
            f_max: 7_500.0,
        }
    }
}

impl MelParams {
    /// Stable fingerprint for cache sidecars.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("params serialize");
        util::fingerprint(json.as_bytes())
    }

    pub fn expected_len(&self) -> usize {
        self.sample_rate as usize // one second
    }

    pub fn n_frames(&self) -> usize {
        self.expected_len().div_ceil(self.hop)
    }
}

/// What a spectrogram was computed from; the conditioned model takes one
/// of each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Audio,
    Rir,
}

/// A (bands x frames) log-mel energy matrix, stored row-major by band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpec {
    values: Vec<f64>,
    n_mels: usize,
    n_frames: usize,
    pub source_kind: SourceKind,
}

impl MelSpec {
    pub fn shape(&self) -> (usize, usize) {
        (self.n_mels, self.n_frames)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values[band * self.n_frames + frame]
    }

    pub(crate) fn from_parts(
        values: Vec<f64>,
        n_mels: usize,
        n_frames: usize,
        source_kind: SourceKind,
    ) -> Self {
        debug_assert_eq!(values.len(), n_mels * n_frames);
        Self {
            values,
            n_mels,
            n_frames,
            source_kind,
        }
    }
}

/// HTK mel scale.
fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank with unit-peak filters on the HTK scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// n_mels rows of n_fft/2 + 1 weights.
    weights: Vec<f64>,
    n_bins: usize,
    pub n_mels: usize,
    /// Filter center frequencies in Hz.
    pub centers_hz: Vec<f64>,
    /// Left edge of the first filter and right edge of the last, Hz.
    pub edges_hz: (f64, f64),
}

impl MelFilterbank {
    pub fn row(&self, mel: usize) -> &[f64] {
        &self.weights[mel * self.n_bins..(mel + 1) * self.n_bins]
    }
}

/// Build the filterbank for `params`. Every filter peaks at 1; bins outside
/// a filter's triangle get exactly zero.
pub fn mel_filterbank(params: &MelParams) -> Result<MelFilterbank, FeatureError> {
    let nyquist = params.sample_rate as f64 / 2.0;
    if !(params.f_min > 0.0) || params.f_min >= params.f_max || params.f_max > nyquist {
        return Err(FeatureError::InvalidBounds {
            f_min: params.f_min,
            f_max: params.f_max,
            nyquist,
        });
    }
    let n_bins = params.n_fft / 2 + 1;
    let m_lo = hz_to_mel(params.f_min);
    let m_hi = hz_to_mel(params.f_max);
    let points_hz: Vec<f64> = (0..params.n_mels + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (params.n_mels + 1) as f64))
        .collect();

    let bin_hz = params.sample_rate as f64 / params.n_fft as f64;
    let mut weights = vec![0.0; params.n_mels * n_bins];
    for m in 0..params.n_mels {
        let (left, center, right) = (points_hz[m], points_hz[m + 1], points_hz[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > left && f < right {
                if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                }
            } else {
                0.0
            };
            weights[m * n_bins + k] = w;
        }
    }
    Ok(MelFilterbank {
        weights,
        n_bins,
        n_mels: params.n_mels,
        centers_hz: points_hz[1..=params.n_mels].to_vec(),
        edges_hz: (points_hz[0], points_hz[params.n_mels + 1]),
    })
}

fn fft_512() -> Arc<dyn Fft<f64>> {
    static FFT: OnceLock<Arc<dyn Fft<f64>>> = OnceLock::new();
    FFT.get_or_init(|| FftPlanner::new().plan_fft_forward(512))
        .clone()
}

/// Log-mel spectrogram of a one-second 16 kHz clip: centered STFT with
/// reflect padding (100 frames exactly), power spectrum, mel filterbank,
/// natural log with a 1e-10 floor.
pub fn mel_spectrogram(clip: &AudioClip) -> Result<MelSpec, FeatureError> {
    mel_spectrogram_of(clip, SourceKind::Audio, &MelParams::default())
}

pub fn mel_spectrogram_of(
    clip: &AudioClip,
    kind: SourceKind,
    params: &MelParams,
) -> Result<MelSpec, FeatureError> {
    let expected = params.expected_len();
    if clip.len() != expected || clip.sample_rate() != params.sample_rate {
        return Err(FeatureError::WrongShape {
            expected,
            rate: params.sample_rate,
            got: clip.len(),
            got_rate: clip.sample_rate(),
        });
    }
    let fb = mel_filterbank(params)?;
    let n_frames = params.n_frames();
    let n_fft = params.n_fft;
    let n_bins = n_fft / 2 + 1;
    let half = (n_fft / 2) as isize;
    let x = clip.samples();
    let n = x.len() as isize;

    // Periodic Hann window.
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos())
        .collect();
    let fft = if n_fft == 512 {
        fft_512()
    } else {
        FftPlanner::new().plan_fft_forward(n_fft)
    };

    // Reflect indexing without repeating the edge sample.
    let reflect = |i: isize| -> f64 {
        let mut i = i;
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        x[i as usize]
    };

    let mut values = vec![0.0; params.n_mels * n_frames];
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0; n_bins];
    for t in 0..n_frames {
        let center = (t * params.hop) as isize;
        for (i, w) in window.iter().enumerate() {
            buf[i] = Complex::new(reflect(center - half + i as isize) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for m in 0..params.n_mels {
            let row = fb.row(m);
            let mel: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            values[m * n_frames + t] = (mel + LOG_FLOOR).ln();
        }
    }
    Ok(MelSpec::from_parts(values, params.n_mels, n_frames, kind))
}

/// Frontend for conditioning inputs: crop/pad the RIR to one second,
/// max-normalize, then the identical mel transform.
pub fn rir_features(rir_clip: &AudioClip) -> Result<MelSpec, FeatureError> {
    let params = MelParams::default();
    let cropped = crop_pad(rir_clip, 1.0).expect("fixed positive duration");
    let normalized = normalize_max(&cropped).clip;
    mel_spectrogram_of(&normalized, SourceKind::Rir, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64) -> AudioClip {
        let w = 2.0 * std::f64::consts::PI * freq / 16_000.0;
        AudioClip::new(
            (0..16_000).map(|i| amp * (w * i as f64).sin()).collect(),
            16_000,
        )
        .unwrap()
    }

    #[test]
    fn shape_is_64_by_100() {
        let spec = mel_spectrogram(&tone(440.0, 0.5)).unwrap();
        assert_eq!(spec.shape(), (64, 100));
        assert_eq!(spec.values().len(), 6_400);
        assert!(spec.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_input_sits_on_the_log_floor() {
        let clip = AudioClip::new(vec![0.0; 16_000], 16_000).unwrap();
        let spec = mel_spectrogram(&clip).unwrap();
        let floor = (1e-10f64).ln();
        assert!(spec.values().iter().all(|&v| (v - floor).abs() < 1e-12));
    }

    #[test]
    fn wrong_length_or_rate_is_rejected() {
        let short = AudioClip::new(vec![0.1; 8_000], 16_000).unwrap();
        assert!(matches!(
            mel_spectrogram(&short),
            Err(FeatureError::WrongShape { .. })
        ));
        let wrong_rate = AudioClip::new(vec![0.1; 16_000], 8_000).unwrap();
        assert!(mel_spectrogram(&wrong_rate).is_err());
    }

    #[test]
    fn filterbank_centers_increase_and_edges_match_bounds() {
        let params = MelParams::default();
        let fb = mel_filterbank(&params).unwrap();
        for pair in fb.centers_hz.windows(2) {
            assert!(pair[1] > pair[0]);
        }
        let bin_hz = 16_000.0 / 512.0;
        assert!((fb.edges_hz.0 - 125.0).abs() <= bin_hz);
        assert!((fb.edges_hz.1 - 7_500.0).abs() <= bin_hz);
    }

    #[test]
    fn filterbank_rows_are_triangular_with_zero_off_band() {
        let params = MelParams::default();
        let fb = mel_filterbank(&params).unwrap();
        let bin_hz = 16_000.0 / 512.0;
        for m in 0..64 {
            let row = fb.row(m);
            assert!(row.iter().sum::<f64>() > 0.0, "filter {m} empty");
            // Off-band bins are exactly zero.
            for (k, &w) in row.iter().enumerate() {
                let f = k as f64 * bin_hz;
                if f < 125.0 - bin_hz || f > 7_500.0 + bin_hz {
                    assert_eq!(w, 0.0);
                }
            }
        }
        // Every bin strictly inside the band is covered by some filter.
        let n_bins = 257;
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            if f > 125.0 && f < 7_500.0 {
                let covered = (0..64).any(|m| fb.row(m)[k] > 0.0);
                assert!(covered, "bin {k} ({f} Hz) uncovered");
            }
        }
    }

    #[test]
    fn tone_maps_to_the_expected_mel_band() {
        let params = MelParams::default();
        let fb = mel_filterbank(&params).unwrap();
        // Oracle: band whose filter weight is highest at the 1 kHz bin.
        let bin = (1_000.0f64 / (16_000.0 / 512.0)).round() as usize;
        let oracle_band = (0..64)
            .max_by(|&a, &b| fb.row(a)[bin].total_cmp(&fb.row(b)[bin]))
            .unwrap();

        let spec = mel_spectrogram(&tone(1_000.0, 0.8)).unwrap();
        for frame in 0..100 {
            let best = (0..64)
                .max_by(|&a, &b| spec.get(a, frame).total_cmp(&spec.get(b, frame)))
                .unwrap();
            assert!(
                best.abs_diff(oracle_band) <= 1,
                "frame {frame}: band {best} vs oracle {oracle_band}"
            );
        }
    }

    #[test]
    fn click_shift_moves_frame_peak() {
        let mut a = vec![0.0; 16_000];
        a[2_000] = 1.0;
        let mut b = vec![0.0; 16_000];
        b[2_000 + 1_600] = 1.0; // +100 ms
        let frame_energy = |clip: &AudioClip| -> usize {
            let spec = mel_spectrogram(clip).unwrap();
            (0..100)
                .max_by(|&s, &t| {
                    let es: f64 = (0..64).map(|m| spec.get(m, s)).sum();
                    let et: f64 = (0..64).map(|m| spec.get(m, t)).sum();
                    es.total_cmp(&et)
                })
                .unwrap()
        };
        let pa = frame_energy(&AudioClip::new(a, 16_000).unwrap());
        let pb = frame_energy(&AudioClip::new(b, 16_000).unwrap());
        let delta = pb as isize - pa as isize;
        assert!((delta - 10).abs() <= 2, "peak moved {delta} frames");
    }

    #[test]
    fn amplitude_scaling_shifts_log_values_uniformly() {
        let a = mel_spectrogram(&tone(800.0, 0.1)).unwrap();
        let b = mel_spectrogram(&tone(800.0, 0.4)).unwrap();
        let expected = 2.0 * (4.0f64).ln();
        // Check on bands with real energy (well above the floor).
        let floor = (1e-10f64).ln();
        let mut checked = 0;
        for (x, y) in a.values().iter().zip(b.values()) {
            if *x > floor + 20.0 {
                assert!((y - x - expected).abs() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 100, "only {checked} bins above floor");
    }

    #[test]
    fn deterministic_on_identical_input() {
        let clip = tone(523.25, 0.7);
        let a = mel_spectrogram(&clip).unwrap();
        let b = mel_spectrogram(&clip).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn rir_frontend_crops_and_normalizes() {
        let long = AudioClip::new(
            (0..24_000).map(|i| if i == 10 { 0.5 } else { 0.0 }).collect(),
            16_000,
        )
        .unwrap();
        let spec = rir_features(&long).unwrap();
        assert_eq!(spec.shape(), (64, 100));
        assert_eq!(spec.source_kind, SourceKind::Rir);
    }
}
