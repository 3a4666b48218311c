use super::{AudioClip, SignalError};

/// Taps per polyphase branch. 64 taps with a Kaiser beta of 8.6 gives a
/// stopband comfortably past 80 dB for the rates used here.
const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.6;

/// Band-limited resampling via a polyphase windowed-sinc (Kaiser) filter.
/// Output length is `round(len * target / source)`. Resampling to the
/// input rate returns the input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, SignalError> {
    if target_rate == 0 {
        return Err(SignalError::InvalidSampleRate(target_rate));
    }
    let source_rate = clip.sample_rate();
    if target_rate == source_rate {
        return Ok(clip.clone());
    }
    if clip.is_empty() {
        return Ok(AudioClip::from_parts(Vec::new(), target_rate));
    }

    let g = gcd(source_rate as u64, target_rate as u64);
    let up = (target_rate as u64 / g) as usize; // L
    let down = (source_rate as u64 / g) as usize; // M

    let n_taps = TAPS_PER_PHASE * up;
    let center = (n_taps - 1) as f64 / 2.0;
    // Cutoff relative to the upsampled (intermediate) rate: the narrower of
    // the anti-imaging and anti-aliasing constraints.
    let fc = 0.5 / up.max(down) as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let taps: Vec<f64> = (0..n_taps)
        .map(|k| {
            let t = k as f64 - center;
            let x = 2.0 * fc * t;
            let sinc = if x == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            let u = t / center;
            let window = bessel_i0(KAISER_BETA * (1.0 - u * u).max(0.0).sqrt()) / i0_beta;
            2.0 * fc * sinc * window
        })
        .collect();

    let x = clip.samples();
    let n_in = x.len();
    let n_out = ((n_in as u64 * target_rate as u64) as f64 / source_rate as f64).round() as usize;
    let gain = up as f64;
    let ic = center.round() as usize; // taps length is even, center falls mid-pair; rounding keeps delay within half an intermediate sample

    let mut out = Vec::with_capacity(n_out);
    for k in 0..n_out {
        // Intermediate-rate index of this output instant, shifted to the
        // filter center.
        let q = k * down + ic;
        let mut m = q % up;
        let mut acc = 0.0;
        // Taps with m > q would index before the signal start (zero pad).
        while m < n_taps && m <= q {
            let j = (q - m) / up;
            if j < n_in {
                acc += taps[m] * x[j];
            }
            m += up;
        }
        out.push(gain * acc);
    }
    Ok(AudioClip::from_parts(out, target_rate))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-14 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn sine(freq: f64, rate: u32, n: usize) -> AudioClip {
        let w = 2.0 * std::f64::consts::PI * freq / rate as f64;
        AudioClip::new((0..n).map(|i| (w * i as f64).sin()).collect(), rate).unwrap()
    }

    /// FFT-peak oracle: frequency of the strongest bin.
    fn dominant_freq(clip: &AudioClip) -> f64 {
        let n = clip.len();
        let mut buf: Vec<Complex<f64>> = clip
            .samples()
            .iter()
            .map(|&s| Complex::new(s, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (best, _) = buf[..n / 2]
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .unwrap();
        best as f64 * clip.sample_rate() as f64 / n as f64
    }

    #[test]
    fn same_rate_is_identity() {
        let c = sine(440.0, 16_000, 16_000);
        let out = resample(&c, 16_000).unwrap();
        assert_eq!(out.samples(), c.samples());
    }

    #[test]
    fn downsample_preserves_tone_frequency() {
        let c = sine(1_000.0, 48_000, 48_000);
        let out = resample(&c, 16_000).unwrap();
        assert_eq!(out.sample_rate(), 16_000);
        let bin_width = 16_000.0 / out.len() as f64;
        let peak = dominant_freq(&out);
        assert!(
            (peak - 1_000.0).abs() <= bin_width + 1e-9,
            "peak at {peak} Hz"
        );
    }

    #[test]
    fn upsample_length_follows_ratio() {
        let c = sine(500.0, 8_000, 8_000);
        let out = resample(&c, 16_000).unwrap();
        assert_eq!(out.len(), 16_000);
        let bin_width = 16_000.0 / out.len() as f64;
        assert!((dominant_freq(&out) - 500.0).abs() <= bin_width + 1e-9);
    }

    #[test]
    fn non_integer_ratio_length() {
        let c = sine(1_000.0, 44_100, 44_100);
        let out = resample(&c, 16_000).unwrap();
        assert_eq!(out.len(), 16_000);
        let bin_width = 16_000.0 / out.len() as f64;
        assert!((dominant_freq(&out) - 1_000.0).abs() <= bin_width + 1e-9);
    }

    #[test]
    fn amplitude_roughly_preserved() {
        let c = sine(1_000.0, 48_000, 48_000);
        let out = resample(&c, 16_000).unwrap();
        // Interior RMS; edges see filter ramp-in.
        let mid = &out.samples()[1_000..out.len() - 1_000];
        let rms = (mid.iter().map(|s| s * s).sum::<f64>() / mid.len() as f64).sqrt();
        assert!((rms - 1.0 / 2f64.sqrt()).abs() < 0.02, "rms {rms}");
    }
}
