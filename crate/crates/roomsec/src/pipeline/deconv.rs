//! Tikhonov-regularized spectral deconvolution: the preprocessing front of
//! the Deconv strategy.

use rustfft::{num_complex::Complex, FftPlanner};

use super::PipelineError;
use crate::signal::{normalize_max, AudioClip};

/// Deconvolve `clip` by `rir` in the frequency domain:
/// `X conj(R) / (|R|^2 + lambda)`, with `lambda = lambda_reg * mean|R|^2`.
/// The result is trimmed to the clip length and max-normalized.
pub fn deconv_preprocess(
    clip: &AudioClip,
    rir: &AudioClip,
    lambda_reg: f64,
) -> Result<AudioClip, PipelineError> {
    assert!(lambda_reg > 0.0, "lambda_reg must be positive");
    if rir.is_empty() || clip.is_empty() {
        return Err(PipelineError::Signal(
            crate::signal::SignalError::EmptyInput,
        ));
    }
    let n = (clip.len() + rir.len() - 1).next_power_of_two();
    let mut x: Vec<Complex<f64>> = clip
        .samples()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut r: Vec<Complex<f64>> = rir
        .samples()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut x);
    planner.plan_fft_forward(n).process(&mut r);

    let mean_power: f64 = r.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    let lambda = lambda_reg * mean_power;
    for (xv, rv) in x.iter_mut().zip(&r) {
        *xv = *xv * rv.conj() / (rv.norm_sqr() + lambda);
    }
    planner.plan_fft_inverse(n).process(&mut x);

    let scale = 1.0 / n as f64;
    let samples: Vec<f64> = x[..clip.len()].iter().map(|c| c.re * scale).collect();
    Ok(normalize_max(&AudioClip::new(samples, clip.sample_rate()).map_err(PipelineError::Signal)?).clip)
}

/// Reconstruction SNR in dB between a reference and an estimate of it.
pub fn snr_db(reference: &AudioClip, estimate: &AudioClip) -> f64 {
    let n = reference.len().min(estimate.len());
    let sig: f64 = reference.samples()[..n].iter().map(|v| v * v).sum();
    let noise: f64 = reference.samples()[..n]
        .iter()
        .zip(&estimate.samples()[..n])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if noise <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (sig / noise).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rir::{generate_rir_bank, unit_impulse, BankConfig, RoomSpec};
    use crate::signal::fft_convolve;
    use crate::util::derived_rng;
    use rand::Rng;

    fn test_signal(seed: u64) -> AudioClip {
        let mut rng = derived_rng(seed, &[]);
        let raw = AudioClip::new(
            (0..16_000)
                .map(|t| {
                    let t = t as f64 / 16_000.0;
                    (2.0 * std::f64::consts::PI * 700.0 * t).sin()
                        + 0.3 * rng.random_range(-1.0..1.0)
                })
                .collect(),
            16_000,
        )
        .unwrap();
        normalize_max(&raw).clip
    }

    #[test]
    fn exact_rir_reconstruction_snr_is_high() {
        let rooms = vec![RoomSpec::from_t60("dc", [6.0, 5.0, 3.0], 0.4).unwrap()];
        let bank = generate_rir_bank(&rooms, 2, 8, &BankConfig::default()).unwrap();
        let rir = bank.flat(0);
        let x = test_signal(1);
        let y = fft_convolve(&x, rir.clip()).unwrap();
        let recovered = deconv_preprocess(&y, rir.clip(), 1e-6).unwrap();
        let snr = snr_db(&x, &recovered);
        assert!(snr >= 20.0, "snr {snr} dB");
    }

    #[test]
    fn identity_rir_is_near_lossless() {
        let delta = unit_impulse(16_000, 512);
        let x = test_signal(2);
        let y = fft_convolve(&x, delta.clip()).unwrap();
        let recovered = deconv_preprocess(&y, delta.clip(), 1e-12).unwrap();
        let snr = snr_db(&x, &recovered);
        assert!(snr >= 60.0, "snr {snr} dB");
    }

    #[test]
    fn mismatched_rir_reconstructs_worse_than_exact() {
        let rooms = vec![RoomSpec::from_t60("dc2", [6.5, 5.2, 3.1], 0.5).unwrap()];
        let bank = generate_rir_bank(&rooms, 2, 9, &BankConfig::default()).unwrap();
        let exact = bank.flat(0);
        let other = bank.flat(1);
        let x = test_signal(3);
        let y = fft_convolve(&x, exact.clip()).unwrap();
        let with_exact = snr_db(&x, &deconv_preprocess(&y, exact.clip(), 1e-6).unwrap());
        let with_other = snr_db(&x, &deconv_preprocess(&y, other.clip(), 1e-6).unwrap());
        assert!(
            with_exact > with_other,
            "exact {with_exact} dB <= other {with_other} dB"
        );
    }
}
