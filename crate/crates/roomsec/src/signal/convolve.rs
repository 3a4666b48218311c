use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioClip, SignalError};

/// Kernels at or below this length are convolved directly in the time
/// domain: it is faster there and exact (the delta-identity case in
/// particular returns bit-equal samples).
const DIRECT_KERNEL_MAX: usize = 32;

/// Full linear convolution of a clip with a kernel at the same rate;
/// output length is `len(a) + len(b) - 1`.
pub fn fft_convolve(a: &AudioClip, b: &AudioClip) -> Result<AudioClip, SignalError> {
    if a.is_empty() || b.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(SignalError::SampleRateMismatch {
            a: a.sample_rate(),
            b: b.sample_rate(),
        });
    }
    let out = convolve_buffers(a.samples(), b.samples());
    Ok(AudioClip::from_parts(out, a.sample_rate()))
}

/// Convolution on raw buffers; shared by the RIR and deconvolution paths.
pub(crate) fn convolve_buffers(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.len() <= DIRECT_KERNEL_MAX {
        return convolve_direct(long, short);
    }

    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut fa: Vec<Complex<f64>> = a
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut fb: Vec<Complex<f64>> = b
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y;
    }
    inv.process(&mut fa);

    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (j, &bj) in b.iter().enumerate() {
        if bj == 0.0 {
            continue;
        }
        for (i, &ai) in a.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}
