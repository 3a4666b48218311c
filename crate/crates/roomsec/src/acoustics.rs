//! Acoustic metrics of an impulse response: Schroeder decay curve,
//! reverberation time, direct-to-reverberant ratio, and the DRR tercile
//! grouping used by the per-group evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::AudioClip;

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("impulse response has no energy")]
    ZeroEnergy,
    #[error("insufficient decay range: curve never reaches {0} dB")]
    InsufficientDecay(f64),
    #[error("tercile split needs at least 3 items, got {0}")]
    TooFewItems(usize),
}

/// Cached metrics of an RIR. `drr_db` is `+inf` when all energy sits in
/// the direct window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AcousticMetrics {
    pub t60_s: f64,
    /// Stored as `None` in serialized form when infinite.
    pub drr_db: f64,
    pub decay_fit_r2: f64,
}

/// Reverberation-time estimate with its fit quality.
#[derive(Debug, Clone, Copy)]
pub struct T60Estimate {
    pub t60_s: f64,
    pub fit_r2: f64,
}

/// Schroeder backward-integration decay curve in dB.
///
/// `curve[t] = 10 log10( sum_{tau>=t} h^2 / total )`, so `curve[0] = 0` and
/// the curve is monotone non-increasing; entries become `-inf` once the
/// remaining tail has zero energy.
pub fn schroeder_decay(rir: &AudioClip) -> Result<Vec<f64>, AcousticsError> {
    let h = rir.samples();
    if h.is_empty() {
        return Err(AcousticsError::ZeroEnergy);
    }
    let mut tail = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (i, &s) in h.iter().enumerate().rev() {
        acc += s * s;
        tail[i] = acc;
    }
    let total = tail[0];
    if total <= 0.0 {
        return Err(AcousticsError::ZeroEnergy);
    }
    Ok(tail
        .into_iter()
        .map(|e| {
            if e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect())
}

const FIT_TOP_DB: f64 = -5.0;
const FIT_BOTTOM_DB: f64 = -25.0;

/// T60 via a least-squares line fit to the Schroeder curve over the
/// [-5, -25] dB band, extrapolated to 60 dB (a T20 fit times 3).
///
/// Errors with [`AcousticsError::InsufficientDecay`] when the finite part of
/// the curve never falls to -25 dB within the RIR length.
pub fn estimate_t60(rir: &AudioClip) -> Result<T60Estimate, AcousticsError> {
    let curve = schroeder_decay(rir)?;
    let dt = 1.0 / rir.sample_rate() as f64;

    // Backward integration of any finite signal plunges near its end, so
    // the trailing 5% is excluded as truncation artifact; the decay must
    // genuinely reach -25 dB before that.
    let cutoff = curve.len() - curve.len() / 20;
    let reaches_bottom = curve[..cutoff]
        .iter()
        .any(|&c| c.is_finite() && c <= FIT_BOTTOM_DB);
    if !reaches_bottom {
        return Err(AcousticsError::InsufficientDecay(FIT_BOTTOM_DB));
    }

    let band: Vec<(f64, f64)> = curve[..cutoff]
        .iter()
        .enumerate()
        .filter(|(_, &c)| c.is_finite() && c <= FIT_TOP_DB && c >= FIT_BOTTOM_DB)
        .map(|(i, &c)| (i as f64 * dt, c))
        .collect();

    if band.len() >= 2 {
        let n = band.len() as f64;
        let sx: f64 = band.iter().map(|(t, _)| t).sum();
        let sy: f64 = band.iter().map(|(_, c)| c).sum();
        let sxx: f64 = band.iter().map(|(t, _)| t * t).sum();
        let sxy: f64 = band.iter().map(|(t, c)| t * c).sum();
        let denom = n * sxx - sx * sx;
        if denom > 0.0 {
            let slope = (n * sxy - sx * sy) / denom; // dB per second
            if slope < 0.0 {
                let intercept = (sy - slope * sx) / n;
                let mean_y = sy / n;
                let ss_tot: f64 = band.iter().map(|(_, c)| (c - mean_y) * (c - mean_y)).sum();
                let ss_res: f64 = band
                    .iter()
                    .map(|(t, c)| {
                        let p = slope * t + intercept;
                        (c - p) * (c - p)
                    })
                    .sum();
                let r2 = if ss_tot > 0.0 {
                    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                return Ok(T60Estimate {
                    t60_s: -60.0 / slope,
                    fit_r2: r2,
                });
            }
        }
    }

    // Near-instant decay: fewer than two curve samples inside the band.
    // Fall back to the crossing times themselves.
    let t_top = crossing_time(&curve, FIT_TOP_DB, dt);
    let t_bottom = crossing_time(&curve, FIT_BOTTOM_DB, dt);
    Ok(T60Estimate {
        t60_s: (t_bottom - t_top).max(0.0) * 3.0,
        fit_r2: 1.0,
    })
}

/// First time the (monotone) curve falls to `level`, linearly interpolated
/// between samples. Falls back to the last finite sample time.
fn crossing_time(curve: &[f64], level: f64, dt: f64) -> f64 {
    let mut prev = curve[0];
    for (i, &c) in curve.iter().enumerate() {
        if c <= level {
            if !c.is_finite() {
                return i as f64 * dt;
            }
            if i == 0 || prev == c {
                return i as f64 * dt;
            }
            let frac = (prev - level) / (prev - c);
            return (i as f64 - 1.0 + frac) * dt;
        }
        prev = c;
    }
    (curve.len() - 1) as f64 * dt
}

/// Half-width of the direct-path window around the RIR peak.
pub const DRR_DIRECT_WINDOW_S: f64 = 0.0025;

/// Direct-to-reverberant ratio in dB. The direct window spans ±2.5 ms
/// around the absolute-peak sample; returns `+inf` when everything outside
/// that window is zero.
pub fn compute_drr(rir: &AudioClip) -> Result<f64, AcousticsError> {
    let h = rir.samples();
    let total: f64 = h.iter().map(|s| s * s).sum();
    if h.is_empty() || total <= 0.0 {
        return Err(AcousticsError::ZeroEnergy);
    }
    let peak = h
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.abs().total_cmp(&b.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let w = (DRR_DIRECT_WINDOW_S * rir.sample_rate() as f64).round() as usize;
    let lo = peak.saturating_sub(w);
    let hi = (peak + w + 1).min(h.len());
    let direct: f64 = h[lo..hi].iter().map(|s| s * s).sum();
    let rest = total - direct;
    if rest <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (direct / rest).log10())
}

/// Indexes of a DRR tercile split, ordered Low, Medium, High; plus the two
/// boundary values in dB (max DRR of Low, max DRR of Medium).
#[derive(Debug, Clone)]
pub struct DrrTerciles {
    pub low: Vec<usize>,
    pub medium: Vec<usize>,
    pub high: Vec<usize>,
    pub boundaries_db: (f64, f64),
}

/// Split items by DRR at the 1/3 and 2/3 quantiles. Group sizes differ by
/// at most one, remainders go to the lower groups, ties keep input order.
pub fn drr_tercile_split(drrs_db: &[f64]) -> Result<DrrTerciles, AcousticsError> {
    let n = drrs_db.len();
    if n < 3 {
        return Err(AcousticsError::TooFewItems(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps tied DRRs in input order.
    order.sort_by(|&a, &b| drrs_db[a].total_cmp(&drrs_db[b]));

    let base = n / 3;
    let rem = n % 3;
    let n_low = base + usize::from(rem >= 1);
    let n_med = base + usize::from(rem >= 2);

    let low: Vec<usize> = order[..n_low].to_vec();
    let medium: Vec<usize> = order[n_low..n_low + n_med].to_vec();
    let high: Vec<usize> = order[n_low + n_med..].to_vec();
    let boundaries_db = (
        drrs_db[*low.last().unwrap()],
        drrs_db[*medium.last().unwrap()],
    );
    Ok(DrrTerciles {
        low,
        medium,
        high,
        boundaries_db,
    })
}
