use serde::{Deserialize, Serialize};

use super::{RirError, RoomSpec};
use crate::acoustics::{self, AcousticMetrics};
use crate::signal::AudioClip;

/// Speed of sound used throughout, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Fractional-delay window half-support in seconds (Hann-windowed sinc).
const SINC_HALF_SUPPORT_S: f64 = 0.004;

/// RIR length as a multiple of the room's target T60.
const LENGTH_T60_FACTOR: f64 = 1.25;

/// Image-source simulation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub sample_rate: u32,
    /// RIR length override; defaults to 1.25 x target T60.
    pub duration_s: Option<f64>,
    /// Max reflection order; `None` keeps every image whose delay fits.
    pub max_order: Option<i64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            duration_s: None,
            max_order: None,
        }
    }
}

/// An impulse response with its provenance and (optionally) cached
/// acoustic metrics.
#[derive(Debug, Clone)]
pub struct Rir {
    clip: AudioClip,
    room_id: String,
    source_pos: [f64; 3],
    mic_pos: [f64; 3],
    metrics: Option<AcousticMetrics>,
}

impl Rir {
    pub fn new(
        clip: AudioClip,
        room_id: impl Into<String>,
        source_pos: [f64; 3],
        mic_pos: [f64; 3],
    ) -> Self {
        Self {
            clip,
            room_id: room_id.into(),
            source_pos,
            mic_pos,
            metrics: None,
        }
    }

    pub fn clip(&self) -> &AudioClip {
        &self.clip
    }

    pub fn room_id(&self) -> &str {
        &self.room_id
    }

    pub fn source_pos(&self) -> [f64; 3] {
        self.source_pos
    }

    pub fn mic_pos(&self) -> [f64; 3] {
        self.mic_pos
    }

    pub fn metrics(&self) -> Option<&AcousticMetrics> {
        self.metrics.as_ref()
    }

    pub fn set_metrics(&mut self, metrics: AcousticMetrics) {
        self.metrics = Some(metrics);
    }

    /// Source-to-mic distance in meters.
    pub fn distance(&self) -> f64 {
        self.source_pos
            .iter()
            .zip(&self.mic_pos)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Compute T60/DRR/fit metrics from the samples. Degenerate responses
    /// with no usable decay range report a zero T60 with zero fit quality.
    pub fn compute_metrics(&self) -> AcousticMetrics {
        let drr_db = acoustics::compute_drr(&self.clip).unwrap_or(f64::INFINITY);
        match acoustics::estimate_t60(&self.clip) {
            Ok(est) => AcousticMetrics {
                t60_s: est.t60_s,
                drr_db,
                decay_fit_r2: est.fit_r2,
            },
            Err(_) => AcousticMetrics {
                t60_s: 0.0,
                drr_db,
                decay_fit_r2: 0.0,
            },
        }
    }

    /// Recompute and cache metrics.
    pub fn ensure_metrics(&mut self) -> &AcousticMetrics {
        if self.metrics.is_none() {
            self.metrics = Some(self.compute_metrics());
        }
        self.metrics.as_ref().unwrap()
    }
}

/// The discrete delta function as an RIR: `[1, 0, 0, ...]`. Convolution
/// with it is the identity; it stands in for "no room" when pairing clean
/// training data with a conditioning input.
pub fn unit_impulse(sample_rate: u32, length: usize) -> Rir {
    assert!(length >= 1, "unit impulse needs at least one sample");
    let mut samples = vec![0.0; length];
    samples[0] = 1.0;
    let mut rir = Rir::new(
        AudioClip::from_parts(samples, sample_rate),
        "delta",
        [0.0; 3],
        [0.0; 3],
    );
    rir.metrics = Some(AcousticMetrics {
        t60_s: 0.0,
        drr_db: f64::INFINITY,
        decay_fit_r2: 1.0,
    });
    rir
}

/// Allen-Berkley image-source RIR for a shoebox room: each image source
/// contributes a 1/(4 pi d) attenuated, reflection-weighted impulse at
/// delay d/c, placed with a Hann-windowed sinc (±4 ms support).
pub fn simulate_rir(
    room: &RoomSpec,
    source: [f64; 3],
    mic: [f64; 3],
    cfg: &SimConfig,
) -> Result<Rir, RirError> {
    if cfg.sample_rate < 8_000 {
        return Err(RirError::SampleRateTooLow(cfg.sample_rate));
    }
    for pos in [source, mic] {
        if !room.contains(pos, 0.0) {
            return Err(RirError::PositionOutsideRoom {
                pos,
                dims: room.dims,
                clearance: 0.0,
            });
        }
    }
    let fs = cfg.sample_rate as f64;
    let cts = SPEED_OF_SOUND / fs; // meters per sample
    let direct_m = source
        .iter()
        .zip(&mic)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if direct_m < 1e-9 {
        return Err(RirError::DegenerateGeometry);
    }

    let tw = 2 * (SINC_HALF_SUPPORT_S * fs).round() as usize;
    let duration = cfg
        .duration_s
        .unwrap_or(LENGTH_T60_FACTOR * room.target_t60);
    let n_samples = ((duration * fs).ceil() as usize)
        .max((direct_m / cts).ceil() as usize + tw + 1)
        .max(256);

    // Work in sample units.
    let src = [source[0] / cts, source[1] / cts, source[2] / cts];
    let rcv = [mic[0] / cts, mic[1] / cts, mic[2] / cts];
    let dims = [
        room.dims[0] / cts,
        room.dims[1] / cts,
        room.dims[2] / cts,
    ];
    let order_bound = |dim: f64| (n_samples as f64 / (2.0 * dim)).ceil() as i64;
    let n1 = order_bound(dims[0]);
    let n2 = order_bound(dims[1]);
    let n3 = order_bound(dims[2]);

    // Per-axis reflection powers: pow0[|m - q|] * pow1[|m|].
    let pow_table = |beta: f64, n: i64| -> Vec<f64> {
        (0..=(n.unsigned_abs() as usize + 1))
            .scan(1.0, |acc, _| {
                let v = *acc;
                *acc *= beta;
                Some(v)
            })
            .collect()
    };
    let px0 = pow_table(room.beta[0], n1);
    let px1 = pow_table(room.beta[1], n1);
    let py0 = pow_table(room.beta[2], n2);
    let py1 = pow_table(room.beta[3], n2);
    let pz0 = pow_table(room.beta[4], n3);
    let pz1 = pow_table(room.beta[5], n3);

    let mut h = vec![0.0f64; n_samples];
    let half = tw as isize / 2;
    let inv_tw = 1.0 / tw as f64;

    for mx in -n1..=n1 {
        let rm_x = 2.0 * mx as f64 * dims[0];
        for q in 0..=1i64 {
            let refl_x = px0[(mx - q).unsigned_abs() as usize] * px1[mx.unsigned_abs() as usize];
            let dx = (1 - 2 * q) as f64 * src[0] - rcv[0] + rm_x;
            let ord_x = (2 * mx - q).abs();
            for my in -n2..=n2 {
                let rm_y = 2.0 * my as f64 * dims[1];
                for j in 0..=1i64 {
                    let refl_xy =
                        refl_x * py0[(my - j).unsigned_abs() as usize] * py1[my.unsigned_abs() as usize];
                    let dy = (1 - 2 * j) as f64 * src[1] - rcv[1] + rm_y;
                    let ord_xy = ord_x + (2 * my - j).abs();
                    if let Some(max_order) = cfg.max_order {
                        if ord_xy > max_order {
                            continue;
                        }
                    }
                    for mz in -n3..=n3 {
                        let rm_z = 2.0 * mz as f64 * dims[2];
                        for k in 0..=1i64 {
                            if let Some(max_order) = cfg.max_order {
                                if ord_xy + (2 * mz - k).abs() > max_order {
                                    continue;
                                }
                            }
                            let refl = refl_xy
                                * pz0[(mz - k).unsigned_abs() as usize]
                                * pz1[mz.unsigned_abs() as usize];
                            let dz = (1 - 2 * k) as f64 * src[2] - rcv[2] + rm_z;
                            let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                            let fdist = dist.floor();
                            if fdist as usize >= n_samples {
                                continue;
                            }
                            let gain =
                                refl / (4.0 * std::f64::consts::PI * dist * cts);
                            let start = fdist as isize - half + 1;
                            let frac = dist - fdist;
                            for n in 0..tw {
                                let idx = start + n as isize;
                                if idx < 0 || idx >= n_samples as isize {
                                    continue;
                                }
                                let t = n as f64 - (half - 1) as f64 - frac;
                                let window =
                                    0.5 * (1.0 + (2.0 * std::f64::consts::PI * t * inv_tw).cos());
                                h[idx as usize] += gain * window * sinc(t);
                            }
                        }
                    }
                }
            }
        }
    }

    debug_assert!(h.iter().any(|&v| v != 0.0), "RIR came out all zero");
    Ok(Rir::new(
        AudioClip::from_parts(h, cfg.sample_rate),
        room.id.clone(),
        source,
        mic,
    ))
}

/// Normalized sinc: sin(pi t) / (pi t).
fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0
    } else {
        let x = std::f64::consts::PI * t;
        x.sin() / x
    }
}
