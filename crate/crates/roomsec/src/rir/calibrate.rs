//! Numeric absorption calibration.
//!
//! The specular image-source model decays measurably slower than the
//! diffuse-field (Sabine/Eyring) formulas predict, by 50-90% for the room
//! shapes used here. Rooms that must *measure* at their target T60 get a
//! uniform beta solved against the Schroeder estimator itself: a
//! fixed-point iteration on the statistical model T60 ~ K / (-ln beta^2),
//! starting from the Eyring value.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{simulate_rir, RirError, RoomSpec, SimConfig};
use crate::acoustics::estimate_t60;
use crate::util;

/// Draw a (source, mic) placement with wall clearance and distance bounds.
/// Shared by bank generation and calibration.
pub(crate) fn sample_placement(
    room: &RoomSpec,
    clearance: f64,
    min_distance: f64,
    rng: &mut ChaCha8Rng,
) -> Option<([f64; 3], [f64; 3])> {
    let max_d = room.diagonal() / 2.0;
    for _ in 0..10_000 {
        let draw = |rng: &mut ChaCha8Rng| {
            [
                rng.random_range(clearance..room.dims[0] - clearance),
                rng.random_range(clearance..room.dims[1] - clearance),
                rng.random_range(clearance..room.dims[2] - clearance),
            ]
        };
        let src = draw(rng);
        let mic = draw(rng);
        let d: f64 = src
            .iter()
            .zip(&mic)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d >= min_distance && d <= max_d {
            return Some((src, mic));
        }
    }
    None
}

fn measured_t60(
    room: &RoomSpec,
    beta: f64,
    probes: usize,
    seed: u64,
) -> Result<f64, RirError> {
    let probe_room =
        RoomSpec::with_uniform_beta(room.id.clone(), room.dims, room.target_t60, beta)?;
    let cfg = SimConfig {
        sample_rate: 16_000,
        duration_s: Some(2.0 * room.target_t60),
        max_order: None,
    };
    let mut acc = 0.0;
    for i in 0..probes {
        let mut rng = util::derived_rng(seed, &[util::tag(&room.id), i as u64]);
        let (src, mic) = sample_placement(&probe_room, 0.5, 0.5, &mut rng)
            .ok_or_else(|| RirError::PlacementFailed {
                room_id: room.id.clone(),
            })?;
        let rir = simulate_rir(&probe_room, src, mic, &cfg)?;
        acc += estimate_t60(rir.clip())
            .map_err(|_| RirError::PlacementFailed {
                room_id: room.id.clone(),
            })?
            .t60_s;
    }
    Ok(acc / probes as f64)
}

/// Solve for the uniform wall reflection coefficient at which the
/// simulated room's Schroeder T60 matches `room.target_t60`, averaged over
/// `probes` deterministic placements.
pub fn calibrate_uniform_beta(room: &RoomSpec, probes: usize, seed: u64) -> Result<f64, RirError> {
    let mut beta = room.beta[0].clamp(0.02, 0.999);
    for _ in 0..3 {
        let measured = measured_t60(room, beta, probes, seed)?;
        let g = -2.0 * beta.ln();
        let g_star = g * measured / room.target_t60;
        beta = (-g_star / 2.0).exp().clamp(0.02, 0.999);
    }
    Ok(beta)
}
