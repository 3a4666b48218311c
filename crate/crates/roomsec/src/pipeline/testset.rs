//! Reverberant test-set construction: each clean test clip is convolved
//! with one uniformly drawn RIR of a room, and the drawn RIR is recorded
//! per clip for the DRR-group analysis.

use super::PipelineError;
use crate::exec;
use crate::rir::Rir;
use crate::signal::{crop_pad, fft_convolve, normalize_max, AudioClip};
use crate::util;

use rand::Rng;

#[derive(Debug, Clone)]
pub struct ReverbClip {
    pub clip: AudioClip,
    pub label: usize,
    /// Index into the room's RIR list of the convolving RIR.
    pub rir_index: usize,
}

#[derive(Debug, Clone)]
pub struct ReverbTestSet {
    pub room_id: String,
    pub target_t60: f64,
    pub clips: Vec<ReverbClip>,
}

/// Convolve each test clip with a uniformly chosen room RIR, crop to one
/// second and max-normalize. Deterministic in (seed, room_id, clip index).
pub fn make_simulated_testset(
    test_clips: &[(usize, &AudioClip)],
    room_id: &str,
    target_t60: f64,
    room_rirs: &[Rir],
    seed: u64,
) -> Result<ReverbTestSet, PipelineError> {
    if room_rirs.is_empty() {
        return Err(PipelineError::EmptyRoom(room_id.to_string()));
    }
    let results: Vec<Result<ReverbClip, PipelineError>> =
        exec::par_map_indexed(test_clips, |i, &(label, clip)| {
            let mut rng = util::derived_rng(
                seed,
                &[util::tag("testset"), util::tag(room_id), i as u64],
            );
            let rir_index = rng.random_range(0..room_rirs.len());
            let wet = fft_convolve(clip, room_rirs[rir_index].clip())?;
            let cropped = crop_pad(&wet, 1.0)?;
            Ok(ReverbClip {
                clip: normalize_max(&cropped).clip,
                label,
                rir_index,
            })
        });
    let clips: Result<Vec<ReverbClip>, PipelineError> = results.into_iter().collect();
    Ok(ReverbTestSet {
        room_id: room_id.to_string(),
        target_t60,
        clips: clips?,
    })
}
