//! Evaluation protocols: accuracy under conditioning policies, the
//! deconvolution baseline, fake conditioning, and per-DRR-group analysis.

use rand::Rng;

use super::dataset::EventDataset;
use super::deconv::deconv_preprocess;
use super::testset::ReverbTestSet;
use super::train::{clip_features, pack_batch};
use super::PipelineError;
use crate::acoustics::drr_tercile_split;
use crate::exec;
use crate::nn::Model;
use crate::rir::Rir;
use crate::util;

const EVAL_BATCH: usize = 64;

/// A test set with features extracted, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PreparedTestSet {
    pub room_id: String,
    pub target_t60: f64,
    pub x_feats: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
    /// Index (into the room's RIR list) of each clip's convolving RIR;
    /// all zeros for the clean set.
    pub rir_index: Vec<usize>,
}

impl PreparedTestSet {
    pub fn from_reverb(set: &ReverbTestSet) -> Result<Self, PipelineError> {
        let feats: Vec<Result<Vec<f32>, PipelineError>> =
            exec::par_map(&set.clips, |rc| clip_features(&rc.clip));
        Ok(Self {
            room_id: set.room_id.clone(),
            target_t60: set.target_t60,
            x_feats: feats.into_iter().collect::<Result<_, _>>()?,
            labels: set.clips.iter().map(|c| c.label).collect(),
            rir_index: set.clips.iter().map(|c| c.rir_index).collect(),
        })
    }

    pub fn from_clean(dataset: &EventDataset) -> Result<Self, PipelineError> {
        let items: Vec<(usize, &crate::signal::AudioClip)> = dataset
            .test
            .iter()
            .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
            .collect();
        let feats: Vec<Result<Vec<f32>, PipelineError>> =
            exec::par_map(&items, |(_, clip)| clip_features(clip));
        Ok(Self {
            room_id: "clean".to_string(),
            target_t60: 0.0,
            x_feats: feats.into_iter().collect::<Result<_, _>>()?,
            labels: items.iter().map(|(l, _)| *l).collect(),
            rir_index: vec![0; items.len()],
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// How the conditioning input is chosen per clip.
#[derive(Debug, Clone, Copy)]
pub enum CondPolicy<'a> {
    /// No conditioning input; only valid for unconditioned models.
    None,
    /// A fixed conditioning feature for every clip (e.g. the unit impulse
    /// on clean sets).
    Fixed { feat: &'a [f32] },
    /// Per clip, a uniformly drawn RIR of the same room excluding the
    /// clip's own convolving RIR.
    SameRoomOtherPoint { room_feats: &'a [Vec<f32>] },
    /// Per clip, a uniformly drawn RIR from some (possibly different)
    /// room; used by fake conditioning.
    Room { feats: &'a [Vec<f32>] },
}

/// Per-clip correctness under a conditioning policy. Deterministic in
/// `seed`; per-clip RNG streams make the result batch-order independent.
pub fn predict_correct(
    model: &Model<f32>,
    set: &PreparedTestSet,
    policy: CondPolicy<'_>,
    seed: u64,
) -> Result<Vec<bool>, PipelineError> {
    let conditioned = model.config.mode.is_conditioned();
    if conditioned && matches!(policy, CondPolicy::None) {
        return Err(PipelineError::PolicyMismatch);
    }
    if let CondPolicy::SameRoomOtherPoint { room_feats } = policy {
        if room_feats.len() < 2 {
            return Err(PipelineError::SingleRir(set.room_id.clone()));
        }
    }

    let bands = model.config.input_bands;
    let frames = model.config.input_frames;
    let mut correct = Vec::with_capacity(set.len());
    for start in (0..set.len()).step_by(EVAL_BATCH) {
        let end = (start + EVAL_BATCH).min(set.len());
        let x_refs: Vec<&[f32]> = set.x_feats[start..end].iter().map(|f| f.as_slice()).collect();
        let x = pack_batch(&x_refs, bands, frames);
        let r = if conditioned {
            let r_refs: Vec<&[f32]> = (start..end)
                .map(|i| resolve_policy(&policy, set, i, seed))
                .collect();
            Some(pack_batch(&r_refs, bands, frames))
        } else {
            None
        };
        let logits = model.forward_infer(&x, r.as_ref())?;
        let (n, k) = logits.dims2();
        for row in 0..n {
            let slice = &logits.data()[row * k..(row + 1) * k];
            let arg = slice
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.total_cmp(b))
                .map(|(i, _)| i)
                .unwrap();
            correct.push(arg == set.labels[start + row]);
        }
    }
    Ok(correct)
}

fn resolve_policy<'a>(
    policy: &CondPolicy<'a>,
    set: &PreparedTestSet,
    clip_index: usize,
    seed: u64,
) -> &'a [f32] {
    match policy {
        CondPolicy::None => unreachable!("checked by predict_correct"),
        CondPolicy::Fixed { feat } => feat,
        CondPolicy::SameRoomOtherPoint { room_feats } => {
            let mut rng = util::derived_rng(
                seed,
                &[util::tag("policy"), util::tag(&set.room_id), clip_index as u64],
            );
            let own = set.rir_index[clip_index];
            let k = rng.random_range(0..room_feats.len() - 1);
            let idx = if k >= own { k + 1 } else { k };
            &room_feats[idx]
        }
        CondPolicy::Room { feats } => {
            let mut rng = util::derived_rng(
                seed,
                &[util::tag("policy"), util::tag(&set.room_id), clip_index as u64],
            );
            &feats[rng.random_range(0..feats.len())]
        }
    }
}

/// Accuracy under a conditioning policy.
pub fn evaluate(
    model: &Model<f32>,
    set: &PreparedTestSet,
    policy: CondPolicy<'_>,
    seed: u64,
) -> Result<f64, PipelineError> {
    let correct = predict_correct(model, set, policy, seed)?;
    Ok(accuracy(&correct))
}

pub(crate) fn accuracy(correct: &[bool]) -> f64 {
    if correct.is_empty() {
        return 0.0;
    }
    correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
}

/// Deconvolution-baseline evaluation: each reverberant clip is deconvolved
/// with a same-room RIR before feature extraction. With more than one RIR
/// in the room the clip's own convolving RIR is excluded (a different
/// point in the same room); a single-RIR room (the clean set's unit
/// impulse) uses that RIR directly.
pub fn evaluate_deconv(
    model: &Model<f32>,
    set: &ReverbTestSet,
    room_rirs: &[Rir],
    lambda_reg: f64,
    seed: u64,
) -> Result<Vec<bool>, PipelineError> {
    if room_rirs.is_empty() {
        return Err(PipelineError::EmptyRoom(set.room_id.clone()));
    }
    let feats: Vec<Result<(Vec<f32>, usize), PipelineError>> =
        exec::par_map_indexed(&set.clips, |i, rc| {
            let rir_idx = if room_rirs.len() == 1 {
                0
            } else {
                let mut rng = util::derived_rng(
                    seed,
                    &[util::tag("deconv"), util::tag(&set.room_id), i as u64],
                );
                let k = rng.random_range(0..room_rirs.len() - 1);
                if k >= rc.rir_index {
                    k + 1
                } else {
                    k
                }
            };
            let recovered = deconv_preprocess(&rc.clip, room_rirs[rir_idx].clip(), lambda_reg)?;
            Ok((clip_features(&recovered)?, rc.label))
        });
    let feats: Vec<(Vec<f32>, usize)> = feats.into_iter().collect::<Result<_, _>>()?;

    let bands = model.config.input_bands;
    let frames = model.config.input_frames;
    let mut correct = Vec::with_capacity(feats.len());
    for chunk in feats.chunks(EVAL_BATCH) {
        let x_refs: Vec<&[f32]> = chunk.iter().map(|(f, _)| f.as_slice()).collect();
        let x = pack_batch(&x_refs, bands, frames);
        let logits = model.forward_infer(&x, None)?;
        let (n, k) = logits.dims2();
        for row in 0..n {
            let slice = &logits.data()[row * k..(row + 1) * k];
            let arg = slice
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.total_cmp(b))
                .map(|(i, _)| i)
                .unwrap();
            correct.push(arg == chunk[row].1);
        }
    }
    Ok(correct)
}

/// One cell of the fake-conditioning accuracy matrix.
#[derive(Debug, Clone)]
pub struct FakeCell {
    pub test_room: String,
    pub test_t60: f64,
    pub cond_room: String,
    pub cond_t60: f64,
    pub accuracy: f64,
    /// Set when conditioning room == test room (same-room-other-point).
    pub true_conditioning: bool,
}

/// Evaluate a conditioned model on every (test room, conditioning room)
/// pair. The diagonal uses the same-room-other-point policy; off-diagonal
/// cells draw uniformly from the conditioning room's RIRs.
pub fn fake_conditioning_sweep(
    model: &Model<f32>,
    test_sets: &[&PreparedTestSet],
    cond_rooms: &[(String, f64, Vec<Vec<f32>>)],
    seed: u64,
) -> Result<Vec<FakeCell>, PipelineError> {
    if !model.config.mode.is_conditioned() {
        return Err(PipelineError::PolicyMismatch);
    }
    if test_sets.is_empty() || cond_rooms.is_empty() {
        return Err(PipelineError::EmptyRoom("fake-conditioning sweep".into()));
    }
    let mut cells = Vec::with_capacity(test_sets.len() * cond_rooms.len());
    for set in test_sets {
        for (cond_room, cond_t60, feats) in cond_rooms {
            let is_true = *cond_room == set.room_id;
            let policy = if is_true {
                CondPolicy::SameRoomOtherPoint { room_feats: feats }
            } else {
                CondPolicy::Room { feats }
            };
            let acc = evaluate(model, set, policy, util::derive_seed(seed, &[util::tag(cond_room)]))?;
            cells.push(FakeCell {
                test_room: set.room_id.clone(),
                test_t60: set.target_t60,
                cond_room: cond_room.clone(),
                cond_t60: *cond_t60,
                accuracy: acc,
                true_conditioning: is_true,
            });
        }
    }
    Ok(cells)
}

/// Per-DRR-group accuracies for one room.
#[derive(Debug, Clone)]
pub struct DrrGroupReport {
    /// (group name, clip count, accuracy), ordered Low, Medium, High.
    pub groups: [(String, usize, f64); 3],
    /// (max DRR of Low, max DRR of Medium) in dB.
    pub boundaries_db: (f64, f64),
}

/// Split the room's RIRs into DRR terciles and compute accuracy over the
/// clips whose convolving RIR falls in each group.
pub fn drr_group_eval(
    correct: &[bool],
    set: &PreparedTestSet,
    room_rirs: &[Rir],
) -> Result<DrrGroupReport, PipelineError> {
    assert_eq!(correct.len(), set.len());
    let drrs: Vec<f64> = room_rirs
        .iter()
        .map(|r| match r.metrics() {
            Some(m) => m.drr_db,
            None => r.compute_metrics().drr_db,
        })
        .collect();
    let split = drr_tercile_split(&drrs)?;

    let mut group_of = vec![0usize; room_rirs.len()];
    for &i in &split.medium {
        group_of[i] = 1;
    }
    for &i in &split.high {
        group_of[i] = 2;
    }
    let mut counts = [0usize; 3];
    let mut hits = [0usize; 3];
    for (ok, &rir_idx) in correct.iter().zip(&set.rir_index) {
        let g = group_of[rir_idx];
        counts[g] += 1;
        if *ok {
            hits[g] += 1;
        }
    }
    let name = ["low", "medium", "high"];
    let mut groups: Vec<(String, usize, f64)> = Vec::with_capacity(3);
    for g in 0..3 {
        let acc = if counts[g] > 0 {
            hits[g] as f64 / counts[g] as f64
        } else {
            0.0
        };
        groups.push((name[g].to_string(), counts[g], acc));
    }
    Ok(DrrGroupReport {
        groups: groups.try_into().expect("three groups"),
        boundaries_db: split.boundaries_db,
    })
}
