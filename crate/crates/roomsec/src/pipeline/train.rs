//! The four training strategies. Base and Deconv train identically on
//! clean data; Aug trains on per-epoch reverberated data with pairs
//! ignored; Cndt trains on the same augmented stream with the exact
//! convolving RIR as the conditioning input.

use rand::Rng;

use super::augment::{augment_epoch, AugmentedItem, RirRef};
use super::dataset::EventDataset;
use super::PipelineError;
use crate::exec;
use crate::features::{mel_spectrogram, rir_features, MelSpec};
use crate::nn::{
    adam_step, softmax_xent_batch, AdamParams, AdamState, ConditioningMode, Model, ModelConfig,
    Tensor,
};
use crate::rir::{unit_impulse, RirBank};
use crate::signal::AudioClip;
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Base,
    Deconv,
    Aug,
    Cndt,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Base => "base",
            Strategy::Deconv => "deconv",
            Strategy::Aug => "aug",
            Strategy::Cndt => "cndt",
        }
    }

    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s {
            "base" => Ok(Strategy::Base),
            "deconv" => Ok(Strategy::Deconv),
            "aug" => Ok(Strategy::Aug),
            "cndt" => Ok(Strategy::Cndt),
            other => Err(PipelineError::UnknownStrategy(other.to_string())),
        }
    }

    pub fn needs_bank(self) -> bool {
        matches!(self, Strategy::Aug | Strategy::Cndt)
    }

    /// Training data identical to Base; differs only at inference.
    pub fn trains_like_base(self) -> bool {
        matches!(self, Strategy::Base | Strategy::Deconv)
    }
}

#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Conditioning variant for Cndt (conditioned / scale_only / bias_only).
    pub conditioning_mode: ConditioningMode,
    pub clean_mix_prob: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam: AdamParams,
    pub channels: [usize; 4],
    pub fc_width: usize,
    pub seed: u64,
}

impl StrategyConfig {
    pub fn desk_scale(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            conditioning_mode: ConditioningMode::Conditioned,
            clean_mix_prob: 0.5,
            batch_size: 64,
            max_epochs: 100,
            adam: AdamParams::default(),
            channels: [8, 16, 32, 32],
            fc_width: 512,
            seed,
        }
    }

    fn mode(&self) -> ConditioningMode {
        match self.strategy {
            Strategy::Cndt => self.conditioning_mode,
            _ => ConditioningMode::Unconditioned,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub selected_epoch: usize,
}

pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model<f32>,
    pub result: TrialResult,
}

pub(crate) fn mel_to_f32(spec: &MelSpec) -> Vec<f32> {
    spec.values().iter().map(|&v| v as f32).collect()
}

pub(crate) fn clip_features(clip: &AudioClip) -> Result<Vec<f32>, PipelineError> {
    Ok(mel_to_f32(&mel_spectrogram(clip)?))
}

pub(crate) fn rir_clip_features(clip: &AudioClip) -> Result<Vec<f32>, PipelineError> {
    Ok(mel_to_f32(&rir_features(clip)?))
}

pub(crate) fn delta_features() -> Vec<f32> {
    let delta = unit_impulse(16_000, 16_000);
    rir_clip_features(delta.clip()).expect("delta features are well-formed")
}

/// Precompute conditioning features for every RIR in a bank, flat order.
pub(crate) fn bank_features(bank: &RirBank) -> Result<Vec<Vec<f32>>, PipelineError> {
    let rirs: Vec<&crate::rir::Rir> = bank.iter().collect();
    let feats: Vec<Result<Vec<f32>, PipelineError>> =
        exec::par_map(&rirs, |rir| rir_clip_features(rir.clip()));
    feats.into_iter().collect()
}

pub(crate) fn pack_batch(feats: &[&[f32]], bands: usize, frames: usize) -> Tensor<f32> {
    let mut data = Vec::with_capacity(feats.len() * bands * frames);
    for f in feats {
        debug_assert_eq!(f.len(), bands * frames);
        data.extend_from_slice(f);
    }
    Tensor::from_vec(&[feats.len(), 1, bands, frames], data)
}

/// One epoch's training items as feature references.
enum FeatRef {
    Clean(usize),
    Wet(Vec<f32>),
}

struct EpochItem {
    x: FeatRef,
    r: RirRef,
    label: usize,
}

fn epoch_features(
    augmented: &[AugmentedItem],
) -> Result<Vec<EpochItem>, PipelineError> {
    // Reverberant items need fresh mel extraction; clean items reuse the
    // precomputed features (index = position in the item list).
    let wet: Vec<Result<Option<Vec<f32>>, PipelineError>> =
        exec::par_map(augmented, |item| match item.rir {
            RirRef::Delta => Ok(None),
            RirRef::Bank(_) => clip_features(&item.clip).map(Some),
        });
    let mut out = Vec::with_capacity(augmented.len());
    for (i, (item, wet_feat)) in augmented.iter().zip(wet).enumerate() {
        out.push(EpochItem {
            x: match wet_feat? {
                Some(f) => FeatRef::Wet(f),
                None => FeatRef::Clean(i),
            },
            r: item.rir,
            label: item.label,
        });
    }
    Ok(out)
}

/// Train one strategy on one seed. Returns the checkpoint with the lowest
/// validation loss and the full loss history.
pub fn train_strategy(
    dataset: &EventDataset,
    bank: Option<&RirBank>,
    cfg: &StrategyConfig,
) -> Result<TrainOutcome, PipelineError> {
    assert!(cfg.max_epochs >= 1);
    let bank = match (cfg.strategy.needs_bank(), bank) {
        (true, None) => {
            return Err(PipelineError::MissingBank {
                strategy: cfg.strategy.as_str().to_string(),
            })
        }
        (true, Some(b)) => Some(b),
        (false, b) => b,
    };
    let mode = cfg.mode();
    let conditioned = mode.is_conditioned();

    let model_cfg = ModelConfig {
        channels: cfg.channels,
        fc_width: cfg.fc_width,
        n_classes: dataset.n_classes(),
        mode,
        ..ModelConfig::desk_scale(dataset.n_classes(), mode)
    };
    let bands = model_cfg.input_bands;
    let frames = model_cfg.input_frames;
    let mut model = Model::<f32>::new(model_cfg, util::derive_seed(cfg.seed, &[util::tag("model")]));
    let group_sizes: Vec<usize> = model.param_groups().iter().map(|g| g.len()).collect();
    let mut adam = AdamState::new(cfg.adam, &group_sizes);
    let group_names = model.group_names();

    let (train_idx, val_idx) = dataset.trial_split(cfg.seed);
    let train_items: Vec<(usize, &AudioClip)> = train_idx
        .iter()
        .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
        .collect();
    let val_items: Vec<(usize, &AudioClip)> = val_idx
        .iter()
        .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
        .collect();

    // Feature precomputation.
    let clean_train_feats: Vec<Vec<f32>> = {
        let feats: Vec<Result<Vec<f32>, PipelineError>> =
            exec::par_map(&train_items, |(_, clip)| clip_features(clip));
        feats.into_iter().collect::<Result<_, _>>()?
    };
    let delta_feat = delta_features();
    let bank_feats: Option<Vec<Vec<f32>>> = match (cfg.strategy.needs_bank(), bank) {
        (true, Some(b)) if conditioned => Some(bank_features(b)?),
        _ => None,
    };

    // Validation set: fixed for the whole trial. Base/Deconv validate on
    // clean data; Aug/Cndt validate on a frozen draw of the augmented
    // distribution so the selection metric matches the training data.
    let (val_feats, val_rirs, val_labels): (Vec<Vec<f32>>, Vec<RirRef>, Vec<usize>) =
        if cfg.strategy.trains_like_base() {
            let feats: Vec<Result<Vec<f32>, PipelineError>> =
                exec::par_map(&val_items, |(_, clip)| clip_features(clip));
            (
                feats.into_iter().collect::<Result<_, _>>()?,
                vec![RirRef::Delta; val_items.len()],
                val_items.iter().map(|(l, _)| *l).collect(),
            )
        } else {
            let augmented = augment_epoch(
                &val_items,
                bank.expect("bank checked above"),
                cfg.clean_mix_prob,
                util::derive_seed(cfg.seed, &[util::tag("val-aug")]),
            )?;
            let feats: Vec<Result<Vec<f32>, PipelineError>> =
                exec::par_map(&augmented, |item| clip_features(&item.clip));
            (
                feats.into_iter().collect::<Result<_, _>>()?,
                augmented.iter().map(|a| a.rir).collect(),
                augmented.iter().map(|a| a.label).collect(),
            )
        };

    let resolve_r = |r: &RirRef| -> &[f32] {
        match r {
            RirRef::Delta => &delta_feat,
            RirRef::Bank(i) => &bank_feats.as_ref().expect("bank features present")[*i],
        }
    };

    let mut train_loss_hist = Vec::with_capacity(cfg.max_epochs);
    let mut val_loss_hist = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, Model<f32>)> = None;

    for epoch in 0..cfg.max_epochs {
        // Build this epoch's items.
        let epoch_items: Vec<EpochItem> = if cfg.strategy.trains_like_base() {
            train_items
                .iter()
                .enumerate()
                .map(|(i, (label, _))| EpochItem {
                    x: FeatRef::Clean(i),
                    r: RirRef::Delta,
                    label: *label,
                })
                .collect()
        } else {
            let augmented = augment_epoch(
                &train_items,
                bank.expect("bank checked above"),
                cfg.clean_mix_prob,
                util::derive_seed(cfg.seed, &[util::tag("epoch"), epoch as u64]),
            )?;
            epoch_features(&augmented)?
        };

        // Shuffled batch order.
        let mut order: Vec<usize> = (0..epoch_items.len()).collect();
        let mut rng = util::derived_rng(cfg.seed, &[util::tag("shuffle"), epoch as u64]);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let x_refs: Vec<&[f32]> = batch
                .iter()
                .map(|&i| match &epoch_items[i].x {
                    FeatRef::Clean(k) => clean_train_feats[*k].as_slice(),
                    FeatRef::Wet(f) => f.as_slice(),
                })
                .collect();
            let labels: Vec<usize> = batch.iter().map(|&i| epoch_items[i].label).collect();
            let x = pack_batch(&x_refs, bands, frames);
            let r = if conditioned {
                let r_refs: Vec<&[f32]> = batch
                    .iter()
                    .map(|&i| resolve_r(&epoch_items[i].r))
                    .collect();
                Some(pack_batch(&r_refs, bands, frames))
            } else {
                None
            };

            let (logits, cache) = model.forward_train(&x, r.as_ref(), true)?;
            let (loss, dlogits) = softmax_xent_batch(&logits, &labels)?;
            let loss = loss as f64;
            if !loss.is_finite() {
                return Err(PipelineError::Diverged { epoch });
            }
            let grads = model.backward(&cache, &dlogits);
            {
                let grad_slices = grads.groups();
                let mut params = model.param_groups_mut();
                let mut named: Vec<(&str, &mut [f32])> = group_names
                    .iter()
                    .map(|n| n.as_str())
                    .zip(params.drain(..))
                    .collect();
                adam_step(&mut named, &grad_slices, &mut adam)?;
            }
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();
        }
        train_loss_hist.push(epoch_loss / seen.max(1) as f64);

        // Validation loss with running statistics.
        let mut vloss = 0.0;
        for chunk_start in (0..val_feats.len()).step_by(cfg.batch_size) {
            let end = (chunk_start + cfg.batch_size).min(val_feats.len());
            let x_refs: Vec<&[f32]> = val_feats[chunk_start..end]
                .iter()
                .map(|f| f.as_slice())
                .collect();
            let labels = &val_labels[chunk_start..end];
            let x = pack_batch(&x_refs, bands, frames);
            let r = if conditioned {
                let r_refs: Vec<&[f32]> = val_rirs[chunk_start..end]
                    .iter()
                    .map(&resolve_r)
                    .collect();
                Some(pack_batch(&r_refs, bands, frames))
            } else {
                None
            };
            let logits = model.forward_infer(&x, r.as_ref())?;
            let (loss, _) = softmax_xent_batch(&logits, labels)?;
            vloss += loss as f64 * (end - chunk_start) as f64;
        }
        let vloss = vloss / val_feats.len().max(1) as f64;
        if !vloss.is_finite() {
            return Err(PipelineError::Diverged { epoch });
        }
        val_loss_hist.push(vloss);

        let improved = best.as_ref().is_none_or(|(b, _, _)| vloss < *b);
        if improved {
            best = Some((vloss, epoch, model.clone()));
        }
    }

    let (_, selected_epoch, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        result: TrialResult {
            strategy: cfg.strategy,
            seed: cfg.seed,
            train_loss: train_loss_hist,
            val_loss: val_loss_hist,
            selected_epoch,
        },
    })
}
