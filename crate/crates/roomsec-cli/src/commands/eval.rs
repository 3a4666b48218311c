use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use roomsec::features::rir_features;
use roomsec::pipeline::{
    evaluate, evaluate_deconv, make_simulated_testset, synth_dataset, CondPolicy,
    PreparedTestSet,
};
use roomsec::rir::unit_impulse;
use roomsec::signal::AudioClip;

use crate::common::Context;

fn delta_feat() -> Vec<f32> {
    let delta = unit_impulse(16_000, 16_000);
    rir_features(delta.clip())
        .expect("delta features")
        .values()
        .iter()
        .map(|&v| v as f32)
        .collect()
}

pub fn run(
    ctx: Context,
    checkpoint: &Path,
    room: &str,
    policy: Option<&str>,
    deconv: bool,
) -> Result<ExitCode> {
    let (model, meta) = roomsec::nn::checkpoint::load::<f32>(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let conditioned = model.config.mode.is_conditioned();

    let ds = &ctx.config.dataset;
    let dataset = synth_dataset(ds.n_classes, ds.clips_per_class, ds.train_per_class, ds.seed)
        .context("dataset synthesis")?;
    let test_clips: Vec<(usize, &AudioClip)> = dataset
        .test
        .iter()
        .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
        .collect();
    let eval_seed = ctx.config.eval_seed;

    let accuracy = if room == "clean" {
        let set = PreparedTestSet::from_clean(&dataset)?;
        if deconv {
            let identity = vec![unit_impulse(16_000, 16_000)];
            let reverb = make_simulated_testset(&test_clips, "clean", 0.0, &identity, eval_seed)?;
            let correct =
                evaluate_deconv(&model, &reverb, &identity, ctx.config.deconv_lambda, eval_seed)?;
            correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
        } else if conditioned {
            let feat = delta_feat();
            evaluate(&model, &set, CondPolicy::Fixed { feat: &feat }, eval_seed)?
        } else {
            evaluate(&model, &set, CondPolicy::None, eval_seed)?
        }
    } else {
        let banks = ctx.ensure_banks()?;
        let Some(room_spec) = banks.test.room(room).cloned() else {
            bail!(
                "unknown room `{room}`; available: {}",
                banks
                    .test
                    .rooms()
                    .iter()
                    .map(|r| r.id.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        };
        let rirs = banks.test.room_rirs(room).expect("room exists");
        let reverb =
            make_simulated_testset(&test_clips, room, room_spec.target_t60, rirs, eval_seed)?;
        if deconv {
            let correct =
                evaluate_deconv(&model, &reverb, rirs, ctx.config.deconv_lambda, eval_seed)?;
            correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
        } else {
            let set = PreparedTestSet::from_reverb(&reverb)?;
            let policy_name = policy.unwrap_or(if conditioned {
                "same-room-other-point"
            } else {
                "none"
            });
            match policy_name {
                "none" => evaluate(&model, &set, CondPolicy::None, eval_seed)?,
                "delta" => {
                    let feat = delta_feat();
                    evaluate(&model, &set, CondPolicy::Fixed { feat: &feat }, eval_seed)?
                }
                "same-room-other-point" => {
                    let feats: Result<Vec<Vec<f32>>, _> = rirs
                        .iter()
                        .map(|r| {
                            rir_features(r.clip()).map(|m| {
                                m.values().iter().map(|&v| v as f32).collect::<Vec<f32>>()
                            })
                        })
                        .collect();
                    let feats = feats.context("conditioning features")?;
                    evaluate(
                        &model,
                        &set,
                        CondPolicy::SameRoomOtherPoint { room_feats: &feats },
                        eval_seed,
                    )?
                }
                other => bail!("unknown policy `{other}`"),
            }
        }
    };

    println!(
        "checkpoint {} ({} seed {}) on {room}: accuracy {:.4}",
        checkpoint.display(),
        meta.strategy,
        meta.seed,
        accuracy
    );
    Ok(ExitCode::SUCCESS)
}
