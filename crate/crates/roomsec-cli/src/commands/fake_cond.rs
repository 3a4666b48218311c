use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use roomsec::features::rir_features;
use roomsec::pipeline::{
    fake_conditioning_sweep, make_simulated_testset, synth_dataset, PreparedTestSet,
};
use roomsec::signal::AudioClip;

use crate::common::Context;

/// Matrix CSV columns.
const HEADER: &str = "test_room,test_t60,cond_room,cond_t60,accuracy,true_conditioning";

pub fn run(ctx: Context, checkpoint: &Path, test_rooms: Option<&str>) -> Result<ExitCode> {
    if !checkpoint.exists() {
        bail!("checkpoint {} does not exist", checkpoint.display());
    }
    let (config, _) = roomsec::nn::checkpoint::peek_config(checkpoint)
        .with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
    if !config.mode.is_conditioned() {
        bail!(
            "checkpoint {} is an unconditioned model ({:?}); fake conditioning needs a \
             model trained with RIR conditioning (the cndt strategy)",
            checkpoint.display(),
            config.mode
        );
    }
    let (model, meta) = roomsec::nn::checkpoint::load::<f32>(checkpoint)?;

    let ds = &ctx.config.dataset;
    let dataset = synth_dataset(ds.n_classes, ds.clips_per_class, ds.train_per_class, ds.seed)?;
    let test_clips: Vec<(usize, &AudioClip)> = dataset
        .test
        .iter()
        .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
        .collect();
    let banks = ctx.ensure_banks()?;

    let wanted: Vec<String> = test_rooms
        .unwrap_or("R027,R055,R134")
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut prepared = Vec::new();
    for id in &wanted {
        let Some(room) = banks.test.room(id).cloned() else {
            bail!("unknown test room `{id}`");
        };
        let rirs = banks.test.room_rirs(id).expect("room exists");
        let reverb =
            make_simulated_testset(&test_clips, id, room.target_t60, rirs, ctx.config.eval_seed)?;
        prepared.push(PreparedTestSet::from_reverb(&reverb)?);
    }
    let set_refs: Vec<&PreparedTestSet> = prepared.iter().collect();

    // Conditioning rooms: every training room plus every test room.
    let mut cond_rooms: Vec<(String, f64, Vec<Vec<f32>>)> = Vec::new();
    for (bank, rooms) in [
        (&banks.train, banks.train.rooms()),
        (&banks.test, banks.test.rooms()),
    ] {
        for room in rooms {
            let rirs = bank.room_rirs(&room.id).expect("room exists");
            let feats: Result<Vec<Vec<f32>>, _> = rirs
                .iter()
                .map(|r| {
                    rir_features(r.clip())
                        .map(|m| m.values().iter().map(|&v| v as f32).collect::<Vec<f32>>())
                })
                .collect();
            cond_rooms.push((room.id.clone(), room.target_t60, feats?));
        }
    }

    let cells =
        fake_conditioning_sweep(&model, &set_refs, &cond_rooms, ctx.config.eval_seed)?;

    let mut csv = String::from(HEADER);
    csv.push('\n');
    for c in &cells {
        csv.push_str(&format!(
            "{},{:.3},{},{:.3},{:.6},{}\n",
            c.test_room,
            c.test_t60,
            c.cond_room,
            c.cond_t60,
            c.accuracy,
            u8::from(c.true_conditioning)
        ));
    }
    std::fs::create_dir_all(&ctx.out_dir)?;
    let path = ctx.out_dir.join("fake_cond.csv");
    std::fs::write(&path, csv)?;
    println!(
        "fake conditioning of {} (seed {}): {} test rooms x {} conditioning rooms -> {}",
        meta.strategy,
        meta.seed,
        wanted.len(),
        cond_rooms.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}
