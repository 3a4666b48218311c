use std::process::ExitCode;

use anyhow::{Context as _, Result};
use roomsec::pipeline::synth_dataset;
use roomsec::signal::wav;
use serde::Serialize;

use crate::common::Context;

#[derive(Serialize)]
struct DatasetManifest {
    n_classes: usize,
    clips_per_class: usize,
    train_per_class: usize,
    seed: u64,
    classes: Vec<String>,
    train_pool: Vec<usize>,
    test: Vec<usize>,
}

pub fn run(
    mut ctx: Context,
    classes: Option<usize>,
    clips_per_class: Option<usize>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    if let Some(c) = classes {
        ctx.config.dataset.n_classes = c;
    }
    if let Some(c) = clips_per_class {
        ctx.config.dataset.clips_per_class = c;
        ctx.config.dataset.train_per_class = (c * 3) / 4;
    }
    if let Some(s) = seed {
        ctx.config.dataset.seed = s;
    }
    let ds_cfg = &ctx.config.dataset;
    let dataset = synth_dataset(
        ds_cfg.n_classes,
        ds_cfg.clips_per_class,
        ds_cfg.train_per_class,
        ds_cfg.seed,
    )
    .context("dataset synthesis")?;

    let root = ctx.out_dir.join("dataset");
    for class in &dataset.classes {
        std::fs::create_dir_all(root.join(class))?;
    }
    for (i, (class_id, clip)) in dataset.clips.iter().enumerate() {
        let within = i % ds_cfg.clips_per_class;
        let path = root
            .join(&dataset.classes[*class_id])
            .join(format!("clip_{within:04}.wav"));
        wav::write(&path, clip, wav::SampleFormat::Float32)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let manifest = DatasetManifest {
        n_classes: ds_cfg.n_classes,
        clips_per_class: ds_cfg.clips_per_class,
        train_per_class: ds_cfg.train_per_class,
        seed: ds_cfg.seed,
        classes: dataset.classes.clone(),
        train_pool: dataset.train_pool.clone(),
        test: dataset.test.clone(),
    };
    std::fs::write(
        root.join("dataset.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    println!(
        "dataset: {} classes x {} clips -> {}",
        ds_cfg.n_classes,
        ds_cfg.clips_per_class,
        root.display()
    );
    Ok(ExitCode::SUCCESS)
}
