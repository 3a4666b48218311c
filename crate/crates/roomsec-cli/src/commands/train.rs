use std::process::ExitCode;

use anyhow::{Context as _, Result};
use roomsec::nn::checkpoint::{self, CheckpointMeta};
use roomsec::pipeline::{synth_dataset, train_strategy, Strategy};
use serde::Serialize;

use crate::common::Context;

#[derive(Serialize)]
struct History {
    strategy: String,
    seed: u64,
    selected_epoch: usize,
    train_loss: Vec<f64>,
    val_loss: Vec<f64>,
}

pub fn run(
    mut ctx: Context,
    strategy: &str,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<ExitCode> {
    let strategy = Strategy::parse(strategy).context("parsing --strategy")?;
    if let Some(e) = epochs {
        ctx.config.train.max_epochs = e;
    }
    let seed = seed.unwrap_or_else(|| ctx.config.seeds.first().copied().unwrap_or(1));

    let ds = &ctx.config.dataset;
    let dataset = synth_dataset(ds.n_classes, ds.clips_per_class, ds.train_per_class, ds.seed)
        .context("dataset synthesis")?;
    let banks = if strategy.needs_bank() {
        Some(ctx.ensure_banks()?)
    } else {
        None
    };

    let cfg = ctx.config.strategy_config(strategy, seed)?;
    eprintln!(
        "training {} (seed {seed}, {} epochs) ...",
        strategy.as_str(),
        cfg.max_epochs
    );
    let outcome = train_strategy(&dataset, banks.as_ref().map(|b| &b.train), &cfg)
        .context("training")?;

    std::fs::create_dir_all(ctx.checkpoints_dir())?;
    let ckpt_path = ctx
        .checkpoints_dir()
        .join(format!("{}_seed{}.ckpt", strategy.as_str(), seed));
    let meta = CheckpointMeta {
        config_hash: ctx.config.hash(),
        epoch: outcome.result.selected_epoch,
        val_loss: outcome.result.val_loss[outcome.result.selected_epoch],
        strategy: strategy.as_str().to_string(),
        seed,
    };
    checkpoint::save(&ckpt_path, &outcome.model, &meta).context("saving checkpoint")?;
    let history = History {
        strategy: strategy.as_str().to_string(),
        seed,
        selected_epoch: outcome.result.selected_epoch,
        train_loss: outcome.result.train_loss.clone(),
        val_loss: outcome.result.val_loss.clone(),
    };
    let hist_path = ckpt_path.with_extension("history.json");
    std::fs::write(&hist_path, serde_json::to_string_pretty(&history)?)?;

    println!(
        "checkpoint: {} (best epoch {}, val loss {:.4})",
        ckpt_path.display(),
        meta.epoch,
        meta.val_loss
    );
    Ok(ExitCode::SUCCESS)
}
