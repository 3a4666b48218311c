use std::process::ExitCode;

use anyhow::{Context as _, Result};
use roomsec::nn::checkpoint::{self, CheckpointMeta};
use roomsec::pipeline::{manifest_json, run_experiment, write_csv};

use crate::common::{parse_seed_list, Context};

pub fn run(
    mut ctx: Context,
    seeds: Option<&str>,
    strategies: Option<&str>,
    epochs: Option<usize>,
) -> Result<ExitCode> {
    if let Some(s) = seeds {
        ctx.config.seeds = parse_seed_list(s)?;
    }
    if let Some(s) = strategies {
        ctx.config.strategies = s.split(',').map(|t| t.trim().to_string()).collect();
    }
    if let Some(e) = epochs {
        ctx.config.train.max_epochs = e;
    }
    ctx.config.parsed_strategies().context("strategies")?;

    let banks = ctx.ensure_banks()?;
    eprintln!(
        "experiment: strategies [{}], seeds {:?}, {} epochs max",
        ctx.config.strategies.join(", "),
        ctx.config.seeds,
        ctx.config.train.max_epochs
    );
    let output = run_experiment(&ctx.config, &banks).context("experiment")?;

    std::fs::create_dir_all(&ctx.out_dir)?;
    let csv_path = ctx.out_dir.join("experiment.csv");
    write_csv(&csv_path, &output.rows).context("writing CSV")?;
    std::fs::write(
        ctx.out_dir.join("run_manifest.json"),
        manifest_json(&output.manifest),
    )?;

    std::fs::create_dir_all(ctx.checkpoints_dir())?;
    for entry in &output.models {
        let path = ctx.checkpoints_dir().join(format!(
            "{}_seed{}.ckpt",
            entry.strategy.as_str(),
            entry.seed
        ));
        let meta = CheckpointMeta {
            config_hash: ctx.config.hash(),
            epoch: entry.outcome.result.selected_epoch,
            val_loss: entry.outcome.result.val_loss[entry.outcome.result.selected_epoch],
            strategy: entry.strategy.as_str().to_string(),
            seed: entry.seed,
        };
        checkpoint::save(&path, &entry.outcome.model, &meta)
            .with_context(|| format!("saving {}", path.display()))?;
    }

    println!(
        "{} rows -> {} ({:.1} s)",
        output.rows.len(),
        csv_path.display(),
        output.elapsed_s
    );
    for failure in &output.failures {
        eprintln!("trial failure: {failure}");
    }
    if output.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
