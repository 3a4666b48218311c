use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Result};
use roomsec::pipeline::read_csv;
use roomsec::rir::bank_load;

pub fn run(path: &Path) -> Result<ExitCode> {
    if path.is_dir() && path.join("manifest.json").exists() {
        return inspect_bank(path);
    }
    if path.is_dir() && path.join("dataset.json").exists() {
        return inspect_dataset(path);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("ckpt") => inspect_checkpoint(path),
        Some("csv") => inspect_report(path),
        Some("json") => inspect_json(path),
        _ => bail!(
            "unrecognized artifact {}; expected a bank/dataset directory, .ckpt, .csv or .json",
            path.display()
        ),
    }
}

fn inspect_bank(path: &Path) -> Result<ExitCode> {
    let bank = bank_load(path)?;
    println!(
        "RIR bank: {} rooms, {} RIRs, {} Hz, seed {}, fingerprint {}",
        bank.rooms().len(),
        bank.len(),
        bank.sample_rate(),
        bank.seed(),
        bank.fingerprint()
    );
    println!("room        t60_target   t60_mean±std      drr_mean±std [dB]   n");
    for room in bank.rooms() {
        let rirs = bank.room_rirs(&room.id).unwrap();
        let t60s: Vec<f64> = rirs
            .iter()
            .filter_map(|r| r.metrics().map(|m| m.t60_s))
            .collect();
        let drrs: Vec<f64> = rirs
            .iter()
            .filter_map(|r| r.metrics().map(|m| m.drr_db))
            .filter(|d| d.is_finite())
            .collect();
        let stats = |v: &[f64]| {
            if v.is_empty() {
                return (f64::NAN, f64::NAN);
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
            (m, s)
        };
        let (tm, ts) = stats(&t60s);
        let (dm, ds) = stats(&drrs);
        println!(
            "{:<12}{:>8.3}   {:>7.3} ± {:<6.3}  {:>7.2} ± {:<6.2}  {:>3}",
            room.id,
            room.target_t60,
            tm,
            ts,
            dm,
            ds,
            rirs.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn inspect_dataset(path: &Path) -> Result<ExitCode> {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path.join("dataset.json"))?)?;
    println!("dataset at {}:", path.display());
    for key in ["n_classes", "clips_per_class", "train_per_class", "seed"] {
        println!("  {key}: {}", manifest[key]);
    }
    if let Some(classes) = manifest["classes"].as_array() {
        let names: Vec<String> = classes
            .iter()
            .filter_map(|c| c.as_str().map(String::from))
            .collect();
        println!("  classes: {}", names.join(", "));
    }
    Ok(ExitCode::SUCCESS)
}

fn inspect_checkpoint(path: &Path) -> Result<ExitCode> {
    let (config, dtype) = roomsec::nn::checkpoint::peek_config(path)?;
    let (model, meta) = roomsec::nn::checkpoint::load::<f32>(path)?;
    println!("checkpoint {}:", path.display());
    println!("  strategy: {} (seed {})", meta.strategy, meta.seed);
    println!("  mode: {:?}", config.mode);
    println!(
        "  channels: {:?}, fc width {}, {} classes",
        config.channels, config.fc_width, config.n_classes
    );
    println!("  parameters: {}", model.n_params());
    println!("  scalar width: f{}", dtype * 8);
    println!(
        "  selected epoch: {} (val loss {:.4})",
        meta.epoch, meta.val_loss
    );
    println!("  config hash: {}", meta.config_hash);
    Ok(ExitCode::SUCCESS)
}

fn inspect_report(path: &Path) -> Result<ExitCode> {
    let rows = read_csv(path)?;
    println!("report {} ({} rows):", path.display(), rows.len());
    let mut strategies: Vec<String> = rows.iter().map(|r| r.strategy.clone()).collect();
    strategies.sort();
    strategies.dedup();
    for strategy in strategies {
        let overall: Vec<&roomsec::pipeline::ReportRow> = rows
            .iter()
            .filter(|r| r.strategy == strategy && r.drr_group == "all")
            .collect();
        let clean: Vec<f64> = overall
            .iter()
            .filter(|r| r.room_id == "clean")
            .map(|r| r.accuracy)
            .collect();
        let reverb: Vec<f64> = overall
            .iter()
            .filter(|r| r.room_id != "clean")
            .map(|r| r.accuracy)
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        println!(
            "  {:<8} clean {:.3}  reverberant mean {:.3} over {} room-evals",
            strategy,
            mean(&clean),
            mean(&reverb),
            reverb.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn inspect_json(path: &Path) -> Result<ExitCode> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if value.get("config_hash").is_some() {
        println!("run manifest {}:", path.display());
        for key in ["crate_version", "config_hash", "train_bank_fingerprint", "test_bank_fingerprint", "n_rows"] {
            println!("  {key}: {}", value[key]);
        }
        let failures = value["failures"].as_array().map(Vec::len).unwrap_or(0);
        println!("  failures: {failures}");
    } else if roomsec::pipeline::RunConfig::from_json(&std::fs::read_to_string(path)?).is_ok() {
        let cfg = roomsec::pipeline::RunConfig::from_json(&std::fs::read_to_string(path)?).unwrap();
        println!("run config {} (hash {}):", path.display(), cfg.hash());
        println!("{}", cfg.to_json());
    } else {
        println!("json document {}:", path.display());
        println!("{}", serde_json::to_string_pretty(&value)?);
    }
    Ok(ExitCode::SUCCESS)
}
