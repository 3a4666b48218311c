//! Shared command plumbing: config resolution, output layout, bank and
//! dataset loading with on-demand generation.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use roomsec::pipeline::{Banks, RunConfig};
use roomsec::rir::{bank_load, bank_save};

pub const OUT_ENV: &str = "ROOMSEC_OUT";

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config_path: Option<&Path>, out: Option<&Path>) -> Result<Self> {
        let config = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                RunConfig::from_json(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        let out_dir = out
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        Ok(Self { config, out_dir })
    }

    pub fn train_bank_dir(&self) -> PathBuf {
        self.out_dir.join("banks/train")
    }

    pub fn test_bank_dir(&self) -> PathBuf {
        self.out_dir.join("banks/test")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.out_dir.join("checkpoints")
    }

    /// Load both banks from the output tree, generating and saving them
    /// first when missing.
    pub fn ensure_banks(&self) -> Result<Banks> {
        let train_dir = self.train_bank_dir();
        let test_dir = self.test_bank_dir();
        if train_dir.join("manifest.json").exists() && test_dir.join("manifest.json").exists() {
            let train = bank_load(&train_dir).context("loading train bank")?;
            let test = bank_load(&test_dir).context("loading test bank")?;
            return Ok(Banks { train, test });
        }
        eprintln!("generating RIR banks under {} ...", self.out_dir.display());
        let banks = Banks::generate(&self.config).context("generating banks")?;
        bank_save(&banks.train, &train_dir).context("saving train bank")?;
        bank_save(&banks.test, &test_dir).context("saving test bank")?;
        Ok(banks)
    }
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed `{t}`"))
        })
        .collect()
}
