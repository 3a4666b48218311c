use std::process::ExitCode;

use anyhow::{Context as _, Result};
use roomsec::pipeline::Banks;
use roomsec::rir::bank_save;

use crate::common::Context;

pub fn run(
    mut ctx: Context,
    rooms: Option<usize>,
    per_room: Option<usize>,
    test_per_room: Option<usize>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    if let Some(r) = rooms {
        ctx.config.train_bank.rooms = r;
    }
    if let Some(p) = per_room {
        ctx.config.train_bank.rirs_per_room = p;
    }
    if let Some(t) = test_per_room {
        ctx.config.test_bank.rirs_per_room = t;
    }
    if let Some(s) = seed {
        ctx.config.train_bank.seed = s;
    }

    let banks = Banks::generate(&ctx.config).context("bank generation")?;
    bank_save(&banks.train, &ctx.train_bank_dir()).context("saving train bank")?;
    bank_save(&banks.test, &ctx.test_bank_dir()).context("saving test bank")?;

    println!(
        "train bank: {} rooms, {} RIRs, fingerprint {}",
        banks.train.rooms().len(),
        banks.train.len(),
        banks.train.fingerprint()
    );
    println!(
        "test bank:  {} rooms, {} RIRs, fingerprint {}",
        banks.test.rooms().len(),
        banks.test.len(),
        banks.test.fingerprint()
    );
    println!("written to {}", ctx.out_dir.join("banks").display());
    Ok(ExitCode::SUCCESS)
}
