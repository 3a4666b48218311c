//! The comparative experiment: train every requested strategy across
//! seeds, evaluate on the clean set and every simulated test room, and
//! emit the accuracy table (overall and per DRR group).

use std::time::Instant;

use super::config::RunConfig;
use super::dataset::synth_dataset;
use super::eval::{
    accuracy, drr_group_eval, evaluate_deconv, predict_correct, CondPolicy, PreparedTestSet,
};
use super::report::{render_csv, ReportRow, RunManifest};
use super::testset::{make_simulated_testset, ReverbTestSet};
use super::train::{delta_features, train_strategy, Strategy, TrainOutcome};
use super::PipelineError;
use crate::rir::{generate_rir_bank, presets, BankConfig, RirBank};
use crate::signal::AudioClip;

/// The two RIR banks an experiment runs against.
pub struct Banks {
    pub train: RirBank,
    pub test: RirBank,
}

impl Banks {
    /// Generate both banks from the presets and a config.
    pub fn generate(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let bank_cfg = BankConfig::default();
        let train_rooms = presets::default_train_rooms();
        let n_rooms = cfg.train_bank.rooms.clamp(1, train_rooms.len());
        let train = generate_rir_bank(
            &train_rooms[..n_rooms],
            cfg.train_bank.rirs_per_room,
            cfg.train_bank.seed,
            &bank_cfg,
        )?;
        let test = generate_rir_bank(
            &presets::default_test_rooms(),
            cfg.test_bank.rirs_per_room,
            cfg.test_bank.seed,
            &bank_cfg,
        )?;
        Ok(Self { train, test })
    }
}

/// One trained strategy instance retained for follow-up analyses.
pub struct TrainedEntry {
    pub strategy: Strategy,
    pub seed: u64,
    pub outcome: TrainOutcome,
}

pub struct ExperimentOutput {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<String>,
    pub models: Vec<TrainedEntry>,
    pub csv: String,
    pub manifest: RunManifest,
    pub elapsed_s: f64,
}

/// Prepared per-room evaluation material.
struct RoomEval {
    reverb: ReverbTestSet,
    prepared: PreparedTestSet,
    rir_feats: Vec<Vec<f32>>,
}

/// Run the full strategy-comparison experiment. Deconv reuses the Base
/// model of the same seed (its training is identical); evaluation rows
/// come out in deterministic (seed, strategy, room) order.
pub fn run_experiment(cfg: &RunConfig, banks: &Banks) -> Result<ExperimentOutput, PipelineError> {
    let started = Instant::now();
    let strategies = cfg.parsed_strategies()?;
    let dataset = synth_dataset(
        cfg.dataset.n_classes,
        cfg.dataset.clips_per_class,
        cfg.dataset.train_per_class,
        cfg.dataset.seed,
    )?;

    let test_clips: Vec<(usize, &AudioClip)> = dataset
        .test
        .iter()
        .map(|&i| (dataset.clips[i].0, &dataset.clips[i].1))
        .collect();
    let clean_set = PreparedTestSet::from_clean(&dataset)?;
    let mut rooms: Vec<RoomEval> = Vec::new();
    for room in banks.test.rooms() {
        let rirs = banks.test.room_rirs(&room.id).expect("room exists");
        let reverb = make_simulated_testset(
            &test_clips,
            &room.id,
            room.target_t60,
            rirs,
            cfg.eval_seed,
        )?;
        let prepared = PreparedTestSet::from_reverb(&reverb)?;
        let rir_feats: Result<Vec<Vec<f32>>, PipelineError> = rirs
            .iter()
            .map(|r| super::train::rir_clip_features(r.clip()))
            .collect();
        rooms.push(RoomEval {
            reverb,
            prepared,
            rir_feats: rir_feats?,
        });
    }
    let delta_feat = delta_features();

    let mut rows: Vec<ReportRow> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut models: Vec<TrainedEntry> = Vec::new();

    for &seed in &cfg.seeds {
        // Base and Deconv share one training run per seed.
        let mut base_outcome: Option<TrainOutcome> = None;
        if strategies.iter().any(|s| s.trains_like_base()) {
            match train_strategy(
                &dataset,
                Some(&banks.train),
                &cfg.strategy_config(Strategy::Base, seed)?,
            ) {
                Ok(out) => base_outcome = Some(out),
                Err(e) => failures.push(format!("base/seed {seed}: {e}")),
            }
        }

        for &strategy in &strategies {
            let owned: Option<TrainOutcome> = if strategy.trains_like_base() {
                None
            } else {
                match train_strategy(
                    &dataset,
                    Some(&banks.train),
                    &cfg.strategy_config(strategy, seed)?,
                ) {
                    Ok(out) => Some(out),
                    Err(e) => {
                        failures.push(format!("{}/seed {seed}: {e}", strategy.as_str()));
                        None
                    }
                }
            };
            let outcome = if strategy.trains_like_base() {
                base_outcome.as_ref()
            } else {
                owned.as_ref()
            };
            if let Some(outcome) = outcome {
                evaluate_strategy(
                    cfg,
                    banks,
                    strategy,
                    seed,
                    outcome,
                    &clean_set,
                    &test_clips,
                    &rooms,
                    &delta_feat,
                    &mut rows,
                )?;
            }
            if let Some(out) = owned {
                models.push(TrainedEntry {
                    strategy,
                    seed,
                    outcome: out,
                });
            }
        }
        if let Some(out) = base_outcome {
            models.push(TrainedEntry {
                strategy: Strategy::Base,
                seed,
                outcome: out,
            });
        }
    }

    let csv = render_csv(&rows);
    let manifest = RunManifest {
        schema_version: 1,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        train_bank_fingerprint: banks.train.fingerprint(),
        test_bank_fingerprint: banks.test.fingerprint(),
        n_rows: rows.len(),
        failures: failures.clone(),
    };
    Ok(ExperimentOutput {
        rows,
        failures,
        models,
        csv,
        manifest,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_strategy(
    cfg: &RunConfig,
    banks: &Banks,
    strategy: Strategy,
    seed: u64,
    outcome: &TrainOutcome,
    clean_set: &PreparedTestSet,
    test_clips: &[(usize, &AudioClip)],
    rooms: &[RoomEval],
    delta_feat: &[f32],
    rows: &mut Vec<ReportRow>,
) -> Result<(), PipelineError> {
    let model = &outcome.model;
    let selected_epoch = outcome.result.selected_epoch;
    let push = |rows: &mut Vec<ReportRow>, room_id: &str, t60: f64, group: &str, acc: f64| {
        rows.push(ReportRow {
            strategy: strategy.as_str().to_string(),
            room_id: room_id.to_string(),
            t60_s: t60,
            drr_group: group.to_string(),
            seed,
            accuracy: acc,
            selected_epoch,
        });
    };

    // Clean set.
    let clean_correct = match strategy {
        Strategy::Base | Strategy::Aug => {
            predict_correct(model, clean_set, CondPolicy::None, cfg.eval_seed)?
        }
        Strategy::Cndt => predict_correct(
            model,
            clean_set,
            CondPolicy::Fixed { feat: delta_feat },
            cfg.eval_seed,
        )?,
        Strategy::Deconv => {
            let identity_room = vec![crate::rir::unit_impulse(16_000, 16_000)];
            let clean_reverb =
                make_simulated_testset(test_clips, "clean", 0.0, &identity_room, cfg.eval_seed)?;
            evaluate_deconv(
                model,
                &clean_reverb,
                &identity_room,
                cfg.deconv_lambda,
                cfg.eval_seed,
            )?
        }
    };
    push(rows, "clean", 0.0, "all", accuracy(&clean_correct));

    // Simulated rooms, in bank order.
    for (room, eval) in banks.test.rooms().iter().zip(rooms) {
        let rirs = banks.test.room_rirs(&room.id).expect("room exists");
        let correct = match strategy {
            Strategy::Base | Strategy::Aug => {
                predict_correct(model, &eval.prepared, CondPolicy::None, cfg.eval_seed)?
            }
            Strategy::Cndt => predict_correct(
                model,
                &eval.prepared,
                CondPolicy::SameRoomOtherPoint {
                    room_feats: &eval.rir_feats,
                },
                cfg.eval_seed,
            )?,
            Strategy::Deconv => evaluate_deconv(
                model,
                &eval.reverb,
                rirs,
                cfg.deconv_lambda,
                cfg.eval_seed,
            )?,
        };
        push(rows, &room.id, room.target_t60, "all", accuracy(&correct));
        let drr = drr_group_eval(&correct, &eval.prepared, rirs)?;
        for (name, _count, acc) in &drr.groups {
            push(rows, &room.id, room.target_t60, name, *acc);
        }
    }
    Ok(())
}
