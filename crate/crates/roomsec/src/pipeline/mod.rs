//! Dataset synthesis, the four training strategies (Base, Deconv, Aug,
//! Cndt), evaluation protocols, and report emission.

mod augment;
pub mod config;
mod dataset;
mod deconv;
mod eval;
mod experiment;
mod report;
mod testset;
mod train;

pub use augment::{augment_epoch, AugmentedItem, RirRef};
pub use config::RunConfig;
pub use dataset::{load_wav_dataset, synth_dataset, EventDataset, LoadReport};
pub use deconv::{deconv_preprocess, snr_db};
pub use eval::{
    drr_group_eval, evaluate, evaluate_deconv, fake_conditioning_sweep, predict_correct,
    CondPolicy, DrrGroupReport, FakeCell, PreparedTestSet,
};
pub use experiment::{run_experiment, Banks, ExperimentOutput, TrainedEntry};
pub use report::{manifest_json, read_csv, render_csv, write_csv, ReportRow, RunManifest};
pub use testset::{make_simulated_testset, ReverbClip, ReverbTestSet};
pub use train::{train_strategy, Strategy, StrategyConfig, TrainOutcome, TrialResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0} has no usable clips")]
    EmptyClass(String),
    #[error("dataset root {0} is not a directory")]
    BadRoot(String),
    #[error("strategy {strategy} requires a RIR bank")]
    MissingBank { strategy: String },
    #[error("empty RIR list for room {0}")]
    EmptyRoom(String),
    #[error("room {0} has a single RIR; same-room-other-point policy needs at least 2")]
    SingleRir(String),
    #[error("conditioned model evaluated with policy `none`")]
    PolicyMismatch,
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("unknown strategy {0}")]
    UnknownStrategy(String),
    #[error("config: {0}")]
    Config(String),
    #[error("signal: {0}")]
    Signal(#[from] crate::signal::SignalError),
    #[error("features: {0}")]
    Feature(#[from] crate::features::FeatureError),
    #[error("rir: {0}")]
    Rir(#[from] crate::rir::RirError),
    #[error("acoustics: {0}")]
    Acoustics(#[from] crate::acoustics::AcousticsError),
    #[error("nn: {0}")]
    Nn(#[from] crate::nn::NnError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
