//! Shoebox-room impulse response synthesis and persisted RIR banks.

mod bank;
mod calibrate;
mod image_source;
pub mod presets;
mod room;

pub use bank::{bank_load, bank_save, generate_rir_bank, BankConfig, RirBank};
pub use calibrate::calibrate_uniform_beta;
pub use image_source::{simulate_rir, unit_impulse, Rir, SimConfig};
pub use room::{beta_from_t60, RoomSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RirError {
    #[error("room {room_id}: invalid dimensions {dims:?}")]
    InvalidDims { room_id: String, dims: [f64; 3] },
    #[error("room {room_id}: invalid target T60 {t60} s")]
    InvalidT60 { room_id: String, t60: f64 },
    #[error("room cannot achieve target T60 of {t60} s (required absorption {alpha:.6} out of range)")]
    UnachievableT60 { t60: f64, alpha: f64 },
    #[error("reflection coefficient {0} outside [0, 1)")]
    InvalidBeta(f64),
    #[error("position {pos:?} not strictly inside room of dims {dims:?} (clearance {clearance} m)")]
    PositionOutsideRoom {
        pos: [f64; 3],
        dims: [f64; 3],
        clearance: f64,
    },
    #[error("source and microphone positions coincide")]
    DegenerateGeometry,
    #[error("sample rate {0} Hz below the 8 kHz minimum")]
    SampleRateTooLow(u32),
    #[error("room {room_id} too small for {clearance} m wall clearance")]
    RoomTooSmall { room_id: String, clearance: f64 },
    #[error("room {room_id}: no source/mic placement satisfies the distance bounds")]
    PlacementFailed { room_id: String },
    #[error("bank references unknown room id {0}")]
    UnknownRoom(String),
    #[error("bank manifest at {0} lists no rooms")]
    EmptyBank(String),
    #[error("bank io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bank manifest {path}: {source}")]
    Manifest {
        path: String,
        source: serde_json::Error,
    },
    #[error("bank entry {index}: missing or unreadable file {file}: {detail}")]
    MissingRirFile {
        index: usize,
        file: String,
        detail: String,
    },
    #[error("signal error: {0}")]
    Signal(#[from] crate::signal::SignalError),
}
