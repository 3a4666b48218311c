use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{simulate_rir, Rir, RirError, RoomSpec, SimConfig};
use crate::acoustics::AcousticMetrics;
use crate::exec;
use crate::signal::wav;
use crate::signal::AudioClip;
use crate::util;

/// Placement and synthesis parameters for bank generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankConfig {
    pub sample_rate: u32,
    /// Minimum distance of source and mic from every wall, meters.
    pub clearance_m: f64,
    /// Minimum source-mic distance, meters. The maximum is half the room
    /// diagonal.
    pub min_distance_m: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            clearance_m: 0.5,
            min_distance_m: 0.5,
        }
    }
}

/// A generated set of RIRs, grouped per room, reproducible from its seed.
#[derive(Debug, Clone)]
pub struct RirBank {
    sample_rate: u32,
    seed: u64,
    rooms: Vec<RoomSpec>,
    rirs_by_room: Vec<Vec<Rir>>,
}

impl RirBank {
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rooms(&self) -> &[RoomSpec] {
        &self.rooms
    }

    pub fn room_index(&self, room_id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == room_id)
    }

    pub fn room(&self, room_id: &str) -> Option<&RoomSpec> {
        self.rooms.iter().find(|r| r.id == room_id)
    }

    /// RIRs of one room, in generation order.
    pub fn room_rirs(&self, room_id: &str) -> Option<&[Rir]> {
        self.room_index(room_id)
            .map(|i| self.rirs_by_room[i].as_slice())
    }

    pub fn rirs_of(&self, room_index: usize) -> &[Rir] {
        &self.rirs_by_room[room_index]
    }

    /// Total number of RIRs across all rooms.
    pub fn len(&self) -> usize {
        self.rirs_by_room.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat iterator over all RIRs in room order.
    pub fn iter(&self) -> impl Iterator<Item = &Rir> {
        self.rirs_by_room.iter().flatten()
    }

    /// Flat RIR lookup: room order, then generation order within the room.
    pub fn flat(&self, index: usize) -> &Rir {
        let mut i = index;
        for room in &self.rirs_by_room {
            if i < room.len() {
                return &room[i];
            }
            i -= room.len();
        }
        panic!("flat RIR index {index} out of range");
    }

    fn manifest(&self) -> BankManifest {
        let mut rirs = Vec::with_capacity(self.len());
        for (room_idx, room) in self.rooms.iter().enumerate() {
            for (i, rir) in self.rirs_by_room[room_idx].iter().enumerate() {
                let metrics = rir.metrics();
                rirs.push(RirEntry {
                    room_id: room.id.clone(),
                    source_pos: rir.source_pos(),
                    mic_pos: rir.mic_pos(),
                    file: format!("rirs/{}_{:03}.wav", room.id, i),
                    t60_s: metrics.map(|m| m.t60_s),
                    drr_db: metrics.and_then(|m| m.drr_db.is_finite().then_some(m.drr_db)),
                    decay_fit_r2: metrics.map(|m| m.decay_fit_r2),
                });
            }
        }
        BankManifest {
            sample_rate: self.sample_rate,
            seed: self.seed,
            rooms: self.rooms.clone(),
            rirs,
        }
    }

    /// Stable fingerprint of the manifest (rooms, positions, metrics).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&self.manifest()).expect("manifest is serializable");
        util::fingerprint(json.as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
struct BankManifest {
    sample_rate: u32,
    seed: u64,
    rooms: Vec<RoomSpec>,
    rirs: Vec<RirEntry>,
}

/// One RIR in the on-disk manifest. `drr_db: None` encodes an infinite
/// (all-direct) DRR; absent metrics are recomputed on load.
#[derive(Serialize, Deserialize)]
struct RirEntry {
    room_id: String,
    source_pos: [f64; 3],
    mic_pos: [f64; 3],
    file: String,
    #[serde(default)]
    t60_s: Option<f64>,
    #[serde(default)]
    drr_db: Option<f64>,
    #[serde(default)]
    decay_fit_r2: Option<f64>,
}

/// Generate `n_per_room` RIRs per room at uniformly random source/mic
/// placements (wall clearance and distance bounds from `cfg`).
/// Deterministic in `seed`: every placement draws from a stream derived
/// from (seed, room, index), so the result is independent of thread count.
///
/// Samples are rounded to f32 precision so that the float-WAV round trip
/// through [`bank_save`]/[`bank_load`] is exact.
pub fn generate_rir_bank(
    rooms: &[RoomSpec],
    n_per_room: usize,
    seed: u64,
    cfg: &BankConfig,
) -> Result<RirBank, RirError> {
    assert!(n_per_room >= 1, "n_per_room must be at least 1");
    let sim = SimConfig {
        sample_rate: cfg.sample_rate,
        ..SimConfig::default()
    };

    for room in rooms {
        let usable = room
            .dims
            .iter()
            .all(|&d| d > 2.0 * cfg.clearance_m);
        if !usable || room.diagonal() / 2.0 < cfg.min_distance_m {
            return Err(RirError::RoomTooSmall {
                room_id: room.id.clone(),
                clearance: cfg.clearance_m,
            });
        }
    }

    let tasks: Vec<(usize, usize)> = (0..rooms.len())
        .flat_map(|r| (0..n_per_room).map(move |i| (r, i)))
        .collect();
    let results: Vec<Result<Rir, RirError>> = exec::par_map(&tasks, |&(room_idx, rir_idx)| {
        let room = &rooms[room_idx];
        let mut rng = util::derived_rng(
            seed,
            &[util::tag("bank"), room_idx as u64, rir_idx as u64],
        );
        let (src, mic) =
            super::calibrate::sample_placement(room, cfg.clearance_m, cfg.min_distance_m, &mut rng)
                .ok_or_else(|| RirError::PlacementFailed {
                    room_id: room.id.clone(),
                })?;
        let rir = simulate_rir(room, src, mic, &sim)?;
        let samples: Vec<f64> = rir
            .clip()
            .samples()
            .iter()
            .map(|&s| s as f32 as f64)
            .collect();
        let mut rir = Rir::new(
            AudioClip::from_parts(samples, cfg.sample_rate),
            room.id.clone(),
            src,
            mic,
        );
        rir.ensure_metrics();
        Ok(rir)
    });

    let mut rirs_by_room: Vec<Vec<Rir>> = vec![Vec::with_capacity(n_per_room); rooms.len()];
    for ((room_idx, _), result) in tasks.into_iter().zip(results) {
        rirs_by_room[room_idx].push(result?);
    }
    Ok(RirBank {
        sample_rate: cfg.sample_rate,
        seed,
        rooms: rooms.to_vec(),
        rirs_by_room,
    })
}

/// Write a bank as float-WAV files plus a JSON manifest under `dir`.
pub fn bank_save(bank: &RirBank, dir: &Path) -> Result<(), RirError> {
    std::fs::create_dir_all(dir.join("rirs"))?;
    let manifest = bank.manifest();
    for (entry, rir) in manifest.rirs.iter().zip(bank.iter()) {
        wav::write(&dir.join(&entry.file), rir.clip(), wav::SampleFormat::Float32)
            .map_err(crate::signal::SignalError::Wav)?;
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Load a bank saved by [`bank_save`]. Metrics stored in the manifest are
/// kept; missing ones are recomputed from the samples.
pub fn bank_load(dir: &Path) -> Result<RirBank, RirError> {
    let manifest_path = dir.join("manifest.json");
    let json = std::fs::read_to_string(&manifest_path)?;
    let manifest: BankManifest =
        serde_json::from_str(&json).map_err(|source| RirError::Manifest {
            path: manifest_path.display().to_string(),
            source,
        })?;
    if manifest.rooms.is_empty() {
        return Err(RirError::EmptyBank(dir.display().to_string()));
    }

    let mut rirs_by_room: Vec<Vec<Rir>> = vec![Vec::new(); manifest.rooms.len()];
    for (index, entry) in manifest.rirs.iter().enumerate() {
        let room_idx = manifest
            .rooms
            .iter()
            .position(|r| r.id == entry.room_id)
            .ok_or_else(|| RirError::UnknownRoom(entry.room_id.clone()))?;
        let clip = wav::read(&dir.join(&entry.file)).map_err(|e| RirError::MissingRirFile {
            index,
            file: entry.file.clone(),
            detail: e.to_string(),
        })?;
        let mut rir = Rir::new(clip, entry.room_id.clone(), entry.source_pos, entry.mic_pos);
        match (entry.t60_s, entry.decay_fit_r2) {
            (Some(t60_s), Some(decay_fit_r2)) => rir.set_metrics(AcousticMetrics {
                t60_s,
                drr_db: entry.drr_db.unwrap_or(f64::INFINITY),
                decay_fit_r2,
            }),
            _ => {
                rir.ensure_metrics();
            }
        }
        rirs_by_room[room_idx].push(rir);
    }
    Ok(RirBank {
        sample_rate: manifest.sample_rate,
        seed: manifest.seed,
        rooms: manifest.rooms,
        rirs_by_room,
    })
}
