//! Model checkpoints: one versioned binary blob (parameter manifest with
//! names and shapes, little-endian values) plus a JSON metadata sidecar at
//! `<path>.json`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig};
use super::tensor::Scalar;
use super::NnError;

const MAGIC: &[u8; 8] = b"RSECKPT1";
const VERSION: u32 = 1;

/// Sidecar metadata written next to the blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub epoch: usize,
    pub val_loss: f64,
    pub strategy: String,
    pub seed: u64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".json");
    PathBuf::from(os)
}

/// Serialize model parameters, batch-norm running statistics and config.
pub fn save<T: Scalar>(
    path: &Path,
    model: &Model<T>,
    meta: &CheckpointMeta,
) -> Result<(), NnError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());

    let config_json =
        serde_json::to_vec(&model.config).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    buf.push(std::mem::size_of::<T>() as u8);

    let names = model.group_names();
    let groups = model.param_groups();
    let stats = model.bn_running_stats();
    buf.extend_from_slice(&((names.len() + stats.len()) as u32).to_le_bytes());
    let mut write_group = |name: &str, values: &[T]| {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            let bits = v.to_f64_();
            if std::mem::size_of::<T>() == 4 {
                buf.extend_from_slice(&(bits as f32).to_le_bytes());
            } else {
                buf.extend_from_slice(&bits.to_le_bytes());
            }
        }
    };
    for (name, group) in names.iter().zip(&groups) {
        write_group(name, group);
    }
    for (name, values) in &stats {
        write_group(name, values);
    }

    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    let meta_json =
        serde_json::to_string_pretty(meta).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    std::fs::write(sidecar_path(path), meta_json)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Read the config block only (used by `inspect` and mode validation).
pub fn peek_config(path: &Path) -> Result<(ModelConfig, usize), NnError> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(len)?)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let dtype = r.take(1)?[0] as usize;
    Ok((config, dtype))
}

/// Load a checkpoint saved with the same scalar width.
pub fn load<T: Scalar>(path: &Path) -> Result<(Model<T>, CheckpointMeta), NnError> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(len)?)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let dtype = r.take(1)?[0] as usize;
    if dtype != std::mem::size_of::<T>() {
        return Err(NnError::Checkpoint(format!(
            "scalar width mismatch: checkpoint has {dtype}-byte values"
        )));
    }

    let mut model = Model::<T>::new(config, 0);
    let n_groups = r.u32()? as usize;
    let expected_names = model.group_names();
    let mut stats: Vec<(String, Vec<T>)> = Vec::new();
    {
        let mut groups = model.param_groups_mut();
        if n_groups != expected_names.len() + 2 * 3 * super::model::POOL_STAGES {
            return Err(NnError::Checkpoint(format!(
                "unexpected group count {n_groups}"
            )));
        }
        for gi in 0..n_groups {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|e| NnError::Checkpoint(e.to_string()))?;
            let n_values = r.u64()? as usize;
            let raw = r.take(n_values * dtype)?;
            let values: Vec<T> = if dtype == 4 {
                raw.chunks_exact(4)
                    .map(|c| T::from_f64_(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                    .collect()
            } else {
                raw.chunks_exact(8)
                    .map(|c| T::from_f64_(f64::from_le_bytes(c.try_into().unwrap())))
                    .collect()
            };
            if gi < expected_names.len() {
                if name != expected_names[gi] || groups[gi].len() != values.len() {
                    return Err(NnError::Checkpoint(format!(
                        "group {gi} mismatch: {name} ({} values)",
                        values.len()
                    )));
                }
                groups[gi].copy_from_slice(&values);
            } else {
                stats.push((name, values));
            }
        }
    }
    model.set_bn_running_stats(&stats)?;

    let meta_json = std::fs::read_to_string(sidecar_path(path))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&meta_json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    Ok((model, meta))
}
