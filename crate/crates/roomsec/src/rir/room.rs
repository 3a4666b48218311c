use serde::{Deserialize, Serialize};

use super::RirError;

/// Required absorption above this is treated as unachievable; Eyring's
/// alpha approaches 1 only asymptotically, so the practical ceiling stands
/// in for "alpha >= 1".
const ALPHA_MAX: f64 = 0.9999;
/// Reflection coefficients are clamped below 1 so the image series decays.
const BETA_MAX: f64 = 0.999;

/// Shoebox room geometry with a target reverberation time and per-wall
/// reflection coefficients (order: x0, x1, y0, y1, z0, z1).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RoomSpec {
    pub id: String,
    pub dims: [f64; 3],
    pub target_t60: f64,
    pub beta: [f64; 6],
}

impl RoomSpec {
    /// Build a room whose uniform wall reflection coefficient is solved
    /// from the target T60 via Eyring's relation.
    pub fn from_t60(id: impl Into<String>, dims: [f64; 3], target_t60: f64) -> Result<Self, RirError> {
        let id = id.into();
        if dims.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(RirError::InvalidDims { room_id: id, dims });
        }
        if !(target_t60 > 0.0) || !target_t60.is_finite() {
            return Err(RirError::InvalidT60 {
                room_id: id,
                t60: target_t60,
            });
        }
        let beta = beta_from_t60(dims, target_t60)?;
        Ok(Self {
            id,
            dims,
            target_t60,
            beta: [beta; 6],
        })
    }

    /// Build a room with explicitly chosen wall coefficients; `target_t60`
    /// stays as a label only. Used for anechoic (beta = 0) setups.
    pub fn with_uniform_beta(
        id: impl Into<String>,
        dims: [f64; 3],
        target_t60: f64,
        beta: f64,
    ) -> Result<Self, RirError> {
        let id = id.into();
        if dims.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(RirError::InvalidDims { room_id: id, dims });
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(RirError::InvalidBeta(beta));
        }
        Ok(Self {
            id,
            dims,
            target_t60,
            beta: [beta; 6],
        })
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn diagonal(&self) -> f64 {
        self.dims.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// True when `pos` is at least `clearance` from every wall.
    pub fn contains(&self, pos: [f64; 3], clearance: f64) -> bool {
        pos.iter()
            .zip(&self.dims)
            .all(|(&p, &d)| p > clearance && p < d - clearance)
    }
}

/// Uniform wall reflection coefficient hitting a target T60 in a shoebox
/// room, via Eyring's relation `T60 = 0.161 V / (-S ln(1 - alpha))` and
/// `beta = sqrt(1 - alpha)`.
pub fn beta_from_t60(dims: [f64; 3], t60: f64) -> Result<f64, RirError> {
    let [x, y, z] = dims;
    let volume = x * y * z;
    let surface = 2.0 * (x * y + x * z + y * z);
    let alpha = 1.0 - (-0.161 * volume / (surface * t60)).exp();
    if alpha > ALPHA_MAX {
        return Err(RirError::UnachievableT60 { t60, alpha });
    }
    Ok((1.0 - alpha).sqrt().clamp(0.0, BETA_MAX))
}
