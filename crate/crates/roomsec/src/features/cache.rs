//! On-disk feature cache: a flat little-endian `f64` dump plus a JSON
//! sidecar holding the shape and the frontend-parameter fingerprint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, MelParams, MelSpec, SourceKind};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    shape: [usize; 3],
    params_hash: String,
    source_kinds: Vec<SourceKind>,
}

/// Write a batch of spectrograms to `<base>.bin` / `<base>.json`.
pub fn save_features(base: &Path, specs: &[MelSpec], params: &MelParams) -> Result<(), FeatureError> {
    let (n_mels, n_frames) = specs
        .first()
        .map(|s| s.shape())
        .unwrap_or((super::N_MELS, super::N_FRAMES));
    let mut bytes = Vec::with_capacity(specs.len() * n_mels * n_frames * 8);
    for spec in specs {
        if spec.shape() != (n_mels, n_frames) {
            return Err(FeatureError::Cache("mixed shapes in one cache".into()));
        }
        for v in spec.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(base.with_extension("bin"), bytes)?;
    let sidecar = Sidecar {
        shape: [specs.len(), n_mels, n_frames],
        params_hash: params.fingerprint(),
        source_kinds: specs.iter().map(|s| s.source_kind).collect(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialize");
    std::fs::write(base.with_extension("json"), json)?;
    Ok(())
}

/// Load a batch written by [`save_features`], verifying the parameter hash.
pub fn load_features(base: &Path, params: &MelParams) -> Result<Vec<MelSpec>, FeatureError> {
    let json = std::fs::read_to_string(base.with_extension("json"))?;
    let sidecar: Sidecar =
        serde_json::from_str(&json).map_err(|e| FeatureError::Cache(e.to_string()))?;
    if sidecar.params_hash != params.fingerprint() {
        return Err(FeatureError::Cache(format!(
            "parameter hash mismatch: cache {} vs current {}",
            sidecar.params_hash,
            params.fingerprint()
        )));
    }
    let [n, n_mels, n_frames] = sidecar.shape;
    let bytes = std::fs::read(base.with_extension("bin"))?;
    if bytes.len() != n * n_mels * n_frames * 8 || sidecar.source_kinds.len() != n {
        return Err(FeatureError::Cache("size mismatch with sidecar shape".into()));
    }
    let mut specs = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * n_mels * n_frames * 8;
        let values: Vec<f64> = bytes[start..start + n_mels * n_frames * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        specs.push(MelSpec::from_parts(
            values,
            n_mels,
            n_frames,
            sidecar.source_kinds[i],
        ));
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::mel_spectrogram;
    use crate::signal::AudioClip;

    #[test]
    fn round_trip_preserves_values_and_kinds() {
        let params = MelParams::default();
        let clip = AudioClip::new(
            (0..16_000).map(|i| (i as f64 * 0.07).sin() * 0.5).collect(),
            16_000,
        )
        .unwrap();
        let specs = vec![
            mel_spectrogram(&clip).unwrap(),
            mel_spectrogram(&clip).unwrap(),
        ];
        let base = std::env::temp_dir().join("roomsec_feature_cache_rt");
        save_features(&base, &specs, &params).unwrap();
        let loaded = load_features(&base, &params).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].values(), specs[0].values());
        assert_eq!(loaded[0].source_kind, SourceKind::Audio);
    }

    #[test]
    fn parameter_mismatch_is_detected() {
        let params = MelParams::default();
        let clip = AudioClip::new(vec![0.0; 16_000], 16_000).unwrap();
        let specs = vec![mel_spectrogram(&clip).unwrap()];
        let base = std::env::temp_dir().join("roomsec_feature_cache_mismatch");
        save_features(&base, &specs, &params).unwrap();
        let other = MelParams {
            f_max: 6_000.0,
            ..MelParams::default()
        };
        assert!(matches!(
            load_features(&base, &other),
            Err(FeatureError::Cache(_))
        ));
    }
}
