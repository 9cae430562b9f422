//! Checkpoint format: a JSON manifest describing the model (variant, config,
//! optional normalization statistics, and the named-tensor registry) next to
//! a flat little-endian f64 blob holding every parameter, integrity-checked
//! with SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NnError, Result};
use crate::model::{Model, ModelConfig, ModelVariant, TensorMeta};
use dti_core::NormalizationParams;

const FORMAT_TAG: &str = "dti-inpaint-checkpoint-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub variant: ModelVariant,
    pub config: ModelConfig,
    /// Z-score statistics fitted on the training set, if any were applied.
    pub normalization: Option<NormalizationParams>,
    pub entries: Vec<TensorMeta>,
    /// Blob file name, relative to the manifest's directory.
    pub blob_file: String,
    /// Lowercase hex SHA-256 of the blob bytes.
    pub blob_sha256: String,
}

#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub model: Model,
    pub normalization: Option<NormalizationParams>,
}

fn io_err(path: &Path, source: std::io::Error) -> NnError {
    NnError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn blob_path_for(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn params_to_le_bytes(params: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for v in params {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Writes `<path>` (JSON manifest) and `<path with .bin>` (parameter blob).
pub fn save_checkpoint(
    model: &Model,
    normalization: Option<&NormalizationParams>,
    manifest_path: &Path,
) -> Result<()> {
    let blob_path = blob_path_for(manifest_path);
    let blob = params_to_le_bytes(&model.params);
    let manifest = CheckpointManifest {
        format: FORMAT_TAG.to_string(),
        variant: model.variant,
        config: model.config.clone(),
        normalization: normalization.cloned(),
        entries: model.metas.clone(),
        blob_file: blob_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        blob_sha256: sha256_hex(&blob),
    };
    if let Some(dir) = manifest_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| NnError::Json {
        path: manifest_path.to_path_buf(),
        source: e,
    })?;
    fs::write(manifest_path, json).map_err(|e| io_err(manifest_path, e))?;
    fs::write(&blob_path, blob).map_err(|e| io_err(&blob_path, e))?;
    Ok(())
}

/// Reads a manifest + blob pair, rebuilds the model, and verifies the
/// registry layout, blob length, SHA-256, and parameter finiteness.
pub fn load_checkpoint(manifest_path: &Path) -> Result<LoadedCheckpoint> {
    let ck = |detail: String| NnError::Checkpoint {
        path: manifest_path.to_path_buf(),
        detail,
    };
    let json = fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&json).map_err(|e| NnError::Json {
        path: manifest_path.to_path_buf(),
        source: e,
    })?;
    if manifest.format != FORMAT_TAG {
        return Err(ck(format!(
            "unsupported format '{}' (expected '{FORMAT_TAG}')",
            manifest.format
        )));
    }

    let mut model = Model::build(manifest.variant, manifest.config.clone())?;
    if model.metas != manifest.entries {
        return Err(ck(
            "tensor registry does not match the declared variant/config".to_string(),
        ));
    }

    let blob_path = manifest_path
        .parent()
        .map(|d| d.join(&manifest.blob_file))
        .unwrap_or_else(|| PathBuf::from(&manifest.blob_file));
    let blob = fs::read(&blob_path).map_err(|e| io_err(&blob_path, e))?;
    let expected_len = model.params.len() * 8;
    if blob.len() != expected_len {
        return Err(ck(format!(
            "blob has {} bytes, expected {expected_len}",
            blob.len()
        )));
    }
    let digest = sha256_hex(&blob);
    if digest != manifest.blob_sha256 {
        return Err(ck(format!(
            "blob SHA-256 mismatch: manifest {} vs computed {digest}",
            manifest.blob_sha256
        )));
    }
    for (i, chunk) in blob.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !v.is_finite() {
            return Err(ck(format!("non-finite parameter at index {i}")));
        }
        model.params[i] = v;
    }
    Ok(LoadedCheckpoint {
        model,
        normalization: manifest.normalization,
    })
}
