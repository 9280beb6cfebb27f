//! Volume file format.
//!
//! A volume on disk is a pair of files: a `<name>.vol.json` sidecar and a
//! raw payload. The sidecar holds `{dims, origin, voxel_kind, payload}`;
//! the payload is headerless little-endian data in x-fastest order
//! (4 bytes per voxel for both kinds). Round-trips are bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume, Volume, VolumeMeta, VoxelKind};

/// Suffix of the metadata sidecar file.
pub const VOLUME_SIDECAR_SUFFIX: &str = ".vol.json";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dims: [u64; 3],
    origin: [i64; 3],
    voxel_kind: String,
    payload: String,
}

/// Resolve a user-supplied path (sidecar path or bare stem) to the
/// sidecar path.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    if s.ends_with(VOLUME_SIDECAR_SUFFIX) {
        path.to_path_buf()
    } else {
        PathBuf::from(format!("{s}{VOLUME_SIDECAR_SUFFIX}"))
    }
}

fn stem_of(sidecar: &Path) -> PathBuf {
    let s = sidecar.to_string_lossy();
    PathBuf::from(s.trim_end_matches(VOLUME_SIDECAR_SUFFIX).to_string())
}

/// Write a volume as sidecar + raw payload. `path` may be the sidecar
/// path or a bare stem; `<stem>.vol.json` and `<stem>.raw` are produced.
pub fn save_volume(volume: &Volume, path: &Path) -> Result<()> {
    let sidecar = sidecar_path(path);
    let stem = stem_of(&sidecar);
    let payload_name = format!(
        "{}.raw",
        stem.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "volume".to_string())
    );
    let payload_path = stem.with_file_name(&payload_name);

    let (meta, bytes) = match volume {
        Volume::Label(v) => (&v.meta, encode_u32(&v.voxels)),
        Volume::Scalar(v) => (&v.meta, encode_f32(&v.voxels)),
    };
    let doc = Sidecar {
        dims: [meta.dims[0] as u64, meta.dims[1] as u64, meta.dims[2] as u64],
        origin: meta.origin,
        voxel_kind: meta.voxel_kind.name().to_string(),
        payload: payload_name,
    };

    fs::write(&payload_path, bytes).map_err(|e| Error::io(&payload_path, e))?;
    let json = serde_json::to_string_pretty(&doc).expect("sidecar serialization cannot fail");
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

/// Load a volume from its sidecar (or bare stem) path.
pub fn load_volume(path: &Path) -> Result<Volume> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let doc: Sidecar = serde_json::from_str(&text).map_err(|e| Error::MalformedSidecar {
        path: sidecar.clone(),
        reason: e.to_string(),
    })?;

    let kind = match doc.voxel_kind.as_str() {
        "label-u32" => VoxelKind::LabelU32,
        "scalar-f32" => VoxelKind::ScalarF32,
        other => return Err(Error::UnknownVoxelKind(other.to_string())),
    };
    if doc.dims.contains(&0) {
        return Err(Error::MalformedSidecar {
            path: sidecar,
            reason: format!("dims must all be >= 1, got {:?}", doc.dims),
        });
    }
    let dims = [doc.dims[0] as usize, doc.dims[1] as usize, doc.dims[2] as usize];
    let meta = VolumeMeta::new(dims, kind).with_origin(doc.origin);

    let payload_path = sidecar
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&doc.payload);
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let expected = meta.len() as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadLengthMismatch {
            path: payload_path,
            expected,
            actual: bytes.len() as u64,
        });
    }

    Ok(match kind {
        VoxelKind::LabelU32 => Volume::Label(LabelVolume::from_voxels(meta, decode_u32(&bytes))),
        VoxelKind::ScalarF32 => Volume::Scalar(ScalarVolume::from_voxels(meta, decode_f32(&bytes))),
    })
}

fn encode_u32(values: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn encode_f32(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_u32(bytes: &[u8]) -> Vec<u32> {
    bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}
