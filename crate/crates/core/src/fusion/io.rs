//! Directory layout for slice stacks.
//!
//! A stack directory holds `stack.json` (volume meta plus per-axis map
//! counts) and one subdirectory per axis (`X/`, `Y/`, `Z/`) containing
//! the numbered slice maps as standard volumes of dims (w, h, 1).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::SliceStack;
use crate::volume::{load_volume, save_volume, Axis, LabelMap2d, LabelVolume, Volume, VolumeMeta, VoxelKind};

pub const STACK_MANIFEST_NAME: &str = "stack.json";

#[derive(Serialize, Deserialize)]
struct StackManifest {
    meta: VolumeMeta,
    axes: BTreeMap<String, usize>,
}

fn slice_stem(index: usize) -> String {
    format!("{index:05}")
}

/// Write `stack` under `dir` (created if missing).
pub fn save_stack(stack: &SliceStack, dir: &Path) -> Result<()> {
    stack.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = StackManifest {
        meta: stack.meta,
        axes: Axis::ALL
            .iter()
            .map(|a| (a.name().to_string(), stack.meta.dims[a.index()]))
            .collect(),
    };
    let manifest_path = dir.join(STACK_MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    for axis in Axis::ALL {
        let axis_dir = dir.join(axis.name());
        fs::create_dir_all(&axis_dir).map_err(|e| Error::io(&axis_dir, e))?;
        for (i, map) in stack.maps[axis.index()].iter().enumerate() {
            let meta = VolumeMeta::new([map.width, map.height, 1], VoxelKind::LabelU32);
            let volume = LabelVolume::from_voxels(meta, map.pixels.clone());
            save_volume(&Volume::Label(volume), &axis_dir.join(slice_stem(i)))?;
        }
    }
    Ok(())
}

/// Load a stack previously written by [`save_stack`].
pub fn load_stack(dir: &Path) -> Result<SliceStack> {
    let manifest_path = dir.join(STACK_MANIFEST_NAME);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: StackManifest =
        serde_json::from_str(&text).map_err(|e| Error::MalformedStack {
            path: manifest_path.clone(),
            reason: e.to_string(),
        })?;

    for axis in Axis::ALL {
        let expected = manifest.meta.dims[axis.index()];
        match manifest.axes.get(axis.name()) {
            Some(&n) if n == expected => {}
            Some(&n) => {
                return Err(Error::MalformedStack {
                    path: manifest_path,
                    reason: format!(
                        "axis {} declares {n} maps but meta dims call for {expected}",
                        axis.name()
                    ),
                })
            }
            None => {
                return Err(Error::MalformedStack {
                    path: manifest_path,
                    reason: format!("axis {} missing from axes table", axis.name()),
                })
            }
        }
    }

    let maps = Axis::ALL.map(|axis| -> Result<Vec<LabelMap2d>> {
        let (w, h) = manifest.meta.slice_dims(axis);
        let axis_dir = dir.join(axis.name());
        (0..manifest.meta.dims[axis.index()])
            .map(|i| {
                let path = axis_dir.join(slice_stem(i));
                let volume = load_volume(&path)?.into_label()?;
                if volume.meta.dims != [w, h, 1] {
                    return Err(Error::MalformedStack {
                        path,
                        reason: format!(
                            "slice map dims {:?} do not match expected [{w}, {h}, 1]",
                            volume.meta.dims
                        ),
                    });
                }
                Ok(LabelMap2d::from_pixels(w, h, volume.voxels))
            })
            .collect()
    });
    let [x, y, z] = maps;
    SliceStack::from_maps(manifest.meta, [x?, y?, z?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::stack_from_global_labels;
    use tempfile::tempdir;

    fn sample_stack() -> SliceStack {
        let mut volume = LabelVolume::zeros([4, 3, 2]);
        volume.set(1, 1, 0, 2);
        volume.set(2, 1, 0, 2);
        volume.set(3, 2, 1, 5);
        stack_from_global_labels(&volume)
    }

    #[test]
    fn stack_round_trips_through_directory() {
        let dir = tempdir().unwrap();
        let stack = sample_stack();
        save_stack(&stack, dir.path()).unwrap();
        let loaded = load_stack(dir.path()).unwrap();
        assert_eq!(loaded, stack);
    }

    #[test]
    fn missing_manifest_is_an_io_error() {
        let dir = tempdir().unwrap();
        assert!(matches!(load_stack(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn manifest_axis_count_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let stack = sample_stack();
        save_stack(&stack, dir.path()).unwrap();
        let manifest_path = dir.path().join(STACK_MANIFEST_NAME);
        let text = fs::read_to_string(&manifest_path).unwrap();
        let broken = text.replace("\"Z\": 2", "\"Z\": 7");
        fs::write(&manifest_path, broken).unwrap();
        assert!(matches!(
            load_stack(dir.path()),
            Err(Error::MalformedStack { .. })
        ));
    }

    #[test]
    fn slice_map_with_wrong_dims_is_rejected() {
        let dir = tempdir().unwrap();
        let stack = sample_stack();
        save_stack(&stack, dir.path()).unwrap();
        // Overwrite one Z map with a volume of the wrong shape.
        let bad = LabelVolume::zeros([9, 9, 1]);
        save_volume(
            &Volume::Label(bad),
            &dir.path().join("Z").join(slice_stem(0)),
        )
        .unwrap();
        assert!(matches!(
            load_stack(dir.path()),
            Err(Error::MalformedStack { .. })
        ));
    }
}
