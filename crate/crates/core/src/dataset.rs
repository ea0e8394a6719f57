//! Binary dataset export and import.
//!
//! A dataset directory holds `manifest.json` and one subdirectory per
//! scenario with four blobs:
//!
//! | file            | element          | layout                    |
//! |-----------------|------------------|---------------------------|
//! | `occupancy.u8`  | u8 0/1           | row-major (row, col)      |
//! | `radio_map.f32` | f32 LE, mW       | row-major (row, col, dir) |
//! | `scaled_map.f32`| f32 LE, [0, 1]   | row-major (row, col, dir) |
//! | `mask.u8`       | u8 0/1           | row-major (row, col)      |
//!
//! Tensors are held as f64 in memory and quantized to f32 on export.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::BeamConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, OccupancyGrid, Tensor3};
use crate::propagation::{RadioConfig, RadioMap, ScaledRadioMap, ScalingSpec};
use crate::sampling::{SensorMask, SensorPlacement};
use crate::scenario::{GridSpec, ScenarioClass};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Identity of one scenario inside a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub index: usize,
    pub class: Option<ScenarioClass>,
    pub seed: u64,
    pub n_obstacles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub info: SceneInfo,
    pub occupancy: OccupancyGrid,
    pub radio: RadioMap,
    pub scaled: ScaledRadioMap,
    pub mask: SensorMask,
}

/// Run-level fields written into the manifest alongside the scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFields {
    pub master_seed: u64,
    pub sampling_rate: f64,
    pub sensor_placement: SensorPlacement,
    pub grid: GridSpec,
    pub beams: BeamConfig,
    pub radio: RadioConfig,
    pub scaling: ScalingSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneFiles {
    pub occupancy: BlobRef,
    pub radio_map: BlobRef,
    pub scaled_map: BlobRef,
    pub mask: BlobRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub info: SceneInfo,
    pub files: SceneFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub generator: String,
    #[serde(flatten)]
    pub fields: ManifestFields,
    pub n_scenarios: usize,
    pub scenarios: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Dataset(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        if m.n_scenarios != m.scenarios.len() {
            return Err(Error::Dataset(format!(
                "manifest declares {} scenarios but lists {}",
                m.n_scenarios,
                m.scenarios.len()
            )));
        }
        Ok(m)
    }
}

fn f32_bytes(t: &Tensor3) -> Vec<u8> {
    t.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

fn f32_tensor(bytes: &[u8], rows: usize, cols: usize, dirs: usize) -> Result<Tensor3> {
    let data = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Tensor3::from_vec(rows, cols, dirs, data)
}

fn write_blob(root: &Path, rel: String, bytes: &[u8]) -> Result<BlobRef> {
    let full = root.join(&rel);
    if let Some(parent) = full.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&full, bytes)?;
    Ok(BlobRef {
        path: rel,
        bytes: bytes.len() as u64,
    })
}

/// Writes every scenario and the manifest under `dir`, creating it if needed.
pub fn export_dataset(scenes: &[SceneRecord], dir: &Path, fields: ManifestFields) -> Result<DatasetManifest> {
    let (rows, cols, dirs) = (fields.grid.n_rows, fields.grid.n_cols, fields.beams.n_beams);
    for s in scenes {
        if s.radio.shape() != (rows, cols, dirs) || s.scaled.shape() != (rows, cols, dirs) {
            return Err(Error::shape(format!(
                "scenario {}: tensors are {:?}/{:?}, manifest expects ({rows}, {cols}, {dirs})",
                s.info.index,
                s.radio.shape(),
                s.scaled.shape()
            )));
        }
        if (s.occupancy.rows(), s.occupancy.cols()) != (rows, cols)
            || (s.mask.cells().rows(), s.mask.cells().cols()) != (rows, cols)
        {
            return Err(Error::shape(format!(
                "scenario {}: occupancy or mask is not {rows}x{cols}",
                s.info.index
            )));
        }
    }
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(scenes.len());
    for s in scenes {
        let sub = format!("scene_{:05}", s.info.index);
        let files = SceneFiles {
            occupancy: write_blob(dir, format!("{sub}/occupancy.u8"), s.occupancy.as_slice())?,
            radio_map: write_blob(dir, format!("{sub}/radio_map.f32"), &f32_bytes(&s.radio))?,
            scaled_map: write_blob(dir, format!("{sub}/scaled_map.f32"), &f32_bytes(&s.scaled))?,
            mask: write_blob(dir, format!("{sub}/mask.u8"), s.mask.cells().as_slice())?,
        };
        entries.push(ManifestEntry { info: s.info, files });
    }
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        generator: format!("thzmap {}", env!("CARGO_PKG_VERSION")),
        fields,
        n_scenarios: entries.len(),
        scenarios: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

fn read_blob(root: &Path, blob: &BlobRef, scene: usize, expected: u64) -> Result<Vec<u8>> {
    if blob.bytes != expected {
        return Err(Error::Dataset(format!(
            "scenario {scene}: {} declares {} bytes, shape needs {expected}",
            blob.path, blob.bytes
        )));
    }
    let full: PathBuf = root.join(&blob.path);
    let bytes = fs::read(&full).map_err(|e| {
        Error::Dataset(format!("scenario {scene}: cannot read blob {}: {e}", blob.path))
    })?;
    if bytes.len() as u64 != blob.bytes {
        return Err(Error::Dataset(format!(
            "scenario {scene}: blob {} has {} bytes, manifest declares {}",
            blob.path,
            bytes.len(),
            blob.bytes
        )));
    }
    Ok(bytes)
}

fn binary_grid(bytes: Vec<u8>, rows: usize, cols: usize, scene: usize, what: &str) -> Result<Grid<u8>> {
    let g = Grid::from_vec(rows, cols, bytes)?;
    if !g.is_binary() {
        return Err(Error::Dataset(format!("scenario {scene}: {what} is not 0/1")));
    }
    Ok(g)
}

/// Reads a dataset written by [`export_dataset`], verifying every blob.
pub fn import_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<SceneRecord>)> {
    let manifest = DatasetManifest::load(dir)?;
    let (rows, cols) = (manifest.fields.grid.n_rows, manifest.fields.grid.n_cols);
    let dirs = manifest.fields.beams.n_beams;
    let cells = (rows * cols) as u64;
    let floats = cells * dirs as u64 * 4;
    let mut scenes = Vec::with_capacity(manifest.scenarios.len());
    for entry in &manifest.scenarios {
        let i = entry.info.index;
        let f = &entry.files;
        let occupancy = binary_grid(read_blob(dir, &f.occupancy, i, cells)?, rows, cols, i, "occupancy")?;
        let mask = binary_grid(read_blob(dir, &f.mask, i, cells)?, rows, cols, i, "mask")?;
        let radio = f32_tensor(&read_blob(dir, &f.radio_map, i, floats)?, rows, cols, dirs)?;
        let scaled = f32_tensor(&read_blob(dir, &f.scaled_map, i, floats)?, rows, cols, dirs)?;
        scenes.push(SceneRecord {
            info: entry.info,
            occupancy,
            radio: RadioMap(radio),
            scaled: ScaledRadioMap(scaled),
            mask: SensorMask::from_cells(mask)?,
        });
    }
    Ok((manifest, scenes))
}

/// Writes a tensor as raw little-endian f32.
pub fn write_tensor_f32(path: &Path, t: &Tensor3) -> Result<()> {
    fs::write(path, f32_bytes(t))?;
    Ok(())
}

pub fn read_tensor_f32(path: &Path, rows: usize, cols: usize, dirs: usize) -> Result<Tensor3> {
    let bytes = fs::read(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    if bytes.len() != rows * cols * dirs * 4 {
        return Err(Error::shape(format!(
            "{} has {} bytes, expected {rows}x{cols}x{dirs} f32",
            path.display(),
            bytes.len()
        )));
    }
    f32_tensor(&bytes, rows, cols, dirs)
}

/// Reads a raw 0/1 byte grid.
pub fn read_binary_grid(path: &Path, rows: usize, cols: usize) -> Result<Grid<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    if bytes.len() != rows * cols {
        return Err(Error::shape(format!(
            "{} has {} bytes, expected {rows}x{cols}",
            path.display(),
            bytes.len()
        )));
    }
    let g = Grid::from_vec(rows, cols, bytes)?;
    if !g.is_binary() {
        return Err(Error::Dataset(format!("{} is not 0/1", path.display())));
    }
    Ok(g)
}

/// Rounds every tensor entry through f32, giving the values an export/import
/// cycle reproduces exactly.
pub fn quantize(t: &Tensor3) -> Tensor3 {
    t.map(|&v| f64::from(v as f32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_scene(index: usize) -> SceneRecord {
        let occ = Grid::from_fn(2, 3, |r, c| u8::from(r == 0 && c == index % 3));
        let radio = Tensor3::from_vec(2, 3, 2, (0..12).map(|i| 1e-9 + i as f64 * 1.1e-7).collect()).unwrap();
        let scaled = radio.map(|v| (v * 1e5).min(1.0));
        SceneRecord {
            info: SceneInfo {
                index,
                class: Some(ScenarioClass::S1),
                seed: 100 + index as u64,
                n_obstacles: 1,
            },
            occupancy: occ,
            radio: RadioMap(radio),
            scaled: ScaledRadioMap(scaled),
            mask: SensorMask::from_cells(Grid::from_vec(2, 3, vec![1, 0, 0, 0, 1, 1]).unwrap()).unwrap(),
        }
    }

    fn fields() -> ManifestFields {
        ManifestFields {
            master_seed: 5,
            sampling_rate: 0.5,
            sensor_placement: SensorPlacement::AnyCell,
            grid: GridSpec::new(2.0, 3.0, 2, 3).unwrap(),
            beams: BeamConfig {
                n_beams: 2,
                angular_sep_deg: 180.0,
                beamwidth_deg: 180.0,
            },
            radio: RadioConfig::default(),
            scaling: ScalingSpec::new(0.05, 0.9, -90.0, 10.0).unwrap(),
        }
    }

    #[test]
    fn round_trip_and_missing_blob() {
        let dir = tempfile::tempdir().unwrap();
        let scenes: Vec<_> = (0..3).map(tiny_scene).collect();
        let manifest = export_dataset(&scenes, dir.path(), fields()).unwrap();
        let (back_manifest, back) = import_dataset(dir.path()).unwrap();
        assert_eq!(back_manifest, manifest);
        for (a, b) in scenes.iter().zip(&back) {
            assert_eq!(a.occupancy, b.occupancy);
            assert_eq!(a.mask, b.mask);
            assert_eq!(quantize(&a.radio), b.radio.0);
            assert_eq!(quantize(&a.scaled), b.scaled.0);
        }
        fs::remove_file(dir.path().join("scene_00001/mask.u8")).unwrap();
        let err = import_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("scenario 1"), "{err}");
    }

    #[test]
    fn inconsistent_shapes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = tiny_scene(0);
        s.scaled = ScaledRadioMap(Tensor3::filled(2, 3, 3, 0.1));
        assert!(matches!(export_dataset(&[s], dir.path(), fields()), Err(Error::Shape(_))));
    }
}
