//! On-disk format: `<stem>.json` describes the grid and layout, `<stem>.bin`
//! holds the values as little-endian `f64`, channel-major, row-major with
//! axis 0 slowest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LatticeError, LatticeGrid, ScalarLatticeField, VectorLatticeField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub kind: String,
    pub grid: LatticeGrid,
    /// Channels for a scalar field, `D` for a vector field.
    pub components: usize,
    pub dtype: String,
    pub order: String,
    pub data: String,
}

const FORMAT: &str = "fieldlab-lattice/1";

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn write(stem: &Path, kind: &str, grid: &LatticeGrid, components: usize, values: &[f64]) -> Result<(), LatticeError> {
    let (json, bin) = paths(stem);
    let header = FieldHeader {
        format: FORMAT.into(),
        kind: kind.into(),
        grid: grid.clone(),
        components,
        dtype: "f64-le".into(),
        order: "component-major, then row-major with axis 0 (time) slowest".into(),
        data: bin.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    fs::write(&json, serde_json::to_string_pretty(&header)? + "\n")?;
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(bin, bytes)?;
    Ok(())
}

fn read(stem: &Path, kind: &str) -> Result<(FieldHeader, Vec<f64>), LatticeError> {
    let (json, _) = paths(stem);
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(&json)?)?;
    if header.format != FORMAT || header.kind != kind || header.dtype != "f64-le" {
        return Err(LatticeError::Shape(format!(
            "{} is a {} {} file, expected {FORMAT} {kind}",
            json.display(),
            header.format,
            header.kind
        )));
    }
    let bin = json.with_file_name(&header.data);
    let bytes = fs::read(bin)?;
    if bytes.len() % 8 != 0 {
        return Err(LatticeError::Length { expected: bytes.len() / 8 * 8, got: bytes.len() });
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((header, values))
}

pub fn write_scalar(f: &ScalarLatticeField, stem: &Path) -> Result<(), LatticeError> {
    write(stem, "scalar", f.grid(), f.channels(), f.values())
}

pub fn read_scalar(stem: &Path) -> Result<ScalarLatticeField, LatticeError> {
    let (h, v) = read(stem, "scalar")?;
    ScalarLatticeField::from_values(h.grid, h.components, v)
}

pub fn write_vector(j: &VectorLatticeField, stem: &Path) -> Result<(), LatticeError> {
    write(stem, "vector", j.grid(), j.grid().dim(), j.values())
}

pub fn read_vector(stem: &Path) -> Result<VectorLatticeField, LatticeError> {
    let (h, v) = read(stem, "vector")?;
    VectorLatticeField::from_values(h.grid, v)
}
