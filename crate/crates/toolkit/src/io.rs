//! On-disk formats: raw little-endian fields and packed masks, each with a
//! JSON header next to the payload, plus JSON and CSV helpers.

use std::fs;
use std::path::{Path, PathBuf};

use mchaos_core::spectral::BandStat;
use mchaos_core::{BAdicGrid, CellMask, DensityField};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StageExt, ToolError};

pub const FIELD_FORMAT: &str = "mchaos-field";
pub const MASK_FORMAT: &str = "mchaos-mask";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayHeader {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub b: u32,
    pub grid_level: u32,
    /// Martingale level of the field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    pub cells: usize,
    /// `f64-le` for fields, `bits-lsb` for masks.
    pub encoding: String,
    /// Payload file name, relative to the header.
    pub data: String,
}

impl ArrayHeader {
    fn grid(&self) -> Result<BAdicGrid> {
        let g = BAdicGrid::new(self.d, self.b, self.grid_level).stage("read header")?;
        if g.cell_count() != self.cells {
            return Err(ToolError::Config(format!(
                "header says {} cells, grid has {}",
                self.cells,
                g.cell_count()
            )));
        }
        Ok(g)
    }
}

fn payload_name(header: &Path) -> Result<(PathBuf, String)> {
    let stem = header
        .file_stem()
        .ok_or_else(|| ToolError::Usage(format!("{} has no file name", header.display())))?;
    let name = format!("{}.bin", stem.to_string_lossy());
    Ok((header.with_file_name(&name), name))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(ToolError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(ToolError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(ToolError::io(path))?;
    serde_json::from_str(&text).map_err(ToolError::json(path))
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn write_field(header_path: &Path, field: &DensityField) -> Result<()> {
    let (bin, name) = payload_name(header_path)?;
    let g = field.grid();
    let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(ToolError::io(&bin))?;
    write_json(
        header_path,
        &ArrayHeader {
            format: FIELD_FORMAT.into(),
            version: 1,
            d: g.d(),
            b: g.b(),
            grid_level: g.level(),
            m: Some(field.level()),
            cells: g.cell_count(),
            encoding: "f64-le".into(),
            data: name,
        },
    )
}

pub fn read_field(header_path: &Path) -> Result<DensityField> {
    let h: ArrayHeader = read_json(header_path)?;
    if h.format != FIELD_FORMAT || h.encoding != "f64-le" {
        return Err(ToolError::Config(format!(
            "{} is not a field header",
            header_path.display()
        )));
    }
    let grid = h.grid()?;
    let bin = header_path.with_file_name(&h.data);
    let bytes = fs::read(&bin).map_err(ToolError::io(&bin))?;
    if bytes.len() != 8 * h.cells {
        return Err(ToolError::Config(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            8 * h.cells
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DensityField::from_values(grid, values, h.m.unwrap_or(0)).stage("read field")
}

pub fn write_mask(header_path: &Path, mask: &CellMask) -> Result<()> {
    let (bin, name) = payload_name(header_path)?;
    let g = mask.grid();
    let mut bytes = vec![0u8; g.cell_count().div_ceil(8)];
    for (i, b) in mask.bits().iter().enumerate() {
        if *b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    fs::write(&bin, bytes).map_err(ToolError::io(&bin))?;
    write_json(
        header_path,
        &ArrayHeader {
            format: MASK_FORMAT.into(),
            version: 1,
            d: g.d(),
            b: g.b(),
            grid_level: g.level(),
            m: None,
            cells: g.cell_count(),
            encoding: "bits-lsb".into(),
            data: name,
        },
    )
}

pub fn read_mask(header_path: &Path) -> Result<CellMask> {
    let h: ArrayHeader = read_json(header_path)?;
    if h.format != MASK_FORMAT || h.encoding != "bits-lsb" {
        return Err(ToolError::Config(format!(
            "{} is not a mask header",
            header_path.display()
        )));
    }
    let grid = h.grid()?;
    let bin = header_path.with_file_name(&h.data);
    let bytes = fs::read(&bin).map_err(ToolError::io(&bin))?;
    if bytes.len() != h.cells.div_ceil(8) {
        return Err(ToolError::Config(format!("{} has the wrong size", bin.display())));
    }
    let bits = (0..h.cells).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
    CellMask::new(grid, bits).stage("read mask")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub band: u32,
    pub log_freq: f64,
    pub log_stat: f64,
    pub n_points: usize,
}

impl From<&BandStat> for BandRow {
    fn from(s: &BandStat) -> Self {
        Self {
            band: s.band,
            log_freq: s.mean_log_norm,
            log_stat: s.mean_log_power,
            n_points: s.resolved,
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(ToolError::io(path))
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| ToolError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
