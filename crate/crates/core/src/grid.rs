//! Regular b-adic lattices on `[0,1)^d`.

use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// Default ceiling on the number of cells a grid may hold.
pub const DEFAULT_CELL_BUDGET: u128 = 1 << 26;

/// The level-`M` partition of `[0,1)^d` into `b^{dM}` cubes of side `b^{-M}`.
///
/// Cells are addressed by 0-based multi-indices, flattened row-major with
/// the last axis varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BAdicGrid {
    d: usize,
    b: u32,
    level: u32,
    per_axis: usize,
    cells: usize,
}

impl BAdicGrid {
    pub fn new(d: usize, b: u32, level: u32) -> Result<Self> {
        Self::with_budget(d, b, level, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(d: usize, b: u32, level: u32, budget: u128) -> Result<Self> {
        if d == 0 {
            bail!(Argument, "dimension must be at least 1");
        }
        if b < 2 {
            bail!(Argument, "base must be at least 2, got {b}");
        }
        let mut cells: u128 = 1;
        for _ in 0..(d as u64 * level as u64) {
            cells = cells.saturating_mul(b as u128);
            if cells > budget {
                break;
            }
        }
        if cells > budget {
            return Err(Error::Resource {
                what: "grid cells",
                requested: cells,
                limit: budget,
            });
        }
        let per_axis = (b as usize).pow(level);
        Ok(Self {
            d,
            b,
            level,
            per_axis,
            cells: cells as usize,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells_per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.per_axis as f64
    }

    /// Lebesgue measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.cell_width(), self.d as f64)
    }

    pub fn flat_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.d {
            bail!(Argument, "index has {} axes, grid has {}", idx.len(), self.d);
        }
        let mut flat = 0usize;
        for &i in idx {
            if i >= self.per_axis {
                bail!(Argument, "index {i} out of range 0..{}", self.per_axis);
            }
            flat = flat * self.per_axis + i;
        }
        Ok(flat)
    }

    /// Writes the multi-index of `flat` into `out` (length `d`).
    pub fn multi_index_into(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = flat % self.per_axis;
            flat /= self.per_axis;
        }
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut out = alloc::vec![0; self.d];
        self.multi_index_into(flat, &mut out);
        out
    }

    /// The minimum vertex `idx / b^M` of a cell.
    pub fn min_vertex(&self, idx: &[usize]) -> Result<Vec<f64>> {
        self.flat_index(idx)?;
        let n = self.per_axis as f64;
        Ok(idx.iter().map(|&i| i as f64 / n).collect())
    }

    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        let n = self.per_axis as f64;
        idx.iter().map(|&i| (i as f64 + 0.5) / n).collect()
    }

    /// Same lattice geometry at a coarser level.
    pub fn coarsen(&self, level: u32) -> Result<Self> {
        if level > self.level {
            bail!(Argument, "cannot coarsen level {} to {level}", self.level);
        }
        Ok(Self {
            d: self.d,
            b: self.b,
            level,
            per_axis: (self.b as usize).pow(level),
            cells: (self.b as usize).pow(level * self.d as u32),
        })
    }

    /// Flat index of the level-`level` ancestor of every cell, in cell order.
    pub fn ancestor_map(&self, level: u32) -> Result<Vec<usize>> {
        let coarse = self.coarsen(level)?;
        let ratio = self.per_axis / coarse.per_axis;
        let mut idx = alloc::vec![0; self.d];
        let mut out = Vec::with_capacity(self.cells);
        for flat in 0..self.cells {
            self.multi_index_into(flat, &mut idx);
            let mut c = 0usize;
            for &i in idx.iter() {
                c = c * coarse.per_axis + i / ratio;
            }
            out.push(c);
        }
        Ok(out)
    }
}
