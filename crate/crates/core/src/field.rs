//! Cell-valued densities of the finite-level measures.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::grid::BAdicGrid;

/// Density of `mu_m` against Lebesgue measure, one value per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: BAdicGrid,
    values: Vec<f64>,
    m: u32,
}

/// One multiplicative layer on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerValues {
    pub grid: BAdicGrid,
    pub values: Vec<f64>,
}

impl DensityField {
    /// The constant density 1 at level 0.
    pub fn unit(grid: BAdicGrid) -> Self {
        Self {
            grid,
            values: alloc::vec![1.0; grid.cell_count()],
            m: 0,
        }
    }

    pub fn from_values(grid: BAdicGrid, values: Vec<f64>, m: u32) -> Result<Self> {
        if values.len() != grid.cell_count() {
            bail!(
                Argument,
                "{} values for a grid of {} cells",
                values.len(),
                grid.cell_count()
            );
        }
        if m > grid.level() {
            bail!(Contract, "level {m} finer than grid level {}", grid.level());
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            bail!(Contract, "density value {v} is not a finite nonnegative number");
        }
        Ok(Self { grid, values, m })
    }

    pub fn grid(&self) -> &BAdicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    /// Pointwise product with a layer, one martingale level up.
    pub fn multiply_layer(&self, layer: &LayerValues) -> Result<Self> {
        let mut out = self.clone();
        out.multiply_layer_in_place(layer)?;
        Ok(out)
    }

    pub fn multiply_layer_in_place(&mut self, layer: &LayerValues) -> Result<()> {
        if layer.grid != self.grid {
            bail!(Argument, "layer grid does not match field grid");
        }
        if layer.values.len() != self.values.len() {
            bail!(Argument, "layer has {} values", layer.values.len());
        }
        if self.m >= self.grid.level() {
            bail!(
                Contract,
                "level {} would exceed grid level {}",
                self.m + 1,
                self.grid.level()
            );
        }
        if let Some(v) = layer.values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            bail!(Contract, "layer value {v} is not a finite nonnegative number");
        }
        for (x, w) in self.values.iter_mut().zip(&layer.values) {
            *x *= w;
        }
        self.m += 1;
        Ok(())
    }

    /// Riemann sum `b^{-dM} * sum(values)`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Measure of every level-`level` cell.
    pub fn cell_masses(&self, level: u32) -> Result<Vec<f64>> {
        let coarse = self.grid.coarsen(level)?;
        let map = self.grid.ancestor_map(level)?;
        let mut out = alloc::vec![0.0; coarse.cell_count()];
        for (v, c) in self.values.iter().zip(map) {
            out[c] += v;
        }
        let vol = self.grid.cell_volume();
        out.iter_mut().for_each(|x| *x *= vol);
        Ok(out)
    }

    /// Cell averages on the coarser grid.
    pub fn coarse_grain(&self, level: u32) -> Result<Self> {
        let coarse = self.grid.coarsen(level)?;
        let vol = coarse.cell_volume();
        let values = self.cell_masses(level)?.into_iter().map(|x| x / vol).collect();
        Ok(Self {
            grid: coarse,
            values,
            m: self.m.min(level),
        })
    }
}

/// A set of grid cells, stored one flag per cell in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    grid: BAdicGrid,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn new(grid: BAdicGrid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.cell_count() {
            bail!(Argument, "{} flags for {} cells", bits.len(), grid.cell_count());
        }
        Ok(Self { grid, bits })
    }

    pub fn full(grid: BAdicGrid) -> Self {
        Self {
            grid,
            bits: alloc::vec![true; grid.cell_count()],
        }
    }

    /// Cells where the density is positive.
    pub fn support_of(field: &DensityField) -> Self {
        Self {
            grid: field.grid,
            bits: field.values.iter().map(|v| *v > 0.0).collect(),
        }
    }

    pub fn grid(&self) -> &BAdicGrid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Number of level-`level` cells containing at least one marked cell.
    pub fn occupied(&self, level: u32) -> Result<usize> {
        let coarse = self.grid.coarsen(level)?;
        let map = self.grid.ancestor_map(level)?;
        let mut hit = alloc::vec![false; coarse.cell_count()];
        for (b, c) in self.bits.iter().zip(map) {
            if *b {
                hit[c] = true;
            }
        }
        Ok(hit.iter().filter(|b| **b).count())
    }
}
