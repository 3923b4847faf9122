//! The common interface of all measure samplers.

use crate::error::Result;
use crate::field::{CellMask, DensityField};
use crate::grid::BAdicGrid;

/// One realization of a finite-level measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub field: DensityField,
    /// Cells left uncovered, for covering models.
    pub mask: Option<CellMask>,
}

pub trait MeasureSampler: Send + Sync {
    fn grid(&self) -> &BAdicGrid;

    /// Martingale level `m` of the final field.
    fn level(&self) -> u32;

    /// Builds one sample, calling `observe` on the field after each level
    /// `0..=level()` is complete.
    fn sample_levels(&self, master_seed: u64, sample_id: u64, observe: &mut dyn FnMut(&DensityField))
        -> Result<Sample>;

    fn sample(&self, master_seed: u64, sample_id: u64) -> Result<Sample> {
        self.sample_levels(master_seed, sample_id, &mut |_| {})
    }
}
