//! Parallel evaluation over sample ids with results in id order.

use mchaos_core::{MeasureSampler, Sample};
use rayon::prelude::*;

use crate::error::{Result, StageExt, ToolError};

/// Thread count from a flag, else the machine's parallelism.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Draws samples `0..samples` and applies `f` to each, in parallel. The
/// output is ordered by sample id; on failure the error of the lowest
/// failing id is returned.
pub fn map_samples<T, F>(
    sampler: &dyn MeasureSampler,
    master_seed: u64,
    samples: u64,
    threads: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, Sample) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ToolError::Usage(format!("thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..samples)
            .into_par_iter()
            .map(|id| {
                let s = sampler.sample(master_seed, id).stage("sample")?;
                f(id, s)
            })
            .collect()
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mchaos_core::gaussian::{GmcConfig, GmcSampler};
    use mchaos_core::kernels::{ExpBump, KernelKind};

    #[test]
    fn order_independent_of_threads() {
        let g = GmcSampler::new(&GmcConfig {
            gamma: 0.5,
            d: 1,
            b: 2,
            m: 6,
            grid_level: 6,
            kernel: KernelKind::ExactLog,
            bump: ExpBump::default(),
        })
        .unwrap();
        let one = map_samples(&g, 3, 16, 1, |id, s| Ok((id, s.field.total_mass()))).unwrap();
        let four = map_samples(&g, 3, 16, 4, |id, s| Ok((id, s.field.total_mass()))).unwrap();
        assert_eq!(one, four);
        assert!(one.iter().enumerate().all(|(i, r)| r.0 == i as u64));
    }
}
