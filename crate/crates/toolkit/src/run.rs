//! The `run` pipeline: sample, estimate, predict, record.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mchaos_core::spectral::{
    box_dim_mask, correlation_dim, ensemble_band_statistics, estimate_fourier_dim, fourier_coefficients,
    DimensionEstimate, FourierSpectrum,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{default_levels, EstimatorConfig, ExperimentConfig};
use crate::ensemble::map_samples;
use crate::error::{Result, StageExt, ToolError};
use crate::io::{write_csv, write_json, BandRow};
use crate::models::{self, Prediction};

pub const RECORD_FILE: &str = "record.json";
pub const BANDS_FILE: &str = "bands.csv";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub id: u64,
    pub total_mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncovered_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub estimator: String,
    pub tolerance: f64,
    /// Samples that entered the estimate.
    pub samples_used: u64,
    pub estimate: DimensionEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub toolkit_version: String,
    /// SHA-256 of the canonical config JSON, hex encoded.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub samples: Vec<SampleSummary>,
    pub mass: MassSummary,
    pub estimates: Vec<EstimateRecord>,
    pub predictions: Vec<Prediction>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

pub struct RunOutput {
    pub record: RunRecord,
    pub bands: Vec<BandRow>,
    pub timing: Timing,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

struct PerSample {
    summary: SampleSummary,
    spectrum: Option<FourierSpectrum>,
    corr: Option<DimensionEstimate>,
    boxdim: Option<DimensionEstimate>,
}

fn mean_stderr(xs: &[f64]) -> MassSummary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    MassSummary {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// Runs the experiment in memory. The record does not depend on `threads`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutput> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.output = None;
    cfg.validate()?;
    let model = models::build(&cfg)?;
    let grid = *model.sampler.grid();
    let level = grid.level();
    let n_max = grid.cells_per_axis() / 2;

    let want_fourier = cfg
        .estimators
        .iter()
        .any(|e| matches!(e, EstimatorConfig::Fourier { .. }));
    let corr_levels = cfg.estimators.iter().find_map(|e| match e {
        EstimatorConfig::Corrdim { levels, .. } => Some(levels.clone().unwrap_or_else(|| default_levels(level))),
        _ => None,
    });
    let box_levels = cfg.estimators.iter().find_map(|e| match e {
        EstimatorConfig::Boxdim { levels, .. } => Some(levels.clone().unwrap_or_else(|| default_levels(level))),
        _ => None,
    });

    let per = map_samples(
        model.sampler.as_ref(),
        cfg.ensemble.master_seed,
        cfg.ensemble.samples,
        threads,
        |id, s| {
            let total_mass = s.field.total_mass();
            let uncovered_fraction = s.mask.as_ref().map(|m| m.count() as f64 / grid.cell_count() as f64);
            let spectrum = if want_fourier {
                Some(fourier_coefficients(&s.field, n_max).stage("fourier")?)
            } else {
                None
            };
            // a null measure has no correlation dimension
            let corr = match &corr_levels {
                Some(l) if total_mass > 0.0 => Some(correlation_dim(&s.field, l).stage("corrdim")?),
                _ => None,
            };
            let boxdim = match (&box_levels, &s.mask) {
                (Some(l), Some(mask)) => Some(box_dim_mask(mask, l).stage("boxdim")?),
                _ => None,
            };
            Ok(PerSample {
                summary: SampleSummary {
                    id,
                    total_mass,
                    uncovered_fraction,
                },
                spectrum,
                corr,
                boxdim,
            })
        },
    )?;

    let masses: Vec<f64> = per.iter().map(|p| p.summary.total_mass).collect();
    let mass = mean_stderr(&masses);
    let spectra: Vec<FourierSpectrum> = per.iter().filter_map(|p| p.spectrum.clone()).collect();

    let mut estimates = Vec::new();
    let mut bands = Vec::new();
    for e in &cfg.estimators {
        let (estimate, used) = match e {
            EstimatorConfig::Fourier { mode, trim, .. } => {
                let est = estimate_fourier_dim(&spectra, grid.b(), *mode, trim.unwrap_or_default()).stage("fourier")?;
                (est, spectra.len() as u64)
            }
            EstimatorConfig::Corrdim { .. } => {
                let each: Vec<_> = per.iter().filter_map(|p| p.corr.clone()).collect();
                if each.is_empty() {
                    return Err(ToolError::Stage {
                        stage: "corrdim",
                        source: mchaos_core::Error::Numeric("every sample is a null measure".into()),
                    });
                }
                (DimensionEstimate::aggregate(&each).stage("corrdim")?, each.len() as u64)
            }
            EstimatorConfig::Boxdim { .. } => {
                let each: Vec<_> = per
                    .iter()
                    .filter_map(|p| p.boxdim.clone())
                    .filter(|e| !e.degenerate)
                    .collect();
                if each.is_empty() {
                    return Err(ToolError::Stage {
                        stage: "boxdim",
                        source: mchaos_core::Error::Numeric("every sample is fully covered".into()),
                    });
                }
                (DimensionEstimate::aggregate(&each).stage("boxdim")?, each.len() as u64)
            }
        };
        estimates.push(EstimateRecord {
            estimator: e.name(),
            tolerance: e.tolerance(),
            samples_used: used,
            estimate,
        });
    }
    if want_fourier {
        bands = ensemble_band_statistics(&spectra, grid.b())
            .stage("fourier")?
            .iter()
            .map(BandRow::from)
            .collect();
    }

    let mut warnings = model.warnings;
    let predictions = models::predictions(&cfg)?;
    if mass.mean == 0.0 {
        warnings.push("every sample has zero mass".into());
    }

    let record = RunRecord {
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(&cfg),
        config: cfg,
        samples: per.into_iter().map(|p| p.summary).collect(),
        mass,
        estimates,
        predictions,
        warnings,
    };
    Ok(RunOutput {
        record,
        bands,
        timing: Timing {
            threads,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Runs and writes `record.json`, `bands.csv` and `timing.json` into `out`.
/// Nothing is left behind on failure.
pub fn execute(cfg: &ExperimentConfig, threads: usize, out: &Path) -> Result<RunOutput> {
    let output = run_experiment(cfg, threads)?;
    let written = [out.join(RECORD_FILE), out.join(BANDS_FILE), out.join(TIMING_FILE)];
    let result = (|| {
        std::fs::create_dir_all(out).map_err(ToolError::io(out))?;
        write_json(&written[0], &output.record)?;
        if !output.bands.is_empty() {
            write_csv(&written[1], &output.bands)?;
        }
        write_json(&written[2], &output.timing)
    })();
    if let Err(e) = result {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(output)
}

/// Default output directory for a config file.
pub fn default_out(cfg: &ExperimentConfig, config_path: &Path) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| {
        let stem = config_path
            .file_stem()
            .map_or("run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from(format!("{stem}.out"))
    })
}
