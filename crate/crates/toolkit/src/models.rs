//! Samplers and theory predictions for a configured model.

use mchaos_core::cascades::{CascadeSampler, WeightLaw};
use mchaos_core::coverings::{chi, CoveringSampler};
use mchaos_core::gaussian::{GmcConfig, GmcSampler};
use mchaos_core::theory::{cascade_bound, covering_bound, d_gamma, d_sigma, gmc_bound};
use mchaos_core::{BAdicGrid, MeasureSampler};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelConfig};
use crate::error::{Result, StageExt};

/// Number of bands used for the `chi` surrogate.
pub const CHI_BANDS: u32 = 40;

pub struct Model {
    pub sampler: Box<dyn MeasureSampler>,
    pub warnings: Vec<String>,
}

pub fn build(cfg: &ExperimentConfig) -> Result<Model> {
    let g = &cfg.grid;
    let grid = BAdicGrid::new(g.d, g.b, g.level()).stage("grid")?;
    let mut warnings = Vec::new();
    let sampler: Box<dyn MeasureSampler> = match &cfg.model {
        ModelConfig::Gmc { gamma, kernel, bump } => Box::new(
            GmcSampler::new(&GmcConfig {
                gamma: *gamma,
                d: g.d,
                b: g.b,
                m: g.m,
                grid_level: g.level(),
                kernel: *kernel,
                bump: bump.unwrap_or_default(),
            })
            .stage("model")?,
        ),
        ModelConfig::Cascade { law } => {
            let law = law.to_law();
            if law.is_degenerate() {
                warnings.push("degenerate weights: the cascade is Lebesgue measure".into());
            }
            let s = match law {
                WeightLaw::Gbm { sigma } => CascadeSampler::gbm(sigma, grid, g.m),
                other => CascadeSampler::new(other, grid, g.m),
            };
            Box::new(s.stage("model")?)
        }
        ModelConfig::Mrc { lambda } | ModelConfig::Pmc { lambda, .. } => {
            let a = match &cfg.model {
                ModelConfig::Pmc { a, .. } => Some(*a),
                _ => None,
            };
            let s = CoveringSampler::new(lambda.to_measure(), a, grid, g.m).stage("model")?;
            warnings.extend(s.warnings().into_iter().map(String::from));
            Box::new(s)
        }
    };
    Ok(Model { sampler, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionKind {
    /// The estimator targets this value.
    Exact,
    /// The dimension is at least this value.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub estimator: String,
    pub value: f64,
    pub kind: PredictionKind,
    pub source: String,
}

fn pred(estimator: &str, value: f64, kind: PredictionKind, source: &str) -> Prediction {
    Prediction {
        estimator: estimator.into(),
        value,
        kind,
        source: source.into(),
    }
}

/// Largest `p0 <= 2` on a 1e-3 grid satisfying the cascade moment condition.
fn cascade_p0(law: &WeightLaw, b: u32, d: usize) -> f64 {
    let mut p0 = 2.0;
    let holds = |p: f64| law.sup_moment(p) < (b as f64).powf(d as f64 * (p - 1.0));
    while p0 > 1.001 && !holds(p0) {
        p0 -= 1e-3;
    }
    p0
}

/// Predictions for every estimator that has one for this model.
pub fn predictions(cfg: &ExperimentConfig) -> Result<Vec<Prediction>> {
    use PredictionKind::*;
    let (d, b) = (cfg.grid.d, cfg.grid.b);
    let fourier = ["fourier-ensemble", "fourier-pathwise"];
    let mut out = Vec::new();
    match &cfg.model {
        ModelConfig::Gmc { gamma, .. } => {
            let dg = d_gamma(*gamma, d).stage("theory")?;
            // exact for d <= 2; a lower bound min{2, D} otherwise
            let (fv, fk, src) = if d <= 2 {
                (dg, Exact, "D_{gamma,d}")
            } else {
                (
                    gmc_bound(*gamma, d, 1.0).stage("theory")?,
                    LowerBound,
                    "min{2, D_{gamma,d}}",
                )
            };
            for f in fourier {
                out.push(pred(f, fv, fk, src));
            }
            out.push(pred("corrdim", dg, Exact, "D_{gamma,d}"));
        }
        ModelConfig::Cascade { law } => {
            let l = law.to_law();
            let p0 = cascade_p0(&l, b, d);
            let cb = cascade_bound(&l, b, d, l.alpha0(), p0).stage("theory")?;
            let (v, src) = match l {
                WeightLaw::Gbm { sigma } => (d_sigma(sigma, b).stage("theory")?.min(cb.value), "D_sigma"),
                _ => (cb.value, "cascade bound"),
            };
            for f in fourier {
                out.push(pred(f, v, LowerBound, src));
            }
        }
        ModelConfig::Mrc { lambda } => {
            let c = chi(&lambda.to_measure(), b, CHI_BANDS).stage("theory")?.value;
            // the limit measure vanishes; there is nothing to predict
            if c >= 1.0 {
                return Ok(out);
            }
            let bound = covering_bound(c, None, b).stage("theory")?.value;
            if lambda.is_canonical() {
                for f in fourier {
                    out.push(pred(f, bound, Exact, "1 - alpha"));
                }
                out.push(pred("corrdim", bound, Exact, "1 - alpha"));
                out.push(pred("boxdim", bound, Exact, "1 - alpha"));
            } else {
                for f in fourier {
                    out.push(pred(f, bound, LowerBound, "1 - chi"));
                }
            }
        }
        ModelConfig::Pmc { lambda, a } => {
            let c = chi(&lambda.to_measure(), b, CHI_BANDS).stage("theory")?.value;
            let bound = covering_bound(c, Some(*a), b).stage("theory")?.value;
            for f in fourier {
                out.push(pred(f, bound, LowerBound, "1 - (1-a)^2 chi"));
            }
        }
    }
    Ok(out)
}
