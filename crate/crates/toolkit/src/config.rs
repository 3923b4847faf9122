//! Experiment configuration.

use std::path::{Path, PathBuf};

use mchaos_core::cascades::WeightLaw;
use mchaos_core::coverings::{DensitySpec, LambdaMeasure};
use mchaos_core::kernels::{ExpBump, KernelKind};
use mchaos_core::spectral::{BandTrim, FourierMode};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Gmc {
        gamma: f64,
        #[serde(default = "default_kernel")]
        kernel: KernelKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bump: Option<ExpBump>,
    },
    Cascade {
        law: WeightLawSpec,
    },
    Mrc {
        lambda: LambdaSpec,
    },
    Pmc {
        lambda: LambdaSpec,
        a: f64,
    },
}

fn default_kernel() -> KernelKind {
    KernelKind::ExactLog
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightLawSpec {
    Constant,
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Lognormal { sigma: f64 },
    Gbm { sigma: f64 },
}

impl WeightLawSpec {
    pub fn to_law(&self) -> WeightLaw {
        match self {
            Self::Constant => WeightLaw::Constant,
            Self::Discrete { values, probs } => WeightLaw::Discrete {
                values: values.clone(),
                probs: probs.clone(),
            },
            Self::Lognormal { sigma } => WeightLaw::LogNormal { sigma: *sigma },
            Self::Gbm { sigma } => WeightLaw::Gbm { sigma: *sigma },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    /// `[y, w]` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinLambda>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinLambda {
    pub canonical_alpha: f64,
}

impl LambdaSpec {
    pub fn canonical(alpha: f64) -> Self {
        Self {
            atoms: Vec::new(),
            density: None,
            builtin: Some(BuiltinLambda { canonical_alpha: alpha }),
        }
    }

    pub fn to_measure(&self) -> LambdaMeasure {
        LambdaMeasure {
            atoms: self.atoms.iter().map(|a| (a[0], a[1])).collect(),
            density: self.density,
            canonical_alpha: self.builtin.map(|b| b.canonical_alpha),
        }
    }

    /// Only the canonical family, for which the dimension is known exactly.
    pub fn is_canonical(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none() && self.builtin.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub b: u32,
    /// Martingale level.
    pub m: u32,
    /// Grid level `M >= m`; defaults to `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_level: Option<u32>,
}

impl GridConfig {
    pub fn level(&self) -> u32 {
        self.grid_level.unwrap_or(self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub samples: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Fourier {
        #[serde(default = "default_mode")]
        mode: FourierMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trim: Option<BandTrim>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    Corrdim {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<u32>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    Boxdim {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<u32>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
}

fn default_mode() -> FourierMode {
    FourierMode::EnsembleMean
}

impl EstimatorConfig {
    pub fn name(&self) -> String {
        match self {
            Self::Fourier { mode, .. } => match mode {
                FourierMode::EnsembleMean => "fourier-ensemble".into(),
                FourierMode::PathwiseMax => "fourier-pathwise".into(),
            },
            Self::Corrdim { .. } => "corrdim".into(),
            Self::Boxdim { .. } => "boxdim".into(),
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            Self::Fourier { tolerance, .. } => tolerance.unwrap_or(0.15),
            Self::Corrdim { tolerance, .. } | Self::Boxdim { tolerance, .. } => tolerance.unwrap_or(0.10),
        }
    }
}

/// Default fitting levels `max(1, M/3) ..= M`.
pub fn default_levels(level: u32) -> Vec<u32> {
    ((level / 3).max(1)..=level).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ToolError::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(ToolError::io(path))?;
        Self::from_json(&text).map_err(|e| match e {
            ToolError::Config(msg) => ToolError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.d == 0 || g.b < 2 {
            return Err(ToolError::Config(format!(
                "grid needs d >= 1 and b >= 2, got d = {}, b = {}",
                g.d, g.b
            )));
        }
        if g.m > g.level() {
            return Err(ToolError::Config(format!(
                "m = {} exceeds grid_level = {}",
                g.m,
                g.level()
            )));
        }
        if self.ensemble.samples == 0 {
            return Err(ToolError::Config("ensemble.samples must be positive".into()));
        }
        for e in &self.estimators {
            if e.tolerance() < 0.0 || !e.tolerance().is_finite() {
                return Err(ToolError::Config(format!(
                    "{}: tolerance must be a nonnegative number",
                    e.name()
                )));
            }
            if matches!(e, EstimatorConfig::Boxdim { .. }) && !matches!(self.model, ModelConfig::Mrc { .. }) {
                return Err(ToolError::Config("boxdim needs a covering mask (model mrc)".into()));
            }
        }
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GMC: &str = r#"{
        "model": {"kind": "gmc", "gamma": 0.5},
        "grid": {"d": 1, "b": 2, "m": 8},
        "ensemble": {"samples": 4, "master_seed": 1},
        "estimators": [{"kind": "fourier"}, {"kind": "corrdim", "tolerance": 0.2}]
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(GMC).unwrap();
        assert_eq!(c.grid.level(), 8);
        assert!(matches!(
            c.model,
            ModelConfig::Gmc {
                kernel: KernelKind::ExactLog,
                ..
            }
        ));
        assert_eq!(c.estimators[0].tolerance(), 0.15);
        assert_eq!(c.estimators[1].tolerance(), 0.2);
        let again = ExperimentConfig::from_json(&c.canonical_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = GMC.replace("\"gamma\": 0.5", "\"gamma\": 0.5, \"gama\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(ToolError::Config(_))));
        let bad = GMC.replace("\"m\": 8", "\"m\": 8, \"extra\": 2");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let err = ExperimentConfig::from_json("{\n  \"model\": ,\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("column"), "{msg}");
    }

    #[test]
    fn lambda_spec() {
        let text = r#"{"atoms": [[0.1, 2.0]], "density": {"kind": "power", "params": {"c": 0.1, "exponent": 1.0}}, "builtin": {"canonical_alpha": 0.3}}"#;
        let l: LambdaSpec = serde_json::from_str(text).unwrap();
        let m = l.to_measure();
        assert_eq!(m.atoms, vec![(0.1, 2.0)]);
        assert_eq!(m.canonical_alpha, Some(0.3));
        assert!(!l.is_canonical());
        assert!(LambdaSpec::canonical(0.5).is_canonical());
    }
}
