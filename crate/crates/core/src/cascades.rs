//! Canonical and generalized Mandelbrot cascades on b-adic cells.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::field::{DensityField, LayerValues};
use crate::grid::BAdicGrid;
use crate::rng::RngStream;
use crate::sampler::{MeasureSampler, Sample};

type PathFn = Arc<dyn Fn(&[f64], &mut RngStream) -> Vec<f64> + Send + Sync>;
type MomentFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied weight process on `[0, 1]` with declared regularity and
/// moments.
#[derive(Clone)]
pub struct CustomWeight {
    /// Draws the process at the given times.
    pub path: PathFn,
    /// Declared `sup_t E[W(t)^p]`.
    pub sup_moment: MomentFn,
    /// Declared Hölder exponent.
    pub alpha0: f64,
}

/// Law of the cascade weights.
#[derive(Clone)]
pub enum WeightLaw {
    /// `W = 1`.
    Constant,
    /// Finite law `P(W = values[i]) = probs[i]`.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    /// `W = exp(sigma N - sigma^2/2)`.
    LogNormal {
        sigma: f64,
    },
    /// Geometric Brownian motion `exp(sigma B(t) - sigma^2 t/2)`.
    Gbm {
        sigma: f64,
    },
    Custom(CustomWeight),
}

impl core::fmt::Debug for WeightLaw {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Constant => write!(f, "Constant"),
            Self::Discrete { values, probs } => {
                write!(f, "Discrete {{ values: {values:?}, probs: {probs:?} }}")
            }
            Self::LogNormal { sigma } => write!(f, "LogNormal {{ sigma: {sigma} }}"),
            Self::Gbm { sigma } => write!(f, "Gbm {{ sigma: {sigma} }}"),
            Self::Custom(c) => write!(f, "Custom {{ alpha0: {} }}", c.alpha0),
        }
    }
}

impl WeightLaw {
    /// Checks `W >= 0` and `E[W] = 1` analytically for the built-in laws.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant | Self::Custom(_) => Ok(()),
            Self::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    bail!(Argument, "discrete law needs matching non-empty values and probs");
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    bail!(Argument, "weights must be finite and nonnegative");
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    bail!(Argument, "probabilities must be nonnegative");
                }
                let total: f64 = probs.iter().sum();
                if libm::fabs(total - 1.0) > 1e-12 {
                    bail!(Argument, "probabilities sum to {total}, not 1");
                }
                let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                if libm::fabs(mean - 1.0) > 1e-12 {
                    bail!(Argument, "weight mean is {mean}, not 1");
                }
                Ok(())
            }
            Self::LogNormal { sigma } | Self::Gbm { sigma } => {
                if !(*sigma >= 0.0) || !sigma.is_finite() {
                    bail!(Argument, "sigma = {sigma} must be finite and nonnegative");
                }
                Ok(())
            }
        }
    }

    /// `sup_t E[W(t)^p]`.
    pub fn sup_moment(&self, p: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, q)| **q > 0.0)
                .map(|(v, q)| q * libm::pow(*v, p))
                .sum(),
            Self::LogNormal { sigma } | Self::Gbm { sigma } => libm::exp(p * (p - 1.0) * sigma * sigma / 2.0),
            Self::Custom(c) => (c.sup_moment)(p),
        }
    }

    /// `sup_t E[W log W]` where known in closed form.
    pub fn entropy(&self) -> Option<f64> {
        match self {
            Self::Constant => Some(0.0),
            Self::Discrete { values, probs } => Some(
                values
                    .iter()
                    .zip(probs)
                    .filter(|(v, q)| **v > 0.0 && **q > 0.0)
                    .map(|(v, q)| q * v * libm::log(*v))
                    .sum(),
            ),
            Self::LogNormal { sigma } | Self::Gbm { sigma } => Some(sigma * sigma / 2.0),
            Self::Custom(_) => None,
        }
    }

    /// `W = 1` almost surely.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Self::Constant => true,
            Self::Discrete { values, probs } => values.iter().zip(probs).all(|(v, q)| *q == 0.0 || *v == 1.0),
            Self::LogNormal { sigma } | Self::Gbm { sigma } => *sigma == 0.0,
            Self::Custom(_) => false,
        }
    }

    /// Hölder exponent of `t -> W(t)`: 1 for constant-in-cell weights.
    pub fn alpha0(&self) -> f64 {
        match self {
            Self::Gbm { .. } => 0.5,
            Self::Custom(c) => c.alpha0,
            _ => 1.0,
        }
    }

    /// Draws the weight at rescaled times `ts` in `[0, 1]`.
    pub fn sample_path(&self, ts: &[f64], rng: &mut RngStream) -> Vec<f64> {
        match self {
            Self::Constant => alloc::vec![1.0; ts.len()],
            Self::Discrete { values, probs } => {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut w = *values.last().expect("validated");
                for (v, q) in values.iter().zip(probs) {
                    acc += q;
                    if u < acc {
                        w = *v;
                        break;
                    }
                }
                alloc::vec![w; ts.len()]
            }
            Self::LogNormal { sigma } => {
                let w = libm::exp(sigma * rng.normal() - sigma * sigma / 2.0);
                alloc::vec![w; ts.len()]
            }
            Self::Gbm { sigma } => gbm_weight_path(*sigma, ts, rng),
            Self::Custom(c) => (c.path)(ts, rng),
        }
    }
}

/// `exp(sigma B(t) - sigma^2 t/2)` at increasing times by cumulative
/// Gaussian increments.
pub fn gbm_weight_path(sigma: f64, ts: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let mut b = 0.0;
    let mut prev = 0.0;
    ts.iter()
        .map(|&t| {
            b += libm::sqrt((t - prev).max(0.0)) * rng.normal();
            prev = t;
            libm::exp(sigma * b - sigma * sigma * t / 2.0)
        })
        .collect()
}

/// Monte Carlo check that a custom weight has mean 1 (within `4/sqrt(S)`
/// relative to its spread) at a few times and nonnegative values.
pub fn validate_custom(law: &CustomWeight, samples: usize, master_seed: u64) -> Result<()> {
    let ts = [0.05, 0.5, 0.95];
    let mut sum = [0.0; 3];
    let mut sum2 = [0.0; 3];
    for s in 0..samples {
        let mut rng = RngStream::new(master_seed, s as u64, 0, 0);
        let w = (law.path)(&ts, &mut rng);
        if w.len() != ts.len() || w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            bail!(Argument, "custom weight returned invalid values {w:?}");
        }
        for i in 0..3 {
            sum[i] += w[i];
            sum2[i] += w[i] * w[i];
        }
    }
    let n = samples as f64;
    for i in 0..3 {
        let mean = sum[i] / n;
        let sd = libm::sqrt((sum2[i] / n - mean * mean).max(0.0));
        if libm::fabs(mean - 1.0) > 4.0 * sd.max(1e-12) / libm::sqrt(n) {
            bail!(Argument, "custom weight mean {mean} at t = {} is not 1", ts[i]);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentRow {
    pub p: f64,
    pub moment: f64,
    /// `b^{d(p-1)}`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub entropy: Option<f64>,
    /// `d log b`.
    pub entropy_threshold: f64,
    pub entropy_pass: Option<bool>,
    pub degenerate: bool,
}

pub fn cascade_moment_report(law: &WeightLaw, p_grid: &[f64], b: u32, d: usize) -> Result<MomentReport> {
    law.validate()?;
    if let Some(p) = p_grid.iter().find(|p| !(**p > 1.0 && **p <= 2.0)) {
        bail!(Argument, "p = {p} outside (1, 2]");
    }
    let rows = p_grid
        .iter()
        .map(|&p| {
            let moment = law.sup_moment(p);
            let threshold = libm::pow(b as f64, d as f64 * (p - 1.0));
            MomentRow {
                p,
                moment,
                threshold,
                pass: moment < threshold,
            }
        })
        .collect();
    let entropy = law.entropy();
    let entropy_threshold = d as f64 * libm::log(b as f64);
    Ok(MomentReport {
        rows,
        entropy,
        entropy_threshold,
        entropy_pass: entropy.map(|e| e < entropy_threshold),
        degenerate: law.is_degenerate(),
    })
}

/// Cascade sampler: generation `k` draws one weight process per level-`k`
/// cell from stream `(seed, sample, k, cell)` and evaluates it at the
/// rescaled fine-cell centers `b^k (t - l_I)`.
#[derive(Clone, Debug)]
pub struct CascadeSampler {
    law: WeightLaw,
    grid: BAdicGrid,
    m: u32,
    ancestors: Vec<Vec<usize>>,
}

impl CascadeSampler {
    pub fn new(law: WeightLaw, grid: BAdicGrid, m: u32) -> Result<Self> {
        law.validate()?;
        if m > grid.level() {
            bail!(Argument, "cascade level {m} exceeds grid level {}", grid.level());
        }
        if matches!(law, WeightLaw::Gbm { .. } | WeightLaw::Custom(_)) && grid.d() != 1 {
            bail!(Argument, "process-valued weights are implemented for d = 1 only");
        }
        let ancestors = (0..=m).map(|k| grid.ancestor_map(k)).collect::<Result<_>>()?;
        Ok(Self {
            law,
            grid,
            m,
            ancestors,
        })
    }

    /// Geometric Brownian cascade with `0 < sigma < sqrt(2 log b)`.
    pub fn gbm(sigma: f64, grid: BAdicGrid, m: u32) -> Result<Self> {
        let c = libm::sqrt(2.0 * libm::log(grid.b() as f64));
        if !(sigma > 0.0 && sigma < c) {
            bail!(Argument, "sigma = {sigma} outside (0, {c})");
        }
        Self::new(WeightLaw::Gbm { sigma }, grid, m)
    }

    pub fn law(&self) -> &WeightLaw {
        &self.law
    }

    /// Weights of generation `k` on the fine grid.
    pub fn generation(&self, master_seed: u64, sample_id: u64, k: u32) -> LayerValues {
        let coarse = self.grid.coarsen(k).expect("k <= level");
        let map = &self.ancestors[k as usize];
        let mut values = alloc::vec![0.0; self.grid.cell_count()];
        let constant_in_cell = !matches!(self.law, WeightLaw::Gbm { .. } | WeightLaw::Custom(_));
        if constant_in_cell {
            let w: Vec<f64> = (0..coarse.cell_count())
                .map(|c| {
                    let mut rng = RngStream::new(master_seed, sample_id, k as u64, c as u64);
                    self.law.sample_path(&[0.0], &mut rng)[0]
                })
                .collect();
            for (v, c) in values.iter_mut().zip(map) {
                *v = w[*c];
            }
        } else {
            // d = 1: the fine cells of coarse cell c are contiguous
            let r = self.grid.cells_per_axis() / coarse.cells_per_axis();
            let ts: Vec<f64> = (0..r).map(|i| (i as f64 + 0.5) / r as f64).collect();
            for c in 0..coarse.cell_count() {
                let mut rng = RngStream::new(master_seed, sample_id, k as u64, c as u64);
                let w = self.law.sample_path(&ts, &mut rng);
                values[c * r..(c + 1) * r].copy_from_slice(&w);
            }
        }
        LayerValues {
            grid: self.grid,
            values,
        }
    }
}

impl MeasureSampler for CascadeSampler {
    fn grid(&self) -> &BAdicGrid {
        &self.grid
    }

    fn level(&self) -> u32 {
        self.m
    }

    fn sample_levels(
        &self,
        master_seed: u64,
        sample_id: u64,
        observe: &mut dyn FnMut(&DensityField),
    ) -> Result<Sample> {
        let mut field = DensityField::unit(self.grid);
        observe(&field);
        for k in 1..=self.m {
            field.multiply_layer_in_place(&self.generation(master_seed, sample_id, k))?;
            observe(&field);
        }
        Ok(Sample { field, mask: None })
    }
}
