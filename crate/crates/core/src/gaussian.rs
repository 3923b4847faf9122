//! Gaussian layers by circulant embedding and the GMC sampler built on them.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::field::{DensityField, LayerValues};
use crate::grid::BAdicGrid;
use crate::kernels::{bump_selfconvolve, ExactLog, ExpBump, KernelDecomposition, KernelKind, LayerKernel, StarScale};
use crate::math::fft::FftNd;
use crate::math::linalg::semidefinite_cholesky;
use crate::math::Complex64;
use crate::rng::RngStream;
use crate::sampler::{MeasureSampler, Sample};

/// Relative size of negative eigenvalues that are clipped to zero.
pub const CLIP_TOLERANCE: f64 = 1e-8;

/// Layer id reserved for the remainder field added to layer 0.
pub const REMAINDER_LAYER_ID: u64 = u64::MAX;

/// Samples `psi_j` at cell centers.
#[derive(Debug, Clone)]
pub struct LayerField {
    pub grid: BAdicGrid,
    pub j: u32,
    pub values: Vec<f64>,
    /// `K_j(0)`.
    pub variance: f64,
}

#[derive(Debug, Clone)]
enum Mode {
    Zero,
    /// Independent cells when the support is below one cell.
    Iid {
        sd: f64,
    },
    /// `sqrt(lambda / L^d)` on the `2n`-per-axis torus.
    Circulant {
        fft: FftNd,
        scale: Vec<f64>,
    },
}

/// Precomputed factorization of one layer on one grid; shared across samples.
#[derive(Debug, Clone)]
pub struct LayerSampler {
    grid: BAdicGrid,
    j: u32,
    variance: f64,
    mode: Mode,
}

impl LayerSampler {
    pub fn new(kernel: LayerKernel<'_>, grid: BAdicGrid) -> Result<Self> {
        let d = grid.d();
        let j = kernel.j;
        let variance = kernel.variance();
        if kernel.decomposition.dim() != d && kernel.decomposition.kind() != KernelKind::Custom {
            bail!(
                Argument,
                "kernel is defined in dimension {}, grid has {d}",
                kernel.decomposition.dim()
            );
        }
        if !(variance >= 0.0) || !variance.is_finite() {
            bail!(Numeric, "layer {j} variance {variance} is invalid");
        }
        if variance == 0.0 {
            return Ok(Self {
                grid,
                j,
                variance,
                mode: Mode::Zero,
            });
        }
        let h = grid.cell_width();
        if kernel.support_radius() < h && j > grid.level() {
            return Ok(Self {
                grid,
                j,
                variance,
                mode: Mode::Iid {
                    sd: libm::sqrt(variance),
                },
            });
        }
        let n = grid.cells_per_axis();
        let l = 2 * n;
        let total = l.pow(d as u32);
        let mut buf = Vec::with_capacity(total);
        let mut off = alloc::vec![0.0; d];
        for flat in 0..total {
            let mut f = flat;
            for a in (0..d).rev() {
                let k = f % l;
                f /= l;
                off[a] = k.min(l - k) as f64 * h;
            }
            buf.push(Complex64::new(kernel.evaluate(&off), 0.0));
        }
        let fft = FftNd::new(&alloc::vec![l; d]);
        fft.forward(&mut buf);
        let max = buf.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let (wi, min) = buf
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.re))
            .fold((0, f64::MAX), |a, x| if x.1 < a.1 { x } else { a });
        if min < -CLIP_TOLERANCE * max {
            bail!(
                Numeric,
                "layer {j} covariance is not positive semidefinite: eigenvalue {min:e} at frequency {wi} (max {max:e})"
            );
        }
        let norm = total as f64;
        let scale = buf.iter().map(|c| libm::sqrt(c.re.max(0.0) / norm)).collect();
        Ok(Self {
            grid,
            j,
            variance,
            mode: Mode::Circulant { fft, scale },
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sample(&self, rng: &mut RngStream) -> LayerField {
        let cells = self.grid.cell_count();
        let values = match &self.mode {
            Mode::Zero => alloc::vec![0.0; cells],
            Mode::Iid { sd } => (0..cells).map(|_| sd * rng.normal()).collect(),
            Mode::Circulant { fft, scale } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|s| {
                        let re = rng.normal();
                        let im = rng.normal();
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.forward(&mut buf);
                let n = self.grid.cells_per_axis();
                let l = 2 * n;
                let d = self.grid.d();
                let mut out = Vec::with_capacity(cells);
                let mut idx = alloc::vec![0usize; d];
                for flat in 0..cells {
                    self.grid.multi_index_into(flat, &mut idx);
                    let mut t = 0usize;
                    for &i in idx.iter() {
                        t = t * l + i;
                    }
                    out.push(buf[t].re);
                }
                out
            }
        };
        LayerField {
            grid: self.grid,
            j: self.j,
            values,
            variance: self.variance,
        }
    }
}

/// Draws one layer field with covariance `K_j(t - s)` on the cell centers.
pub fn sample_layer(kernel: LayerKernel<'_>, grid: BAdicGrid, rng: &mut RngStream) -> Result<LayerField> {
    Ok(LayerSampler::new(kernel, grid)?.sample(rng))
}

/// `exp(gamma psi - gamma^2 K_j(0) / 2)`.
pub fn exponentiate_layer(field: &LayerField, gamma: f64) -> LayerValues {
    let c = gamma * gamma * field.variance / 2.0;
    LayerValues {
        grid: field.grid,
        values: field.values.iter().map(|x| libm::exp(gamma * x - c)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GmcConfig {
    pub gamma: f64,
    pub d: usize,
    pub b: u32,
    /// Martingale level.
    pub m: u32,
    pub grid_level: u32,
    pub kernel: KernelKind,
    /// Seed bump of star-scale kernels.
    #[cfg_attr(feature = "serde", serde(default))]
    pub bump: ExpBump,
}

/// Knots used for tabulated star-scale profiles.
pub fn default_profile_knots(d: usize) -> usize {
    if d == 1 {
        1025
    } else {
        257
    }
}

/// The decomposition selected by a config.
pub fn decomposition_for(kind: KernelKind, bump: ExpBump, b: u32, d: usize) -> Result<Arc<dyn KernelDecomposition>> {
    match kind {
        KernelKind::ExactLog => {
            if d != 1 {
                bail!(Argument, "the exact logarithmic decomposition is one-dimensional");
            }
            Ok(Arc::new(ExactLog { b }))
        }
        KernelKind::StarScale => {
            let profile = bump_selfconvolve(&bump, d, default_profile_knots(d))?;
            Ok(Arc::new(StarScale::new(b, Arc::new(profile))))
        }
        KernelKind::Custom => bail!(Argument, "custom kernels are passed as decompositions"),
    }
}

#[derive(Debug, Clone)]
struct Augmentation {
    // lower-triangular factor of R on the cell centers
    factor: Vec<f64>,
    diag: Vec<f64>,
}

/// Sub-critical GMC: `prod_{j<=m} exp(gamma psi_j - gamma^2 K_j(0)/2)`.
#[derive(Clone)]
pub struct GmcSampler {
    gamma: f64,
    grid: BAdicGrid,
    m: u32,
    decomposition: Arc<dyn KernelDecomposition>,
    layers: Vec<LayerSampler>,
    augmentation: Option<Augmentation>,
}

impl core::fmt::Debug for GmcSampler {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GmcSampler")
            .field("gamma", &self.gamma)
            .field("grid", &self.grid)
            .field("m", &self.m)
            .field("kind", &self.decomposition.kind())
            .finish()
    }
}

impl GmcSampler {
    pub fn new(config: &GmcConfig) -> Result<Self> {
        let grid = BAdicGrid::new(config.d, config.b, config.grid_level)?;
        let decomposition = decomposition_for(config.kernel, config.bump, config.b, config.d)?;
        Self::with_decomposition(config.gamma, decomposition, grid, config.m)
    }

    pub fn with_decomposition(
        gamma: f64,
        decomposition: Arc<dyn KernelDecomposition>,
        grid: BAdicGrid,
        m: u32,
    ) -> Result<Self> {
        let d = grid.d();
        if !(gamma >= 0.0 && gamma * gamma < 2.0 * d as f64) {
            bail!(Argument, "gamma = {gamma} is not sub-critical for d = {d}");
        }
        if decomposition.base() != grid.b() {
            bail!(
                Argument,
                "kernel base {} differs from grid base {}",
                decomposition.base(),
                grid.b()
            );
        }
        if m > grid.level() {
            bail!(Argument, "level {m} exceeds grid level {}", grid.level());
        }
        let layers = (0..=m)
            .map(|j| {
                LayerSampler::new(
                    LayerKernel {
                        decomposition: &*decomposition,
                        j,
                    },
                    grid,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            gamma,
            grid,
            m,
            decomposition,
            layers,
            augmentation: None,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn decomposition(&self) -> &Arc<dyn KernelDecomposition> {
        &self.decomposition
    }

    pub fn layer_sampler(&self, j: u32) -> &LayerSampler {
        &self.layers[j as usize]
    }

    /// Replaces `psi_0` by `psi_0 + Z` with `Z` Gaussian of covariance
    /// `remainder`, factorized densely on the cell centers.
    pub fn augment_layer0(mut self, remainder: &dyn Fn(&[f64], &[f64]) -> f64) -> Result<Self> {
        const MAX_CELLS: usize = 2048;
        let n = self.grid.cell_count();
        if n > MAX_CELLS {
            return Err(crate::error::Error::Resource {
                what: "dense remainder factorization cells",
                requested: n as u128,
                limit: MAX_CELLS as u128,
            });
        }
        let a = crate::kernels::kernel_matrix(remainder, &self.grid);
        let factor = semidefinite_cholesky(&a, n, 1e-10)?;
        let diag = (0..n).map(|i| a[i * n + i]).collect();
        self.augmentation = Some(Augmentation { factor, diag });
        Ok(self)
    }

    /// `P_0` including the remainder field when present.
    fn layer0(&self, master_seed: u64, sample_id: u64) -> Vec<f64> {
        let mut rng = RngStream::new(master_seed, sample_id, 0, 0);
        let psi = self.layers[0].sample(&mut rng);
        let g = self.gamma;
        let k0 = psi.variance;
        match &self.augmentation {
            None => exponentiate_layer(&psi, g).values,
            Some(aug) => {
                let n = psi.values.len();
                let mut zr = RngStream::new(master_seed, sample_id, REMAINDER_LAYER_ID, 0);
                let xi: Vec<f64> = (0..n).map(|_| zr.normal()).collect();
                (0..n)
                    .map(|i| {
                        let row = &aug.factor[i * n..i * n + i + 1];
                        let z: f64 = row.iter().zip(&xi).map(|(l, x)| l * x).sum();
                        libm::exp(g * (psi.values[i] + z) - g * g * (k0 + aug.diag[i]) / 2.0)
                    })
                    .collect()
            }
        }
    }
}

impl MeasureSampler for GmcSampler {
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
        let mut field = DensityField::from_values(self.grid, self.layer0(master_seed, sample_id), 0)?;
        observe(&field);
        for j in 1..=self.m {
            let mut rng = RngStream::new(master_seed, sample_id, j as u64, 0);
            let psi = self.layers[j as usize].sample(&mut rng);
            field.multiply_layer_in_place(&exponentiate_layer(&psi, self.gamma))?;
            observe(&field);
        }
        Ok(Sample { field, mask: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParityReport {
    pub pass: bool,
    pub j: u32,
    pub pairs_tested: usize,
    /// Largest `|cov| / sqrt(var_1 var_2 / S)` over the tested pairs.
    pub worst_z: f64,
    pub worst_pair: (usize, usize),
    pub band: f64,
    /// Empirical variance at the first tested cell, reported for reference.
    pub same_cell_covariance: f64,
}

/// Empirical covariance of `psi_j` between cells of the same parity class of
/// `D_j` (hence at distance at least `b^{-j}`), tested against `band`
/// standard errors around zero.
pub fn parity_independence_check(fields: &[LayerField], j: u32, max_pairs: usize, band: f64) -> Result<ParityReport> {
    let Some(first) = fields.first() else {
        bail!(Argument, "empty ensemble");
    };
    let grid = first.grid;
    if fields.iter().any(|f| f.grid != grid || f.j != j) {
        bail!(Argument, "ensemble mixes grids or layers");
    }
    if j > grid.level() {
        bail!(Argument, "level {j} finer than the grid");
    }
    let s = fields.len() as f64;
    if fields.len() < 3 {
        bail!(Argument, "need at least three samples");
    }
    let coarse = grid.coarsen(j)?;
    let ratio = grid.cells_per_axis() / coarse.cells_per_axis();
    let d = grid.d();
    let rep = |c: usize| -> usize {
        let idx = coarse.multi_index(c);
        let fine: Vec<usize> = idx.iter().map(|i| i * ratio + ratio / 2).collect();
        grid.flat_index(&fine).expect("inside grid")
    };
    let parity = |c: usize| -> Vec<usize> { coarse.multi_index(c).iter().map(|i| i % 2).collect() };
    let mut pairs = Vec::new();
    let nc = coarse.cell_count();
    'outer: for a in 0..nc {
        for b in a + 1..nc {
            if parity(a) == parity(b) {
                pairs.push((a, b));
                if pairs.len() >= max_pairs {
                    break 'outer;
                }
            }
        }
    }
    let _ = d;
    let stats = |x: usize, y: usize| -> (f64, f64, f64) {
        let mx = fields.iter().map(|f| f.values[x]).sum::<f64>() / s;
        let my = fields.iter().map(|f| f.values[y]).sum::<f64>() / s;
        let (mut cxy, mut vx, mut vy) = (0.0, 0.0, 0.0);
        for f in fields {
            let (u, v) = (f.values[x] - mx, f.values[y] - my);
            cxy += u * v;
            vx += u * u;
            vy += v * v;
        }
        (cxy / (s - 1.0), vx / (s - 1.0), vy / (s - 1.0))
    };
    let mut worst = (0.0f64, (0, 0));
    for &(a, b) in &pairs {
        let (x, y) = (rep(a), rep(b));
        let (c, vx, vy) = stats(x, y);
        let se = libm::sqrt(vx * vy / s);
        let z = if se > 0.0 {
            libm::fabs(c) / se
        } else if c == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if z > worst.0 {
            worst = (z, (x, y));
        }
    }
    let same = pairs.first().map(|p| stats(rep(p.0), rep(p.0)).0).unwrap_or(0.0);
    Ok(ParityReport {
        pass: worst.0 <= band,
        j,
        pairs_tested: pairs.len(),
        worst_z: worst.0,
        worst_pair: worst.1,
        band,
        same_cell_covariance: same,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CustomDecomposition;

    #[test]
    fn zero_kernel_gives_unit_field() {
        let grid = BAdicGrid::new(1, 2, 4).unwrap();
        let k = Arc::new(CustomDecomposition::new(2, 1, |_, _| 0.0, |_| 1.0));
        let s = GmcSampler::with_decomposition(0.7, k, grid, 0).unwrap();
        let f = s.sample(1, 2).unwrap().field;
        assert!(f.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn gamma_zero_layer_is_one() {
        let grid = BAdicGrid::new(1, 2, 5).unwrap();
        let k = ExactLog { b: 2 };
        let psi = sample_layer(
            LayerKernel {
                decomposition: &k,
                j: 2,
            },
            grid,
            &mut RngStream::new(0, 0, 2, 0),
        )
        .unwrap();
        assert!(exponentiate_layer(&psi, 0.0).values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn non_psd_layer_is_numeric_error() {
        let grid = BAdicGrid::new(1, 2, 5).unwrap();
        let k = CustomDecomposition::new(2, 1, |_, r| if r <= 0.25 { 1.0 - 8.0 * r } else { 0.0 }, |_| 0.25);
        let e = LayerSampler::new(
            LayerKernel {
                decomposition: &k,
                j: 0,
            },
            grid,
        )
        .unwrap_err();
        assert!(matches!(e, crate::Error::Numeric(_)));
    }

    #[test]
    fn subcritical_only() {
        let cfg = GmcConfig {
            gamma: 1.5,
            d: 1,
            b: 2,
            m: 3,
            grid_level: 5,
            kernel: KernelKind::ExactLog,
            bump: ExpBump::default(),
        };
        assert!(GmcSampler::new(&cfg).is_err());
    }
}
