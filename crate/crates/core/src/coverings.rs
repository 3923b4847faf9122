//! Poisson coverings of `[0, 1]`: random-covering and Poisson chaos layers.
//!
//! Band `j >= 1` collects the intervals `(x, x + y)` with
//! `y in [b^{-j}, b^{-(j-1)})`. A point `t` is hit by a band point when
//! `t - y < x < t`.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::field::{CellMask, DensityField, LayerValues};
use crate::grid::BAdicGrid;
use crate::math::harmonic;
use crate::math::quad::integrate;
use crate::rng::RngStream;
use crate::sampler::{MeasureSampler, Sample};

/// Absolutely continuous part of `Lambda` on `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", content = "params", rename_all = "kebab-case")
)]
pub enum DensitySpec {
    /// `c dy`.
    Constant { c: f64 },
    /// `c y^{-exponent} dy`.
    Power { c: f64, exponent: f64 },
}

impl DensitySpec {
    pub fn at(&self, y: f64) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Power { c, exponent } => c * libm::pow(y, -exponent),
        }
    }
}

/// A Radon measure on `(0, 1)`: weighted atoms, an optional density and the
/// canonical family `alpha * sum_n delta_{alpha/n}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LambdaMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<DensitySpec>,
    pub canonical_alpha: Option<f64>,
}

/// `(int_band y Lambda(dy), int_band Lambda(dy))`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandMass {
    pub y_mass: f64,
    pub mass: f64,
}

/// Band edges `[b^{-j}, b^{-(j-1)})`.
pub fn band_edges(b: u32, j: u32) -> (f64, f64) {
    let bf = b as f64;
    (libm::pow(bf, -(j as f64)), libm::pow(bf, -(j as f64) + 1.0))
}

// largest n >= 0 with alpha/n >= y
fn last_at_least(alpha: f64, y: f64) -> u64 {
    let mut n = libm::floor(alpha / y) as u64;
    while n > 0 && alpha / (n as f64) < y {
        n -= 1;
    }
    while alpha / ((n + 1) as f64) >= y {
        n += 1;
    }
    n
}

// largest n >= 0 with alpha/n > y
fn last_above(alpha: f64, y: f64) -> u64 {
    let mut n = libm::floor(alpha / y) as u64;
    while n > 0 && alpha / (n as f64) <= y {
        n -= 1;
    }
    while alpha / ((n + 1) as f64) > y {
        n += 1;
    }
    n
}

impl LambdaMeasure {
    pub fn canonical(alpha: f64) -> Self {
        Self {
            canonical_alpha: Some(alpha),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &(y, w) in &self.atoms {
            if !(y > 0.0 && y < 1.0) || !(w >= 0.0) || !w.is_finite() {
                bail!(
                    Argument,
                    "atom ({y}, {w}) must have location in (0, 1) and finite mass >= 0"
                );
            }
        }
        if let Some(a) = self.canonical_alpha {
            if !(a > 0.0) || !a.is_finite() {
                bail!(Argument, "canonical alpha = {a} must be positive");
            }
        }
        if let Some(d) = self.density {
            let ok = match d {
                DensitySpec::Constant { c } => c >= 0.0 && c.is_finite(),
                DensitySpec::Power { c, exponent } => c >= 0.0 && c.is_finite() && exponent.is_finite(),
            };
            if !ok {
                bail!(Argument, "density {d:?} must be nonnegative and finite");
            }
        }
        Ok(())
    }

    /// Indices `(n_lo, n_hi]` of canonical atoms in band `j`.
    pub fn canonical_range(&self, b: u32, j: u32) -> Option<(u64, u64)> {
        let alpha = self.canonical_alpha?;
        let (lo, hi) = band_edges(b, j);
        let n_hi = last_at_least(alpha, lo);
        let n_lo = last_at_least(alpha, hi);
        (n_hi > n_lo).then_some((n_lo, n_hi))
    }

    pub fn band_masses(&self, b: u32, j: u32) -> Result<BandMass> {
        self.band_integrals(b, j, 0.0)
    }

    /// `int_band (y - delta)_+ Lambda(dy)` and `int_band 1{y > delta} Lambda(dy)`.
    pub fn band_integrals(&self, b: u32, j: u32, delta: f64) -> Result<BandMass> {
        if j == 0 {
            bail!(Argument, "bands start at j = 1");
        }
        let (lo, hi) = band_edges(b, j);
        let mut y_mass = 0.0;
        let mut mass = 0.0;
        for &(y, w) in &self.atoms {
            if y >= lo && y < hi && y > delta {
                y_mass += (y - delta) * w;
                mass += w;
            }
        }
        if let (Some(alpha), Some((n_lo, n_hi))) = (self.canonical_alpha, self.canonical_range(b, j)) {
            let n_c = if delta > 0.0 {
                n_hi.min(last_above(alpha, delta))
            } else {
                n_hi
            };
            if n_c > n_lo {
                y_mass += alpha * (harmonic(n_c) - harmonic(n_lo)) - delta * (n_c - n_lo) as f64;
                mass += (n_c - n_lo) as f64;
            }
        }
        if let Some(dens) = self.density {
            let a = lo.max(delta);
            if a < hi {
                let (ym, _) = integrate(|y| (y - delta) * dens.at(y), a, hi, 1e-14, 1e-12)?;
                let (m, _) = integrate(|y| dens.at(y), a, hi, 1e-14, 1e-12)?;
                if !ym.is_finite() || !m.is_finite() {
                    bail!(Numeric, "density is not integrable on band {j}");
                }
                y_mass += ym;
                mass += m;
            }
        }
        Ok(BandMass { y_mass, mass })
    }

    /// Draws the band-`j` points with `x` in `window`.
    pub fn sample_band(&self, b: u32, j: u32, window: (f64, f64), rng: &mut RngStream) -> Result<PppBandSample> {
        let (lo, hi) = band_edges(b, j);
        let len = window.1 - window.0;
        if !(len >= 0.0) {
            bail!(Argument, "empty window");
        }
        let mut points = Vec::new();
        for &(y, w) in &self.atoms {
            if y >= lo && y < hi {
                for _ in 0..rng.poisson(len * w) {
                    points.push((window.0 + len * rng.uniform(), y));
                }
            }
        }
        if let (Some(alpha), Some((n_lo, n_hi))) = (self.canonical_alpha, self.canonical_range(b, j)) {
            let count = n_hi - n_lo;
            for _ in 0..rng.poisson(len * count as f64) {
                let x = window.0 + len * rng.uniform();
                let n = n_lo + 1 + rng.below(count);
                points.push((x, alpha / n as f64));
            }
        }
        if let Some(dens) = self.density {
            // both built-in densities are monotone, so the envelope sits at an edge
            let env = dens.at(lo).max(dens.at(hi));
            if env > 0.0 {
                for _ in 0..rng.poisson(len * env * (hi - lo)) {
                    let x = window.0 + len * rng.uniform();
                    let y = lo + (hi - lo) * rng.uniform();
                    if rng.uniform() * env < dens.at(y) {
                        points.push((x, y));
                    }
                }
            }
        }
        Ok(PppBandSample { j, points })
    }
}

/// Points of one band of the Poisson process on the strip.
#[derive(Debug, Clone, PartialEq)]
pub struct PppBandSample {
    pub j: u32,
    /// `(x, y)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl PppBandSample {
    /// Number of points with `t - y < x < t`.
    pub fn hits(&self, t: f64) -> usize {
        self.points.iter().filter(|(x, y)| t - y < *x && *x < t).count()
    }

    /// Hit counts at every cell center of a one-dimensional grid.
    pub fn cell_hits(&self, grid: &BAdicGrid) -> Vec<u32> {
        let n = grid.cells_per_axis();
        let nf = n as f64;
        let mut diff = alloc::vec![0i64; n + 1];
        for &(x, y) in &self.points {
            // centers c_i = (i + 1/2)/n with x < c_i < x + y
            let first = libm::floor(x * nf - 0.5) + 1.0;
            let last = libm::ceil((x + y) * nf - 0.5) - 1.0;
            let first = first.max(0.0);
            let last = last.min(nf - 1.0);
            if first <= last {
                diff[first as usize] += 1;
                diff[last as usize + 1] -= 1;
            }
        }
        let mut acc = 0i64;
        diff[..n]
            .iter()
            .map(|d| {
                acc += d;
                acc as u32
            })
            .collect()
    }
}

/// `chi(b, Lambda)` surrogate: max of `y_mass / log b` over the last half of `bands`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChiEstimate {
    pub value: f64,
    /// `(j, y_mass / log b)` for every computed band.
    pub ratios: Vec<(u32, f64)>,
}

pub fn chi(lambda: &LambdaMeasure, b: u32, bands: u32) -> Result<ChiEstimate> {
    if bands < 2 {
        bail!(Argument, "need at least two bands");
    }
    let lb = libm::log(b as f64);
    let ratios = (1..=bands)
        .map(|j| Ok((j, lambda.band_masses(b, j)?.y_mass / lb)))
        .collect::<Result<Vec<_>>>()?;
    let start = bands / 2;
    let value = ratios
        .iter()
        .filter(|(j, _)| *j > start)
        .map(|r| r.1)
        .fold(0.0, f64::max);
    Ok(ChiEstimate { value, ratios })
}

/// `chi(Lambda) = min_b chi(b, Lambda)` over the supplied bases.
pub fn chi_min(lambda: &LambdaMeasure, bases: &[u32], bands: u32) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &b in bases {
        best = best.min(chi(lambda, b, bands)?.value);
    }
    Ok(best)
}

/// Random-covering layer: `exp(y_mass)` where uncovered, 0 where covered.
pub fn mrc_layer(sample: &PppBandSample, mass: BandMass, grid: &BAdicGrid) -> Result<(LayerValues, CellMask)> {
    if grid.d() != 1 {
        bail!(Argument, "coverings live on [0, 1]");
    }
    let hits = sample.cell_hits(grid);
    let e = libm::exp(mass.y_mass);
    let values = hits.iter().map(|h| if *h == 0 { e } else { 0.0 }).collect();
    let covered = hits.iter().map(|h| *h > 0).collect();
    Ok((LayerValues { grid: *grid, values }, CellMask::new(*grid, covered)?))
}

/// Poisson chaos layer `a^{hits} exp((1 - a) y_mass)`.
pub fn pmc_layer(sample: &PppBandSample, a: f64, mass: BandMass, grid: &BAdicGrid) -> Result<LayerValues> {
    if !(a > 0.0 && a < 1.0) {
        bail!(Argument, "a = {a} outside (0, 1)");
    }
    if grid.d() != 1 {
        bail!(Argument, "coverings live on [0, 1]");
    }
    let e = libm::exp((1.0 - a) * mass.y_mass);
    let values = sample
        .cell_hits(grid)
        .iter()
        .map(|h| libm::pow(a, *h as f64) * e)
        .collect();
    Ok(LayerValues { grid: *grid, values })
}

/// Smallest window holding every band-`j` start point that can cover one of `ts`.
pub fn hit_window(b: u32, j: u32, ts: &[f64]) -> (f64, f64) {
    let (_, hi) = band_edges(b, j);
    let lo_t = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_t = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo_t - hi, hi_t)
}

/// Covering layer at a single point.
pub fn mrc_value_at(sample: &PppBandSample, mass: BandMass, t: f64) -> f64 {
    if sample.hits(t) == 0 {
        libm::exp(mass.y_mass)
    } else {
        0.0
    }
}

/// Poisson chaos layer at a single point.
pub fn pmc_value_at(sample: &PppBandSample, a: f64, mass: BandMass, t: f64) -> f64 {
    libm::pow(a, sample.hits(t) as f64) * libm::exp((1.0 - a) * mass.y_mass)
}

/// `E[X(t) X(s)]` for the band-`j` layer with `|t - s| = delta`:
/// `exp(int_band (y - delta)_+ Lambda(dy))` for the covering, and
/// `exp((1-a)^2 int_band (y - delta)_+ Lambda(dy))` for Poisson chaos.
pub fn covering_covariance_oracle(
    lambda: &LambdaMeasure,
    b: u32,
    j: u32,
    t: f64,
    s: f64,
    a: Option<f64>,
) -> Result<f64> {
    let overlap = lambda.band_integrals(b, j, libm::fabs(t - s))?.y_mass;
    Ok(match a {
        None => libm::exp(overlap),
        Some(a) => libm::exp((1.0 - a) * (1.0 - a) * overlap),
    })
}

/// `E[X^p]` for one layer: `exp((p-1) y_mass)` or `exp((a^p - ap + p - 1) y_mass)`.
pub fn layer_moment_oracle(mass: BandMass, p: f64, a: Option<f64>) -> f64 {
    match a {
        None => libm::exp((p - 1.0) * mass.y_mass),
        Some(a) => libm::exp((libm::pow(a, p) - a * p + p - 1.0) * mass.y_mass),
    }
}

/// Covering or Poisson chaos measure at level `m`; layer 0 is identically 1.
#[derive(Debug, Clone)]
pub struct CoveringSampler {
    lambda: LambdaMeasure,
    b: u32,
    m: u32,
    a: Option<f64>,
    grid: BAdicGrid,
    masses: Vec<BandMass>,
    chi: f64,
}

/// Window for the strip process: every interval meeting `[0, 1]` starts here.
pub const WINDOW: (f64, f64) = (-1.0, 1.0);

impl CoveringSampler {
    /// `a = None` gives the random covering, `Some(a)` Poisson chaos.
    pub fn new(lambda: LambdaMeasure, a: Option<f64>, grid: BAdicGrid, m: u32) -> Result<Self> {
        lambda.validate()?;
        if grid.d() != 1 {
            bail!(Argument, "coverings live on [0, 1]");
        }
        if m > grid.level() {
            bail!(Argument, "level {m} exceeds grid level {}", grid.level());
        }
        if let Some(a) = a {
            if !(a > 0.0 && a < 1.0) {
                bail!(Argument, "a = {a} outside (0, 1)");
            }
        }
        let b = grid.b();
        let masses = (1..=m).map(|j| lambda.band_masses(b, j)).collect::<Result<_>>()?;
        let chi = chi(&lambda, b, 40)?.value;
        Ok(Self {
            lambda,
            b,
            m,
            a,
            grid,
            masses,
            chi,
        })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Non-empty when the parameters sit outside the regime where the limit
    /// is non-degenerate.
    pub fn warnings(&self) -> Vec<&'static str> {
        let mut w = Vec::new();
        if self.chi >= 1.0 {
            w.push("degenerate regime: chi(b, Lambda) >= 1");
        }
        w
    }

    pub fn band_sample(&self, master_seed: u64, sample_id: u64, j: u32) -> Result<PppBandSample> {
        let mut rng = RngStream::new(master_seed, sample_id, j as u64, 0);
        self.lambda.sample_band(self.b, j, WINDOW, &mut rng)
    }
}

impl MeasureSampler for CoveringSampler {
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
        for j in 1..=self.m {
            let pts = self.band_sample(master_seed, sample_id, j)?;
            let mass = self.masses[j as usize - 1];
            let layer = match self.a {
                None => mrc_layer(&pts, mass, &self.grid)?.0,
                Some(a) => pmc_layer(&pts, a, mass, &self.grid)?,
            };
            field.multiply_layer_in_place(&layer)?;
            observe(&field);
        }
        let mask = self.a.is_none().then(|| CellMask::support_of(&field));
        Ok(Sample { field, mask })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn canonical_band_sums() {
        let l = LambdaMeasure::canonical(0.3);
        for j in 1..=16 {
            let (lo, hi) = band_edges(2, j);
            let mut direct = (0.0, 0.0);
            for n in 1..200_000u64 {
                let y = 0.3 / n as f64;
                if y >= lo && y < hi {
                    direct.0 += y;
                    direct.1 += 1.0;
                }
            }
            let m = l.band_masses(2, j).unwrap();
            assert!((m.y_mass - direct.0).abs() < 1e-12, "j={j}");
            assert_eq!(m.mass, direct.1);
        }
        let far = l.band_masses(2, 60).unwrap().y_mass;
        assert!((far - 0.3 * libm::log(2.0)).abs() < 1e-9);
    }

    #[test]
    fn chi_values() {
        let c = chi(&LambdaMeasure::canonical(0.5), 2, 40).unwrap().value;
        assert!((c - 0.5).abs() < 1e-3);
        assert_eq!(chi(&LambdaMeasure::default(), 2, 40).unwrap().value, 0.0);
        let dens = LambdaMeasure {
            density: Some(DensitySpec::Constant { c: 3.0 }),
            ..Default::default()
        };
        let m = dens.band_masses(2, 3).unwrap();
        let (lo, hi) = band_edges(2, 3);
        assert!((m.y_mass - 1.5 * (hi * hi - lo * lo)).abs() < 1e-14);
        assert!(chi(&dens, 2, 40).unwrap().value < 1e-9);
    }

    #[test]
    fn empty_band_and_hits() {
        let l = LambdaMeasure {
            atoms: vec![(0.9, 1.0)],
            ..Default::default()
        };
        assert_eq!(l.band_masses(2, 3).unwrap(), BandMass { y_mass: 0.0, mass: 0.0 });
        let s = l.sample_band(2, 3, WINDOW, &mut RngStream::new(1, 0, 3, 0)).unwrap();
        assert!(s.points.is_empty());
        let grid = BAdicGrid::new(1, 2, 3).unwrap();
        let s = PppBandSample {
            j: 1,
            points: vec![(0.0625, 0.25)],
        };
        // covers centers strictly inside (0.0625, 0.3125): 0.1875
        assert_eq!(s.cell_hits(&grid), [0, 1, 0, 0, 0, 0, 0, 0]);
        let s = PppBandSample {
            j: 1,
            points: vec![(0.0, 0.3125)],
        };
        assert_eq!(s.cell_hits(&grid), [1, 1, 0, 0, 0, 0, 0, 0]);
        for i in 0..8 {
            assert_eq!(s.cell_hits(&grid)[i] as usize, s.hits((i as f64 + 0.5) / 8.0));
        }
    }

    #[test]
    fn zero_measure_gives_unit_field() {
        let grid = BAdicGrid::new(1, 2, 6).unwrap();
        let s = CoveringSampler::new(LambdaMeasure::default(), None, grid, 5).unwrap();
        let out = s.sample(1, 1).unwrap();
        assert!(out.field.values().iter().all(|v| *v == 1.0));
        assert_eq!(out.mask.unwrap().count(), grid.cell_count());
    }

    #[test]
    fn covariance_limits() {
        let l = LambdaMeasure::canonical(0.5);
        let m = l.band_masses(2, 4).unwrap();
        let v = covering_covariance_oracle(&l, 2, 4, 0.3, 0.3, None).unwrap();
        assert!((v - libm::exp(m.y_mass)).abs() < 1e-14);
        let v = covering_covariance_oracle(&l, 2, 4, 0.0, 0.125, None).unwrap();
        assert_eq!(v, 1.0);
        assert!(pmc_layer(
            &PppBandSample { j: 1, points: vec![] },
            1.0,
            m,
            &BAdicGrid::new(1, 2, 2).unwrap()
        )
        .is_err());
    }
}
