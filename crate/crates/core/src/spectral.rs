//! Fourier coefficients of density fields and dimension estimates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Result};
use crate::field::{CellMask, DensityField};
use crate::math::fft::FftNd;
use crate::math::regress::fit_line;
use crate::math::Complex64;
use crate::sampler::MeasureSampler;

/// `mu_hat(n)` for `n` in the box `{-n_max..n_max}^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    d: usize,
    n_max: usize,
    /// Cells per axis of the source grid; zero for synthetic spectra.
    cells_per_axis: usize,
    coefficients: Vec<Complex64>,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        libm::sin(PI * x) / (PI * x)
    }
}

fn for_each_index(d: usize, n_max: usize, mut f: impl FnMut(&[i64], usize)) {
    let side = 2 * n_max + 1;
    let total = side.pow(d as u32);
    let mut n = vec![-(n_max as i64); d];
    for flat in 0..total {
        f(&n, flat);
        for a in (0..d).rev() {
            n[a] += 1;
            if n[a] <= n_max as i64 {
                break;
            }
            n[a] = -(n_max as i64);
        }
    }
}

fn norm(n: &[i64]) -> f64 {
    libm::sqrt(n.iter().map(|&k| (k * k) as f64).sum())
}

impl FourierSpectrum {
    /// Spectrum with prescribed coefficients, mostly for testing estimators.
    pub fn from_fn(d: usize, n_max: usize, mut f: impl FnMut(&[i64]) -> Complex64) -> Result<Self> {
        if d == 0 {
            bail!(Argument, "dimension must be positive");
        }
        let side = 2 * n_max + 1;
        let mut coefficients = Vec::with_capacity(side.pow(d as u32));
        for_each_index(d, n_max, |n, _| coefficients.push(f(n)));
        Ok(Self {
            d,
            n_max,
            cells_per_axis: 0,
            coefficients,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    fn flat(&self, n: &[i64]) -> Option<usize> {
        let side = 2 * self.n_max + 1;
        let mut flat = 0;
        for &k in n {
            if k.unsigned_abs() as usize > self.n_max {
                return None;
            }
            flat = flat * side + (k + self.n_max as i64) as usize;
        }
        Some(flat)
    }

    pub fn get(&self, n: &[i64]) -> Option<Complex64> {
        if n.len() != self.d {
            return None;
        }
        self.flat(n).map(|i| self.coefficients[i])
    }

    /// Calls `f(n, mu_hat(n))` for every stored frequency.
    pub fn for_each(&self, mut f: impl FnMut(&[i64], Complex64)) {
        for_each_index(self.d, self.n_max, |n, i| f(n, self.coefficients[i]));
    }

    /// `sum |h^d DFT(n)|^2` over one period of the DFT (`[-N/2, N/2)^d` for
    /// even `N`), which equals the grid `L^2` norm of the density. Needs the
    /// full Nyquist box.
    pub fn nyquist_energy(&self) -> Result<f64> {
        let n = self.cells_per_axis;
        if n == 0 || self.n_max != n / 2 {
            bail!(Argument, "the spectrum does not cover the Nyquist box");
        }
        let h = 1.0 / n as f64;
        let half = if n % 2 == 0 {
            self.n_max as i64
        } else {
            self.n_max as i64 + 1
        };
        let mut sum = 0.0;
        self.for_each(|k, c| {
            if k.iter().all(|&a| a < half) {
                let s: f64 = k.iter().map(|&a| sinc(a as f64 * h)).product();
                sum += c.norm_sqr() / (s * s);
            }
        });
        Ok(sum)
    }
}

/// Exact coefficients of the piecewise-constant density for `|n_a| <= n_max`.
pub fn fourier_coefficients(field: &DensityField, n_max: usize) -> Result<FourierSpectrum> {
    let grid = field.grid();
    let d = grid.d();
    let n = grid.cells_per_axis();
    if 2 * n_max > n {
        bail!(Argument, "n_max = {n_max} exceeds the Nyquist bound {}", n / 2);
    }
    let mut buf: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftNd::new(&vec![n; d]).forward(&mut buf);
    let h = 1.0 / n as f64;
    // h e^{-pi i k h} sinc(k h) for k = -n_max..=n_max
    let axis: Vec<Complex64> = (-(n_max as i64)..=n_max as i64)
        .map(|k| {
            let x = k as f64 * h;
            Complex64::from_polar(h * sinc(x), -PI * x)
        })
        .collect();
    let side = 2 * n_max + 1;
    let mut coefficients = Vec::with_capacity(side.pow(d as u32));
    for_each_index(d, n_max, |k, _| {
        let mut src = 0usize;
        let mut factor = Complex64::new(1.0, 0.0);
        for &a in k {
            src = src * n + a.rem_euclid(n as i64) as usize;
            factor *= axis[(a + n_max as i64) as usize];
        }
        coefficients.push(factor * buf[src]);
    });
    Ok(FourierSpectrum {
        d,
        n_max,
        cells_per_axis: n,
        coefficients,
    })
}

/// Statistics of `|mu_hat(n)|^2` over `b^{L-1} < |n| <= b^L`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandStat {
    pub band: u32,
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    /// `|n|` where the maximum is attained.
    pub argmax_norm: f64,
    /// Mean of `log |mu_hat|^2` and of `log |n|` over the resolved
    /// coefficients of the band.
    pub mean_log_power: f64,
    pub mean_log_norm: f64,
    pub resolved: usize,
}

/// Coefficients with `|mu_hat(n)|^2 <= RESOLUTION * mu_hat(0)^2` are treated
/// as exact zeros by the log statistics.
pub const RESOLUTION: f64 = 1e-28;

fn band_of(r: f64, b: f64) -> u32 {
    // smallest L >= 1 with r <= b^L
    let mut l = libm::ceil(libm::log(r) / libm::log(b)).max(1.0) as u32;
    while l > 1 && r <= libm::pow(b, (l - 1) as f64) {
        l -= 1;
    }
    while r > libm::pow(b, l as f64) {
        l += 1;
    }
    l
}

/// Band statistics of `power(n)`, `n != 0`, `|n| <= n_max`.
fn bands_from(d: usize, n_max: usize, b: u32, zero: f64, power: impl Fn(usize) -> f64) -> Vec<BandStat> {
    let bf = b as f64;
    let top = if n_max == 0 { 0 } else { band_of(n_max as f64, bf) };
    let mut stats: Vec<BandStat> = (1..=top)
        .map(|band| BandStat {
            band,
            count: 0,
            max: 0.0,
            mean: 0.0,
            argmax_norm: 0.0,
            mean_log_power: 0.0,
            mean_log_norm: 0.0,
            resolved: 0,
        })
        .collect();
    let floor = RESOLUTION * zero;
    for_each_index(d, n_max, |n, i| {
        let r = norm(n);
        if r == 0.0 || r > n_max as f64 {
            return;
        }
        let s = &mut stats[band_of(r, bf) as usize - 1];
        let p = power(i);
        s.count += 1;
        s.mean += p;
        if p > s.max || s.count == 1 {
            s.max = p;
            s.argmax_norm = r;
        }
        if p > floor {
            s.resolved += 1;
            s.mean_log_power += libm::log(p);
            s.mean_log_norm += libm::log(r);
        }
    });
    for s in &mut stats {
        if s.count > 0 {
            s.mean /= s.count as f64;
        }
        if s.resolved > 0 {
            s.mean_log_power /= s.resolved as f64;
            s.mean_log_norm /= s.resolved as f64;
        }
    }
    stats.retain(|s| s.count > 0);
    stats
}

pub fn band_statistics(spectrum: &FourierSpectrum, b: u32) -> Vec<BandStat> {
    let zero = spectrum.get(&vec![0; spectrum.d]).map_or(0.0, |c| c.norm_sqr());
    bands_from(spectrum.d, spectrum.n_max, b, zero, |i| {
        spectrum.coefficients[i].norm_sqr()
    })
}

/// Band statistics of the ensemble mean of `|mu_hat(n)|^2`.
pub fn ensemble_band_statistics(spectra: &[FourierSpectrum], b: u32) -> Result<Vec<BandStat>> {
    let Some(first) = spectra.first() else {
        bail!(Argument, "no spectra");
    };
    if spectra.iter().any(|s| s.d != first.d || s.n_max != first.n_max) {
        bail!(Argument, "spectra have different shapes");
    }
    let n = spectra.len() as f64;
    let mut power = vec![0.0; first.coefficients.len()];
    for s in spectra {
        for (p, c) in power.iter_mut().zip(&s.coefficients) {
            *p += c.norm_sqr() / n;
        }
    }
    let zero_idx = first.flat(&vec![0; first.d]).unwrap_or(0);
    Ok(bands_from(first.d, first.n_max, b, power[zero_idx], |i| power[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DimensionMethod {
    FourierEnsemble,
    FourierPathwise,
    Correlation,
    BoxCount,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// First and last band or level used in the fit.
    pub range: (u32, u32),
    pub method: DimensionMethod,
    /// Regression points `(x, y)`; the slope is `dy/dx`.
    pub points: Vec<(f64, f64)>,
    /// Set when the estimator had nothing to measure.
    pub degenerate: bool,
}

impl DimensionEstimate {
    /// Mean slope over independent estimates, with the standard error of
    /// the mean.
    pub fn aggregate(items: &[DimensionEstimate]) -> Result<DimensionEstimate> {
        let Some(first) = items.first() else {
            bail!(Argument, "nothing to aggregate");
        };
        let n = items.len() as f64;
        let slope = items.iter().map(|e| e.slope).sum::<f64>() / n;
        let intercept = items.iter().map(|e| e.intercept).sum::<f64>() / n;
        let stderr = if items.len() > 1 {
            let v = items.iter().map(|e| (e.slope - slope) * (e.slope - slope)).sum::<f64>() / (n - 1.0);
            libm::sqrt(v / n)
        } else {
            first.stderr
        };
        let mut points = first.points.clone();
        let same_shape = items.iter().all(|e| e.points.len() == points.len());
        if same_shape {
            for (k, p) in points.iter_mut().enumerate() {
                p.0 = items.iter().map(|e| e.points[k].0).sum::<f64>() / n;
                p.1 = items.iter().map(|e| e.points[k].1).sum::<f64>() / n;
            }
        }
        Ok(DimensionEstimate {
            slope,
            intercept,
            stderr,
            range: first.range,
            method: first.method,
            points,
            degenerate: items.iter().any(|e| e.degenerate),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FourierMode {
    EnsembleMean,
    PathwiseMax,
}

/// Bands dropped from each end before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandTrim {
    pub low: usize,
    pub high: usize,
}

impl Default for BandTrim {
    fn default() -> Self {
        Self { low: 1, high: 1 }
    }
}

fn trimmed(stats: &[BandStat], trim: BandTrim) -> Result<&[BandStat]> {
    if stats.len() < trim.low + trim.high + 3 {
        bail!(
            Argument,
            "{} bands leave fewer than 3 after trimming {} + {}",
            stats.len(),
            trim.low,
            trim.high
        );
    }
    Ok(&stats[trim.low..stats.len() - trim.high])
}

fn fit(points: Vec<(f64, f64)>, range: (u32, u32), method: DimensionMethod) -> Result<DimensionEstimate> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(DimensionEstimate {
        slope: line.slope,
        intercept: line.intercept,
        stderr: line.stderr,
        range,
        method,
        points,
        degenerate: false,
    })
}

/// Decay exponent `D` in `|mu_hat(n)|^2 ~ |n|^{-D}`.
///
/// Ensemble-mean averages `|mu_hat|^2` over the spectra and regresses the
/// band mean of `-log |mu_hat|^2` on the band mean of `log |n|`.
/// Pathwise-max regresses `-log max` on `log |argmax|` per spectrum and
/// averages the slopes.
pub fn estimate_fourier_dim(
    spectra: &[FourierSpectrum],
    b: u32,
    mode: FourierMode,
    trim: BandTrim,
) -> Result<DimensionEstimate> {
    let Some(first) = spectra.first() else {
        bail!(Argument, "no spectra");
    };
    if spectra.iter().any(|s| s.d != first.d || s.n_max != first.n_max) {
        bail!(Argument, "spectra have different shapes");
    }
    match mode {
        FourierMode::EnsembleMean => {
            let stats = ensemble_band_statistics(spectra, b)?;
            let used = trimmed(&stats, trim)?;
            if used.iter().any(|s| s.resolved == 0) {
                bail!(Numeric, "a fitted band has no resolved coefficients");
            }
            let points = used.iter().map(|s| (s.mean_log_norm, -s.mean_log_power)).collect();
            fit(
                points,
                (used[0].band, used[used.len() - 1].band),
                DimensionMethod::FourierEnsemble,
            )
        }
        FourierMode::PathwiseMax => {
            let mut each = Vec::with_capacity(spectra.len());
            for s in spectra {
                let stats = band_statistics(s, b);
                let used = trimmed(&stats, trim)?;
                // null measures (e.g. fully covered samples) carry no decay information
                if used.iter().any(|s| !(s.max > 0.0)) {
                    continue;
                }
                let points = used
                    .iter()
                    .map(|s| (libm::log(s.argmax_norm), -libm::log(s.max)))
                    .collect();
                each.push(fit(
                    points,
                    (used[0].band, used[used.len() - 1].band),
                    DimensionMethod::FourierPathwise,
                )?);
            }
            if each.is_empty() {
                bail!(Numeric, "every spectrum vanishes on a fitted band");
            }
            DimensionEstimate::aggregate(&each)
        }
    }
}

/// `(sum_{0 < |n| <= n_max} (|n|^{tau/2} |mu_hat(n)|)^q)^{1/q}`.
pub fn weighted_lq_norm(spectrum: &FourierSpectrum, tau: f64, q: f64) -> f64 {
    let cap = spectrum.n_max as f64;
    let mut sum = 0.0;
    spectrum.for_each(|n, c| {
        let r = norm(n);
        if r > 0.0 && r <= cap {
            sum += libm::pow(libm::pow(r, tau / 2.0) * c.norm(), q);
        }
    });
    libm::pow(sum, 1.0 / q)
}

/// Parameters of the weighted `l^q` martingale diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MartingaleParams {
    pub tau: f64,
    pub p: f64,
    pub q: f64,
    pub p0: f64,
    pub alpha0: f64,
    /// Lower bound on the Fourier dimension of the model.
    pub lf: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MartingaleLevel {
    pub m: u32,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MartingaleReport {
    pub levels: Vec<MartingaleLevel>,
    pub first_third: (f64, f64),
    pub last_third: (f64, f64),
    pub bounded: bool,
    pub warnings: Vec<alloc::string::String>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Ensemble estimates of `E ||M_m||^p` for `m` in `levels`, where `M_m` is
/// the sequence `|n|^{tau/2} mu_hat_m(n)`. The verdict compares the mean over
/// the last third of the levels with the first third, per sample.
pub fn martingale_diagnostic(
    sampler: &dyn MeasureSampler,
    params: MartingaleParams,
    levels: core::ops::RangeInclusive<u32>,
    samples: u64,
    master_seed: u64,
) -> Result<MartingaleReport> {
    let MartingaleParams {
        tau,
        p,
        q,
        p0,
        alpha0,
        lf,
    } = params;
    let d = sampler.grid().d() as f64;
    if !(tau >= 0.0) || !(2.0 * alpha0 > tau) {
        bail!(Argument, "need 0 <= tau < 2 alpha0, got tau = {tau}, alpha0 = {alpha0}");
    }
    let q_floor = f64::max(2.0, 2.0 * d / (2.0 * alpha0 - tau));
    if !(1.0 < p && p <= p0 && p0 <= q_floor && q_floor < q && q.is_finite()) {
        bail!(
            Argument,
            "need 1 < p <= p0 <= {q_floor} < q, got p = {p}, p0 = {p0}, q = {q}"
        );
    }
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo > hi || hi > sampler.level() || hi - lo < 2 {
        bail!(
            Argument,
            "level range {lo}..={hi} needs three levels within 0..={}",
            sampler.level()
        );
    }
    if samples < 2 {
        bail!(Argument, "need at least two samples");
    }
    let mut warnings = Vec::new();
    if tau >= lf {
        warnings.push(alloc::format!(
            "tau = {tau} is not below the Fourier dimension bound {lf}"
        ));
    }
    let count = (hi - lo + 1) as usize;
    let third = count.div_ceil(3);
    let n_max = sampler.grid().cells_per_axis() / 2;
    let mut per_level: Vec<Vec<f64>> = vec![Vec::with_capacity(samples as usize); count];
    let mut first = Vec::with_capacity(samples as usize);
    let mut last = Vec::with_capacity(samples as usize);
    for s in 0..samples {
        let mut values = Vec::with_capacity(count);
        let mut err = None;
        let mut m = 0u32;
        sampler.sample_levels(master_seed, s, &mut |field| {
            if m >= lo && m <= hi && err.is_none() {
                match fourier_coefficients(field, n_max) {
                    Ok(spec) => values.push(libm::pow(weighted_lq_norm(&spec, tau, q), p)),
                    Err(e) => err = Some(e),
                }
            }
            m += 1;
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        for (k, v) in values.iter().enumerate() {
            per_level[k].push(*v);
        }
        first.push(values[..third].iter().sum::<f64>() / third as f64);
        last.push(values[count - third..].iter().sum::<f64>() / third as f64);
    }
    let levels = per_level
        .iter()
        .enumerate()
        .map(|(k, xs)| {
            let (mean, stderr) = mean_se(xs);
            MartingaleLevel {
                m: lo + k as u32,
                mean,
                stderr,
            }
        })
        .collect();
    let first_third = mean_se(&first);
    let last_third = mean_se(&last);
    let combined = libm::sqrt(first_third.1 * first_third.1 + last_third.1 * last_third.1);
    let bounded = last_third.0 - first_third.0 <= 3.0 * combined;
    Ok(MartingaleReport {
        levels,
        first_third,
        last_third,
        bounded,
        warnings,
    })
}

fn check_levels(levels: &[u32], max: u32) -> Result<()> {
    if levels.len() < 3 {
        bail!(Argument, "need at least 3 levels, got {}", levels.len());
    }
    if levels.iter().any(|&k| k > max) {
        bail!(Argument, "levels must not exceed the grid level {max}");
    }
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != levels.len() {
        bail!(Argument, "levels must be distinct");
    }
    Ok(())
}

/// Slope of `log S_2(delta)` against `log delta`, with
/// `S_2(b^{-k}) = sum over level-k cells of nu(cell)^2`.
pub fn correlation_dim(field: &DensityField, levels: &[u32]) -> Result<DimensionEstimate> {
    let grid = field.grid();
    check_levels(levels, grid.level())?;
    let lb = libm::log(grid.b() as f64);
    let mut points = Vec::with_capacity(levels.len());
    for &k in levels {
        let s2: f64 = field.cell_masses(k)?.iter().map(|x| x * x).sum();
        if !(s2 > 0.0) {
            bail!(Numeric, "the field carries no mass");
        }
        points.push((-(k as f64) * lb, libm::log(s2)));
    }
    fit(
        points,
        (*levels.iter().min().unwrap_or(&0), *levels.iter().max().unwrap_or(&0)),
        DimensionMethod::Correlation,
    )
}

/// Slope of `log N(delta)` against `log(1/delta)` for the occupied cells.
pub fn box_dim_mask(mask: &CellMask, levels: &[u32]) -> Result<DimensionEstimate> {
    let grid = mask.grid();
    check_levels(levels, grid.level())?;
    let range = (*levels.iter().min().unwrap_or(&0), *levels.iter().max().unwrap_or(&0));
    if mask.count() == 0 {
        return Ok(DimensionEstimate {
            slope: 0.0,
            intercept: 0.0,
            stderr: 0.0,
            range,
            method: DimensionMethod::BoxCount,
            points: Vec::new(),
            degenerate: true,
        });
    }
    let lb = libm::log(grid.b() as f64);
    let mut points = Vec::with_capacity(levels.len());
    for &k in levels {
        points.push((k as f64 * lb, libm::log(mask.occupied(k)? as f64)));
    }
    fit(points, range, DimensionMethod::BoxCount)
}
