//! Ordinary least squares for a line.

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for two points or exact fits.
    pub stderr: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() {
        bail!(Argument, "{} abscissae and {} ordinates", n, ys.len());
    }
    if n < 2 {
        bail!(Argument, "a line fit needs at least two points, got {n}");
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        bail!(Argument, "abscissae are all equal");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ssr = 0.0;
    let mut max_residual: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ssr += r * r;
        max_residual = max_residual.max(libm::fabs(r));
    }
    let stderr = if n > 2 { libm::sqrt(ssr / (nf - 2.0) / sxx) } else { 0.0 };
    if !slope.is_finite() || !intercept.is_finite() {
        bail!(Numeric, "non-finite regression coefficients");
    }
    Ok(LineFit {
        slope,
        intercept,
        stderr,
        max_residual,
    })
}
