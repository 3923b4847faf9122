//! Numerical certificates for layer decompositions and kernels.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::{KernelDecomposition, RadialProfile};
use crate::error::{bail, Result};
use crate::grid::BAdicGrid;
use crate::math::fft::FftNd;
use crate::math::linalg::symmetric_eigenvalues;
use crate::math::Complex64;

/// Outcome of one condition check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub pass: bool,
    pub worst_value: f64,
    /// Human-readable location of the worst value, e.g. `j=3 r=0.0625`.
    pub worst_location: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaTolerances {
    /// Allowed `|K_j(0) - log b|` for the constant-variance condition.
    pub variance: f64,
    /// Allowed distance of the tail `K_j(0)` from `log b`.
    pub limsup: f64,
    /// Absolute bound on the rescaled regularity ratio.
    pub ratio_bound: f64,
    /// Allowed growth of the ratio from the coarser to the finer half of the mesh.
    pub growth_factor: f64,
    /// Mesh depth `k` in `r = b^{-j} 2^{-k}`.
    pub mesh_depth: u32,
}

impl Default for SigmaTolerances {
    fn default() -> Self {
        Self {
            variance: 1e-10,
            limsup: 1e-6,
            ratio_bound: 1e6,
            growth_factor: 2.0,
            mesh_depth: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaReport {
    pub alpha0: f64,
    pub j0: u32,
    pub j_max: u32,
    /// Shrinking support.
    pub h1: ConditionReport,
    /// Tail variance tends to `log b`.
    pub h2: ConditionReport,
    /// Variance equals `log b` from `j0` on.
    pub h2_sharp: ConditionReport,
    /// Rescaled regularity at the origin.
    pub h3: ConditionReport,
    /// `0 <= K_j(t) <= K_j(0)` on the mesh.
    pub bounds: ConditionReport,
}

impl SigmaReport {
    pub fn passes(&self) -> bool {
        self.h1.pass && self.h2.pass && self.h2_sharp.pass && self.h3.pass && self.bounds.pass
    }
}

fn loc(j: u32, r: f64) -> String {
    alloc::format!("j={j} r={r:e}")
}

/// Checks shrinking support, variance and rescaled regularity of layers
/// `0..=j_max` on the geometric mesh `b^{-j} 2^{-k}`.
pub fn check_sigma_regular(
    decomp: &dyn KernelDecomposition,
    alpha0: f64,
    j_max: u32,
    tol: SigmaTolerances,
) -> SigmaReport {
    let b = decomp.base() as f64;
    let lb = libm::log(b);
    let j0 = decomp.j0();

    let mut h1 = (0.0f64, String::from("none"));
    let mut violations = 0usize;
    let mut bounds = (0.0f64, String::from("none"));
    let mut h3_rows: Vec<(f64, u32, f64)> = Vec::new();
    let mut var_err = (0.0f64, String::from("none"));
    let mut h3_by_k = alloc::vec![0.0f64; tol.mesh_depth as usize + 1];

    for j in 0..=j_max {
        let c = libm::pow(b, -(j as f64));
        let k0 = decomp.variance(j);
        if j >= j0 {
            for k in 0..=16 {
                let r = c * (1.0 + libm::pow(2.0, -(k as f64)) * (if k == 16 { 1e-3 } else { 1.0 }));
                let v = libm::fabs(decomp.layer(j, r));
                if v > 1e-14 {
                    violations += 1;
                }
                if v >= h1.0 && v > 0.0 {
                    h1 = (v, loc(j, r));
                }
            }
            let e = libm::fabs(k0 - lb);
            if e >= var_err.0 {
                var_err = (e, loc(j, 0.0));
            }
        }
        for k in 0..=tol.mesh_depth {
            let r = c * libm::pow(2.0, -(k as f64));
            let kt = decomp.layer(j, r);
            let over = (kt - k0).max(-kt).max(0.0);
            if over > 1e-12 && over > bounds.0 {
                bounds = (over, loc(j, r));
            }
            let ratio = libm::fabs(decomp.deficit(j, r)) / libm::pow(libm::pow(b, j as f64) * r, 2.0 * alpha0);
            h3_by_k[k as usize] = h3_by_k[k as usize].max(ratio);
            h3_rows.push((ratio, j, r));
        }
    }

    let tail_start = j_max / 2;
    let tail_max = (tail_start..=j_max)
        .map(|j| decomp.variance(j))
        .fold(f64::MIN, f64::max);
    let h2 = ConditionReport {
        pass: libm::fabs(tail_max - lb) <= tol.limsup,
        worst_value: tail_max,
        worst_location: alloc::format!("j in {tail_start}..={j_max}"),
    };

    let (worst, wj, wr) = h3_rows
        .iter()
        .copied()
        .fold((f64::MIN, 0, 0.0), |a, x| if x.0 > a.0 { x } else { a });
    let half = h3_by_k.len() / 2;
    let coarse = h3_by_k[..half].iter().copied().fold(0.0, f64::max);
    let fine = h3_by_k[half..].iter().copied().fold(0.0, f64::max);
    let h3_pass =
        worst.is_finite() && worst <= tol.ratio_bound && fine <= tol.growth_factor * coarse.max(f64::MIN_POSITIVE);

    SigmaReport {
        alpha0,
        j0,
        j_max,
        h1: ConditionReport {
            pass: violations == 0,
            worst_value: h1.0,
            worst_location: h1.1,
        },
        h2,
        h2_sharp: ConditionReport {
            pass: var_err.0 <= tol.variance,
            worst_value: var_err.0,
            worst_location: var_err.1,
        },
        h3: ConditionReport {
            pass: h3_pass,
            worst_value: worst,
            worst_location: loc(wj, wr),
        },
        bounds: ConditionReport {
            pass: bounds.0 == 0.0,
            worst_value: bounds.0,
            worst_location: bounds.1,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsdReport {
    pub pass: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Index of the most negative eigenvalue (frequency or matrix index).
    pub worst_index: usize,
}

fn psd_verdict(ev: &[f64], rel_tol: f64) -> PsdReport {
    let (mut lo, mut hi, mut wi) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for (i, &v) in ev.iter().enumerate() {
        if v < lo {
            lo = v;
            wi = i;
        }
        hi = hi.max(v);
    }
    PsdReport {
        pass: lo >= -rel_tol * hi.max(0.0),
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        worst_index: wi,
    }
}

/// Spectrum of a stationary kernel sampled at `(k_1 h, ..., k_d h)` on a
/// torus of `2n` points per axis, where `n h` must cover the kernel support.
/// Larger `n h` resolves the spectrum on a finer frequency lattice.
pub fn check_positive_definite(kernel: &dyn Fn(&[f64]) -> f64, d: usize, n: usize, h: f64, rel_tol: f64) -> PsdReport {
    let l = 2 * n;
    let dims = alloc::vec![l; d];
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
        buf.push(Complex64::new(kernel(&off), 0.0));
    }
    FftNd::new(&dims).forward(&mut buf);
    let ev: Vec<f64> = buf.iter().map(|c| c.re).collect();
    psd_verdict(&ev, rel_tol)
}

/// Smallest eigenvalue of the dense matrix `[k(t_i, t_j)]` over cell centers.
pub fn check_positive_definite_dense(
    kernel: &dyn Fn(&[f64], &[f64]) -> f64,
    grid: &BAdicGrid,
    rel_tol: f64,
) -> Result<PsdReport> {
    let n = grid.cell_count();
    if n > 1024 {
        return Err(crate::error::Error::Resource {
            what: "dense kernel matrix rows",
            requested: n as u128,
            limit: 1024,
        });
    }
    let a = kernel_matrix(kernel, grid);
    let ev = symmetric_eigenvalues(&a, n)?;
    Ok(psd_verdict(&ev, rel_tol))
}

/// Kernel matrix over the cell centers, row-major.
pub fn kernel_matrix(kernel: &dyn Fn(&[f64], &[f64]) -> f64, grid: &BAdicGrid) -> Vec<f64> {
    let n = grid.cell_count();
    let centers: Vec<Vec<f64>> = (0..n).map(|i| grid.cell_center(&grid.multi_index(i))).collect();
    let mut a = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&centers[i], &centers[j]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

type Kernel2 = Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// `R_lambda(t, s) = lambda + G(t, s) - g(|t - s|)`.
pub struct RemainderKernel {
    g_kernel: Kernel2,
    profile: alloc::sync::Arc<RadialProfile>,
    lambda: f64,
}

impl RemainderKernel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn evaluate(&self, t: &[f64], s: &[f64]) -> f64 {
        let r = libm::sqrt(t.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        self.lambda + (self.g_kernel)(t, s) - self.profile.g_table(r.min(1.0))
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

pub fn remainder_kernel(
    g_kernel: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    profile: alloc::sync::Arc<RadialProfile>,
    lambda: f64,
) -> RemainderKernel {
    RemainderKernel {
        g_kernel: Box::new(g_kernel),
        profile,
        lambda,
    }
}

/// Smallest `lambda` in `[lo, hi]` (to `tol`) making `R_lambda` positive
/// semidefinite on the grid, or `None` if `hi` does not.
pub fn psd_threshold(kernel: &RemainderKernel, grid: &BAdicGrid, lo: f64, hi: f64, tol: f64) -> Result<Option<f64>> {
    if !(lo < hi) {
        bail!(Argument, "empty bracket [{lo}, {hi}]");
    }
    let n = grid.cell_count();
    if n > 1024 {
        return Err(crate::error::Error::Resource {
            what: "dense kernel matrix rows",
            requested: n as u128,
            limit: 1024,
        });
    }
    let base = kernel_matrix(&|t, s| kernel.evaluate(t, s) - kernel.lambda, grid);
    let ok = |lam: f64| -> Result<bool> {
        let a: Vec<f64> = base.iter().map(|x| x + lam).collect();
        let ev = symmetric_eigenvalues(&a, n)?;
        Ok(psd_verdict(&ev, 1e-10).pass)
    };
    if !ok(hi)? {
        return Ok(None);
    }
    if ok(lo)? {
        return Ok(Some(lo));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if ok(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(Some(b))
}
