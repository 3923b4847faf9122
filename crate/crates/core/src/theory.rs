//! Closed-form dimension predictions and the numeric supremum over `p`.

use alloc::sync::Arc;

use crate::cascades::WeightLaw;
use crate::error::{bail, Result};
use crate::math::optimize::grid_golden_sup;

/// `D_{gamma,d}`: `d - gamma^2` below `sqrt(2d)/2`, `(sqrt(2d) - gamma)^2` above.
pub fn d_gamma(gamma: f64, d: usize) -> Result<f64> {
    let c = libm::sqrt(2.0 * d as f64);
    if !(gamma > 0.0 && gamma < c) {
        bail!(Argument, "gamma = {gamma} outside (0, sqrt(2d)) for d = {d}");
    }
    Ok(if gamma < c / 2.0 {
        d as f64 - gamma * gamma
    } else {
        (c - gamma) * (c - gamma)
    })
}

/// `D_sigma` of the geometric Brownian cascade.
pub fn d_sigma(sigma: f64, b: u32) -> Result<f64> {
    let lb = libm::log(b as f64);
    let c = libm::sqrt(2.0 * lb);
    if !(sigma > 0.0 && sigma < c) {
        bail!(Argument, "sigma = {sigma} outside (0, sqrt(2 log b)) for b = {b}");
    }
    Ok(if sigma < c / 2.0 {
        1.0 - sigma * sigma / lb
    } else {
        let r = core::f64::consts::SQRT_2 - sigma / libm::sqrt(lb);
        r * r
    })
}

/// `p -> limsup_j sup_t E[P_j(t)^p]` for each model.
#[derive(Clone)]
pub enum MomentProfile {
    Gmc { gamma: f64 },
    Mrc { chi: f64 },
    Pmc { a: f64, chi: f64 },
    Cascade(WeightLaw),
    Custom(Arc<dyn Fn(f64, u32) -> f64 + Send + Sync>),
}

impl core::fmt::Debug for MomentProfile {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Gmc { gamma } => write!(f, "Gmc {{ gamma: {gamma} }}"),
            Self::Mrc { chi } => write!(f, "Mrc {{ chi: {chi} }}"),
            Self::Pmc { a, chi } => write!(f, "Pmc {{ a: {a}, chi: {chi} }}"),
            Self::Cascade(w) => write!(f, "Cascade({w:?})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl MomentProfile {
    pub fn value(&self, p: f64, b: u32) -> f64 {
        let lb = libm::log(b as f64);
        match self {
            Self::Gmc { gamma } => libm::exp(gamma * gamma * p * (p - 1.0) / 2.0 * lb),
            Self::Mrc { chi } => libm::exp((p - 1.0) * chi * lb),
            Self::Pmc { a, chi } => libm::exp((libm::pow(*a, p) - a * p + p - 1.0) * chi * lb),
            Self::Cascade(w) => w.sup_moment(p),
            Self::Custom(f) => f(p, b),
        }
    }
}

/// `Theta(p) = d(p-1) log b - log profile(p)`.
pub fn theta(p: f64, profile: &MomentProfile, b: u32, d: usize) -> Result<f64> {
    if !(p > 1.0) {
        bail!(Argument, "theta needs p > 1, got {p}");
    }
    let m = profile.value(p, b);
    if !(m > 0.0) || !m.is_finite() {
        bail!(Numeric, "moment profile is {m} at p = {p}");
    }
    Ok(d as f64 * (p - 1.0) * libm::log(b as f64) - libm::log(m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LfBound {
    /// `min(2 alpha0, sup)`.
    pub value: f64,
    /// `sup_{1<p<=p0} 2 Theta(p) / (p log b)`.
    pub sup: f64,
    pub argmax_p: f64,
}

/// Number of equispaced points scanned before golden-section refinement.
pub const P_GRID_POINTS: usize = 512;

/// `sup_{1 < p <= p0} 2 Theta(p)/(p log b)` by grid scan plus golden section.
pub fn sup_theta_ratio(profile: &MomentProfile, b: u32, d: usize, p0: f64) -> Result<(f64, f64)> {
    if !(p0 > 1.0) {
        bail!(Argument, "p0 must exceed 1, got {p0}");
    }
    let lb = libm::log(b as f64);
    let mut failure = None;
    let (p, v) = grid_golden_sup(
        |p| match theta(p, profile, b, d) {
            Ok(t) => 2.0 * t / (p * lb),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        1.0 + 1e-6,
        p0,
        P_GRID_POINTS,
        1e-12,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((p, v))
}

/// `L_F = min{2 alpha0, sup_{1<p<=p0} 2 Theta(p)/(p log b)}`.
pub fn lf_bound(alpha0: f64, p0: f64, profile: &MomentProfile, b: u32, d: usize) -> Result<LfBound> {
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        bail!(Argument, "alpha0 = {alpha0} outside (0, 1]");
    }
    if !(p0 > 1.0 && p0 <= 2.0) {
        bail!(Argument, "p0 = {p0} outside (1, 2]");
    }
    let (argmax_p, sup) = sup_theta_ratio(profile, b, d, p0)?;
    Ok(LfBound {
        value: sup.min(2.0 * alpha0),
        sup,
        argmax_p,
    })
}

/// Lower bound `min{2 alpha0, D_{gamma,d}}` for sub-critical GMC.
pub fn gmc_bound(gamma: f64, d: usize, alpha0: f64) -> Result<f64> {
    Ok(d_gamma(gamma, d)?.min(2.0 * alpha0))
}

/// Largest admissible `p0` for GMC: `min(2d/gamma^2, 2)`.
pub fn gmc_p0(gamma: f64, d: usize) -> f64 {
    (2.0 * d as f64 / (gamma * gamma)).min(2.0)
}

/// Covering bound `1 - chi` (MRC) or `1 - (1-a)^2 chi` (PMC), via the
/// numeric supremum with `alpha0 = 1/2`, `p0 = 2`.
pub fn covering_bound(chi: f64, a: Option<f64>, b: u32) -> Result<LfBound> {
    let profile = match a {
        None => MomentProfile::Mrc { chi },
        Some(a) => {
            if !(a > 0.0 && a < 1.0) {
                bail!(Argument, "a = {a} outside (0, 1)");
            }
            MomentProfile::Pmc { a, chi }
        }
    };
    lf_bound(0.5, 2.0, &profile, b, 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CascadeBound {
    pub value: f64,
    pub sup: f64,
    pub argmax_p: f64,
    /// The weight is almost surely 1, so there is no chaos.
    pub degenerate: bool,
}

/// `min{2 alpha0, sup_p [2d(1 - 1/p) - 2 log_b (sup_t E[W^p])^{1/p}]}`.
pub fn cascade_bound(law: &WeightLaw, b: u32, d: usize, alpha0: f64, p0: f64) -> Result<CascadeBound> {
    law.validate()?;
    let threshold = libm::pow(b as f64, d as f64 * (p0 - 1.0));
    let m = law.sup_moment(p0);
    if !(m < threshold) {
        bail!(
            Argument,
            "moment condition fails at p = {p0}: E[W^p] = {m} is not below b^(d(p-1)) = {threshold}"
        );
    }
    let lf = lf_bound(alpha0, p0, &MomentProfile::Cascade(law.clone()), b, d)?;
    Ok(CascadeBound {
        value: lf.value,
        sup: lf.sup,
        argmax_p: lf.argmax_p,
        degenerate: law.is_degenerate(),
    })
}
