//! Layer decompositions `K = sum_j K_j` of log-correlated kernels.
//!
//! Every built-in decomposition is radial, so layers are evaluated on the
//! offset norm `r = |t|`.

use alloc::boxed::Box;

mod checks;
mod exact_log;
mod profile;
mod star_scale;

pub use checks::{
    check_positive_definite, check_positive_definite_dense, check_sigma_regular, kernel_matrix, psd_threshold,
    remainder_kernel, ConditionReport, PsdReport, RemainderKernel, SigmaReport, SigmaTolerances,
};
pub use exact_log::{exact_log_deficit, exact_log_layer, ExactLog};
pub use profile::{bump_selfconvolve, g_correction, Bump, ExpBump, RadialProfile};
pub use star_scale::{star_scale_layer, StarScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum KernelKind {
    ExactLog,
    StarScale,
    Custom,
}

/// A family `j -> K_j` of stationary, radial, nonnegative layers.
pub trait KernelDecomposition: Send + Sync {
    fn kind(&self) -> KernelKind;
    fn base(&self) -> u32;
    /// Spatial dimension the layers are defined on.
    fn dim(&self) -> usize;
    /// `K_j(t)` for `|t| = r`.
    fn layer(&self, j: u32, r: f64) -> f64;
    /// `K_j(0) - K_j(t)`, which implementations may compute without cancellation.
    fn deficit(&self, j: u32, r: f64) -> f64 {
        self.layer(j, 0.0) - self.layer(j, r)
    }
    fn variance(&self, j: u32) -> f64 {
        self.layer(j, 0.0)
    }
    fn support_radius(&self, j: u32) -> f64;
    /// First index from which the shrinking-support and constant-variance
    /// conditions are claimed.
    fn j0(&self) -> u32 {
        1
    }
}

/// One layer of a decomposition.
#[derive(Clone, Copy)]
pub struct LayerKernel<'a> {
    pub decomposition: &'a dyn KernelDecomposition,
    pub j: u32,
}

impl LayerKernel<'_> {
    pub fn evaluate(&self, t: &[f64]) -> f64 {
        let r = libm::sqrt(t.iter().map(|x| x * x).sum::<f64>());
        self.decomposition.layer(self.j, r)
    }

    pub fn variance(&self) -> f64 {
        self.decomposition.variance(self.j)
    }

    pub fn support_radius(&self) -> f64 {
        self.decomposition.support_radius(self.j)
    }
}

type LayerFn = Box<dyn Fn(u32, f64) -> f64 + Send + Sync>;
type SupportFn = Box<dyn Fn(u32) -> f64 + Send + Sync>;

/// A decomposition given by closures.
pub struct CustomDecomposition {
    b: u32,
    d: usize,
    layer: LayerFn,
    support: SupportFn,
}

impl CustomDecomposition {
    pub fn new(
        b: u32,
        d: usize,
        layer: impl Fn(u32, f64) -> f64 + Send + Sync + 'static,
        support: impl Fn(u32) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            b,
            d,
            layer: Box::new(layer),
            support: Box::new(support),
        }
    }
}

impl KernelDecomposition for CustomDecomposition {
    fn kind(&self) -> KernelKind {
        KernelKind::Custom
    }
    fn base(&self) -> u32 {
        self.b
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn layer(&self, j: u32, r: f64) -> f64 {
        (self.layer)(j, r)
    }
    fn support_radius(&self, j: u32) -> f64 {
        (self.support)(j)
    }
}
