use alloc::sync::Arc;

use super::{KernelDecomposition, KernelKind, RadialProfile};

/// `K_j(t) = int_{b^j}^{b^{j+1}} f(u|t|) du/u`, written as
/// `log b + F(b^{j+1}|t|) - F(b^j|t|)` with `F` the profile's log integral.
pub fn star_scale_layer(profile: &RadialProfile, b: u32, j: u32, t: f64) -> f64 {
    let x = libm::fabs(t);
    let bf = b as f64;
    let lo = libm::pow(bf, j as f64) * x;
    if lo >= profile.support() {
        return 0.0;
    }
    libm::log(bf) + profile.log_integral(bf * lo) - profile.log_integral(lo)
}

#[derive(Debug, Clone)]
pub struct StarScale {
    pub b: u32,
    pub profile: Arc<RadialProfile>,
}

impl StarScale {
    pub fn new(b: u32, profile: Arc<RadialProfile>) -> Self {
        Self { b, profile }
    }
}

impl KernelDecomposition for StarScale {
    fn kind(&self) -> KernelKind {
        KernelKind::StarScale
    }
    fn base(&self) -> u32 {
        self.b
    }
    fn dim(&self) -> usize {
        self.profile.dim()
    }
    fn layer(&self, j: u32, r: f64) -> f64 {
        star_scale_layer(&self.profile, self.b, j, r)
    }
    fn deficit(&self, j: u32, r: f64) -> f64 {
        let bf = self.b as f64;
        let lo = libm::pow(bf, j as f64) * libm::fabs(r);
        if lo >= self.profile.support() {
            return libm::log(bf);
        }
        self.profile.log_integral(lo) - self.profile.log_integral(bf * lo)
    }
    fn support_radius(&self, j: u32) -> f64 {
        self.profile.support() * libm::pow(self.b as f64, -(j as f64))
    }
    fn j0(&self) -> u32 {
        0
    }
}
