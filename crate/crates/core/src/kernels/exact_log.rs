use super::{KernelDecomposition, KernelKind};

/// Layer `j` of the exact logarithmic kernel in one dimension:
/// `int_{(b^{-(j+1)}, b^{-j}]} (u - |t|)_+ du/u^2`, plus `(1 - |t|)_+` at `j = 0`.
pub fn exact_log_layer(b: u32, j: u32, t: f64) -> f64 {
    let x = libm::fabs(t);
    let bf = b as f64;
    let c = libm::pow(bf, -(j as f64));
    let a = c / bf;
    let band = if x <= a {
        libm::log(bf) + x / c - x / a
    } else if x <= c {
        libm::log(c / x) + x / c - 1.0
    } else {
        0.0
    };
    if j == 0 {
        band + (1.0 - x).max(0.0)
    } else {
        band
    }
}

/// `K_j(0) - K_j(t)` for the exact logarithmic layer.
pub fn exact_log_deficit(b: u32, j: u32, t: f64) -> f64 {
    let x = libm::fabs(t);
    let bf = b as f64;
    let c = libm::pow(bf, -(j as f64));
    let a = c / bf;
    let band = if x <= a {
        x / a - x / c
    } else if x <= c {
        libm::log(bf) - libm::log(c / x) - x / c + 1.0
    } else {
        libm::log(bf)
    };
    if j == 0 {
        band + x.min(1.0)
    } else {
        band
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLog {
    pub b: u32,
}

impl KernelDecomposition for ExactLog {
    fn kind(&self) -> KernelKind {
        KernelKind::ExactLog
    }
    fn base(&self) -> u32 {
        self.b
    }
    fn dim(&self) -> usize {
        1
    }
    fn layer(&self, j: u32, r: f64) -> f64 {
        exact_log_layer(self.b, j, r)
    }
    fn deficit(&self, j: u32, r: f64) -> f64 {
        exact_log_deficit(self.b, j, r)
    }
    fn support_radius(&self, j: u32) -> f64 {
        libm::pow(self.b as f64, -(j as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::quad::integrate;

    #[test]
    fn variance_and_support() {
        assert!((exact_log_layer(2, 3, 0.0) - libm::log(2.0)).abs() < 1e-15);
        assert_eq!(exact_log_layer(2, 1, 0.5), 0.0);
        assert_eq!(exact_log_layer(2, 4, 0.07), 0.0);
        assert!((exact_log_layer(3, 0, 0.0) - libm::log(3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_sum_against_quadrature() {
        let t = 1.0 / 27.0;
        let sum: f64 = (0..=2).map(|j| exact_log_layer(3, j, t)).sum();
        let (q, _) = integrate(|u| (u - t).max(0.0) / (u * u), t, 1.0, 1e-13, 0.0).unwrap();
        let q = q + (1.0 - t);
        assert!((sum - q).abs() < 1e-10);
        assert!((sum - libm::log(27.0)).abs() < 1e-12);
    }

    #[test]
    fn deficit_matches_difference() {
        for j in 0..5 {
            for k in 0..40 {
                let t = libm::pow(2.0, -(k as f64) / 4.0);
                let d = exact_log_deficit(2, j, t);
                let e = exact_log_layer(2, j, 0.0) - exact_log_layer(2, j, t);
                assert!((d - e).abs() < 1e-13, "j={j} t={t}");
            }
        }
    }
}
