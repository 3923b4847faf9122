//! Numerical building blocks.

pub mod fft;
pub mod linalg;
pub mod optimize;
pub mod quad;
pub mod regress;

pub use num_complex::Complex64;

/// Harmonic number `H_n = sum_{k=1}^n 1/k`, exact summation below a
/// threshold and the asymptotic series above it.
pub fn harmonic(n: u64) -> f64 {
    const DIRECT: u64 = 1 << 16;
    if n <= DIRECT {
        let mut s = 0.0;
        for k in (1..=n).rev() {
            s += 1.0 / k as f64;
        }
        return s;
    }
    let x = n as f64;
    let x2 = x * x;
    libm::log(x) + 0.577_215_664_901_532_9 + 0.5 / x - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
        - 1.0 / (252.0 * x2 * x2 * x2)
}
