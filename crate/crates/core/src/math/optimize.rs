//! One-dimensional maximization.

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Supremum of `f` over `[lo, hi]`: scan `points` equispaced values, then
/// refine the best bracket by golden section. Endpoints are always included.
pub fn grid_golden_sup<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64) {
    let n = points.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let xs = |i: usize| if i + 1 == n { hi } else { lo + step * i as f64 };
    let mut best = (lo, f(lo));
    let mut best_i = 0;
    for i in 1..n {
        let x = xs(i);
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let a = xs(best_i.saturating_sub(1));
    let b = xs((best_i + 1).min(n - 1));
    let refined = golden_max(&mut f, a, b, tol);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}
