//! Radial profiles `f(|t|)` and the bump self-convolution `Phi_h`.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::quad::{gk15, integrate_with_breaks, GaussLegendre};

/// A bump `h` on `[0, support]`, evaluated at `x = |t|^2`.
pub trait Bump: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn support(&self) -> f64;
}

/// `h(x) = exp(-left/x - right/(1/4 - x))` on `(0, 1/4)`, scaled so its
/// peak is 1; the scale cancels in the normalization. The default
/// `left = right = 4` is `exp(-1/(x(1/4 - x)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpBump {
    pub left: f64,
    pub right: f64,
}

impl Default for ExpBump {
    fn default() -> Self {
        Self { left: 4.0, right: 4.0 }
    }
}

impl ExpBump {
    pub fn new(left: f64, right: f64) -> crate::Result<Self> {
        if !(left > 0.0 && right > 0.0 && left.is_finite() && right.is_finite()) {
            bail!(Argument, "bump rates must be positive, got ({left}, {right})");
        }
        Ok(Self { left, right })
    }

    fn exponent(&self, x: f64) -> f64 {
        let (sl, sr) = (libm::sqrt(self.left), libm::sqrt(self.right));
        let peak = 0.25 * sl / (sl + sr);
        let at = |x: f64| self.left / x + self.right / (0.25 - x);
        at(peak) - at(x)
    }
}

impl Bump for ExpBump {
    fn value(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 0.25 {
            return 0.0;
        }
        libm::exp(self.exponent(x))
    }

    fn derivative(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 0.25 {
            return 0.0;
        }
        let r = 0.25 - x;
        self.value(x) * (self.left / (x * x) - self.right / (r * r))
    }

    fn support(&self) -> f64 {
        0.25
    }
}

/// Piecewise cubic Hermite radial profile on uniform knots over
/// `[0, support]`, zero beyond.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    d: usize,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    support: f64,
    // cumulative F(v_k) = int_0^{v_k} (f(u) - 1)/u du at the knots
    cum: Vec<f64>,
    second_order_bound: f64,
}

impl RadialProfile {
    /// Builds a profile from knot values and derivatives; `values[0]` must
    /// be 1. Derivatives are limited where needed to keep monotone data
    /// monotone.
    pub fn from_samples(d: usize, support: f64, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || derivs.len() != n {
            bail!(Argument, "need at least two knots with matching derivatives");
        }
        if !(support > 0.0 && support <= 1.0) {
            bail!(Argument, "support radius {support} outside (0, 1]");
        }
        if libm::fabs(values[0] - 1.0) > 1e-12 {
            bail!(Argument, "profile must equal 1 at the origin, got {}", values[0]);
        }
        if let Some(v) = values.iter().find(|v| !(**v >= -1e-14) || !v.is_finite()) {
            bail!(Argument, "profile value {v} is negative or not finite");
        }
        let step = support / (n - 1) as f64;
        let mut derivs = derivs;
        for k in 0..n - 1 {
            let delta = (values[k + 1] - values[k]) / step;
            if delta == 0.0 {
                derivs[k] = 0.0;
                derivs[k + 1] = 0.0;
                continue;
            }
            let a = derivs[k] / delta;
            let b = derivs[k + 1] / delta;
            if a < 0.0 {
                derivs[k] = 0.0;
            }
            if b < 0.0 {
                derivs[k + 1] = 0.0;
            }
            let (a, b) = (a.max(0.0), b.max(0.0));
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / libm::sqrt(s);
                derivs[k] = tau * a * delta;
                derivs[k + 1] = tau * b * delta;
            }
        }
        let mut p = Self {
            d,
            step,
            values,
            derivs,
            support,
            cum: Vec::new(),
            second_order_bound: 0.0,
        };
        let mut cum = alloc::vec![0.0; n];
        for k in 1..n {
            cum[k] = if k == 1 {
                p.first_segment_integral(step)
            } else {
                let lo = (k - 1) as f64 * step;
                let hi = k as f64 * step;
                cum[k - 1] + gk15(&mut |u| (p.value(u) - 1.0) / u, lo, hi).0
            };
        }
        p.cum = cum;
        let (m0, c2, c3) = p.first_segment_coefficients();
        let near_zero = if m0 != 0.0 {
            f64::INFINITY
        } else {
            libm::fabs(c2).max(libm::fabs(c2 + c3 * step))
        };
        p.second_order_bound = (1..n)
            .map(|k| {
                let v = k as f64 * step;
                libm::fabs(p.values[k] - 1.0) / (v * v)
            })
            .fold(near_zero, f64::max);
        Ok(p)
    }

    /// Samples `f` and `f'` on `knots` uniform knots.
    pub fn from_fn(
        d: usize,
        support: f64,
        knots: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let step = support / (knots.max(2) - 1) as f64;
        let xs = (0..knots.max(2)).map(|k| k as f64 * step);
        let values = xs.clone().map(&f).collect();
        let derivs = xs.map(&df).collect();
        Self::from_samples(d, support, values, derivs)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn knots(&self) -> usize {
        self.values.len()
    }

    /// `max_k |f(v_k) - 1| / v_k^2` over the knots.
    pub fn second_order_bound(&self) -> f64 {
        self.second_order_bound
    }

    pub fn value(&self, v: f64) -> f64 {
        let v = libm::fabs(v);
        if v >= self.support {
            return 0.0;
        }
        let s = v / self.step;
        let k = (s as usize).min(self.values.len() - 2);
        let u = s - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.derivs[k] * self.step, self.derivs[k + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
    }

    // p(v) = 1 + m0 v + c2 v^2 + c3 v^3 on the first segment
    fn first_segment_coefficients(&self) -> (f64, f64, f64) {
        let h = self.step;
        let m0 = self.derivs[0];
        let m1 = self.derivs[1];
        let f1 = self.values[1];
        let c2 = (3.0 * (f1 - 1.0) - h * (2.0 * m0 + m1)) / (h * h);
        let c3 = (2.0 * (1.0 - f1) + h * (m0 + m1)) / (h * h * h);
        (m0, c2, c3)
    }

    // exact integral of (p(u) - 1)/u on [0, v] inside the first segment
    fn first_segment_integral(&self, v: f64) -> f64 {
        let (m0, c2, c3) = self.first_segment_coefficients();
        v * (m0 + v * (c2 / 2.0 + v * c3 / 3.0))
    }

    /// `F(v) = int_0^v (f(u) - 1)/u du`, with `f = 0` beyond the support.
    pub fn log_integral(&self, v: f64) -> f64 {
        let v = libm::fabs(v);
        if v >= self.support {
            let last = *self.cum.last().expect("knots");
            return last - libm::log(v / self.support);
        }
        if v <= self.step {
            return self.first_segment_integral(v);
        }
        let k = ((v / self.step) as usize).min(self.values.len() - 1);
        let lo = k as f64 * self.step;
        if v == lo {
            return self.cum[k];
        }
        self.cum[k] + gk15(&mut |u| (self.value(u) - 1.0) / u, lo, v).0
    }

    /// `g(x) = int_x^1 (f(v) - 1)/v dv` from the cumulative table, `x >= 0`.
    pub fn g_table(&self, x: f64) -> f64 {
        self.log_integral(1.0) - self.log_integral(x)
    }
}

/// `g(x) = int_x^1 (f(v) - 1)/v dv` by adaptive Gauss–Kronrod.
pub fn g_correction(profile: &RadialProfile, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        bail!(Argument, "g is defined for x > 0, got {x}");
    }
    if x > 1.0 {
        bail!(Argument, "g is defined for x <= 1, got {x}");
    }
    let s = profile.support();
    let mut breaks = Vec::new();
    breaks.push(x);
    let coarse = 32.0 * profile.step;
    let mut v = (libm::floor(x / coarse) + 1.0) * coarse;
    while v < s.min(1.0) {
        breaks.push(v);
        v += coarse;
    }
    if s > x && s < 1.0 {
        breaks.push(s);
    }
    breaks.push(1.0);
    integrate_with_breaks(|u| (profile.value(u) - 1.0) / u, &breaks, 1e-13, 1e-13)
}

/// `Phi_h(t) = int h(|x - t|^2) h(|x|^2) dx` normalized to `Phi_h(0) = 1`,
/// tabulated with exact derivatives on `knots` points of `[0, 1]`.
pub fn bump_selfconvolve(h: &dyn Bump, d: usize, knots: usize) -> Result<RadialProfile> {
    if d == 0 {
        bail!(Argument, "dimension must be at least 1");
    }
    let s = h.support();
    if !(s > 0.0 && s <= 0.25) {
        bail!(Argument, "bump support {s} must lie in (0, 1/4]");
    }
    let mut nonzero = false;
    for k in 0..=400 {
        let x = 0.3 * k as f64 / 400.0;
        let v = h.value(x);
        if !(v >= 0.0) || !v.is_finite() {
            bail!(Argument, "bump is negative or not finite at {x}");
        }
        if x > s && v != 0.0 {
            bail!(Argument, "bump is nonzero at {x}, outside its declared support");
        }
        nonzero |= v > 0.0;
    }
    if !nonzero {
        bail!(Argument, "bump vanishes identically");
    }
    let rho = libm::sqrt(s);
    let gl = GaussLegendre::new(12);
    let panels = if d == 1 { 24 } else { 16 };
    let eval = |t: f64| -> (f64, f64) {
        if d == 1 {
            let lo = (-rho).max(t - rho);
            let hi = rho.min(t + rho);
            if lo >= hi {
                return (0.0, 0.0);
            }
            let mut cuts: Vec<f64> = [lo, 0.0, t, hi].into_iter().filter(|c| *c >= lo && *c <= hi).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let (mut v, mut dv) = (0.0, 0.0);
            for w in cuts.windows(2) {
                for (x, wt) in nodes(&gl, w[0], w[1], panels) {
                    let hx = h.value(x * x);
                    if hx == 0.0 {
                        continue;
                    }
                    let q = (x - t) * (x - t);
                    v += wt * h.value(q) * hx;
                    dv += wt * -2.0 * (x - t) * h.derivative(q) * hx;
                }
            }
            return (v, dv);
        }
        let rlo = (t - rho).max(0.0);
        if rlo >= rho {
            return (0.0, 0.0);
        }
        let theta = nodes(&gl, 0.0, core::f64::consts::PI, panels);
        let (mut v, mut dv) = (0.0, 0.0);
        for (r, wr) in nodes(&gl, rlo, rho, panels) {
            let hr = h.value(r * r);
            if hr == 0.0 {
                continue;
            }
            let rw = wr * libm::pow(r, (d - 1) as f64) * hr;
            for &(th, wt) in theta.iter() {
                let ct = libm::cos(th);
                let q = r * r + t * t - 2.0 * r * t * ct;
                if q <= 0.0 || q >= s {
                    continue;
                }
                let sw = if d == 2 {
                    wt
                } else {
                    wt * libm::pow(libm::sin(th), (d - 2) as f64)
                };
                v += rw * sw * h.value(q);
                dv += rw * sw * h.derivative(q) * (2.0 * t - 2.0 * r * ct);
            }
        }
        (v, dv)
    };
    let knots = knots.max(2);
    let (norm, _) = eval(0.0);
    if !(norm > 0.0) {
        bail!(Numeric, "self-convolution vanishes at the origin");
    }
    let step = 1.0 / (knots - 1) as f64;
    let mut values = Vec::with_capacity(knots);
    let mut derivs = Vec::with_capacity(knots);
    for k in 0..knots {
        let t = k as f64 * step;
        let (v, dv) = if k == 0 { (norm, 0.0) } else { eval(t) };
        values.push((v / norm).max(0.0));
        derivs.push(dv / norm);
    }
    RadialProfile::from_samples(d, 1.0, values, derivs)
}

fn nodes(gl: &GaussLegendre, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * gl.nodes.len());
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            out.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}
