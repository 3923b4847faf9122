//! Mixed-radix FFT for arbitrary lengths and its axis-by-axis N-d version.

use alloc::vec::Vec;

use super::Complex64;

/// Plan for the unnormalized transform `X_k = sum_j x_j e^{-2 pi i jk/n}`.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    factors: Vec<usize>,
    twiddles: Vec<Complex64>,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while n % 4 == 0 {
        out.push(4);
        n /= 4;
    }
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "empty transform");
        let twiddles = (0..n)
            .map(|k| {
                let a = -2.0 * core::f64::consts::PI * (k as f64) / (n as f64);
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Self {
            n,
            factors: factorize(n),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    /// Transform with the `+` sign, no `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "buffer length");
        if self.n == 1 {
            return;
        }
        let input = buf.to_vec();
        let maxp = *self.factors.iter().max().unwrap_or(&1);
        let mut scratch = alloc::vec![Complex64::new(0.0, 0.0); 2 * maxp];
        self.rec(&input, 0, 1, buf, &self.factors, inverse, &mut scratch);
    }

    fn tw(&self, e: usize, inverse: bool) -> Complex64 {
        let w = self.twiddles[e % self.n];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        &self,
        x: &[Complex64],
        offset: usize,
        stride: usize,
        out: &mut [Complex64],
        factors: &[usize],
        inverse: bool,
        scratch: &mut [Complex64],
    ) {
        let n = out.len();
        if n == 1 {
            out[0] = x[offset];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for r in 0..p {
            self.rec(
                x,
                offset + r * stride,
                stride * p,
                &mut out[r * m..(r + 1) * m],
                &factors[1..],
                inverse,
                scratch,
            );
        }
        let step = self.n / n;
        let pstep = self.n / p;
        let (t, o) = scratch.split_at_mut(p);
        for k in 0..m {
            for r in 0..p {
                t[r] = out[r * m + k] * self.tw(r * k * step, inverse);
            }
            match p {
                2 => {
                    o[0] = t[0] + t[1];
                    o[1] = t[0] - t[1];
                }
                4 => {
                    let a = t[0] + t[2];
                    let b = t[0] - t[2];
                    let c = t[1] + t[3];
                    let d = t[1] - t[3];
                    // multiply by -i (forward) or +i (inverse)
                    let di = if inverse {
                        Complex64::new(-d.im, d.re)
                    } else {
                        Complex64::new(d.im, -d.re)
                    };
                    o[0] = a + c;
                    o[1] = b + di;
                    o[2] = a - c;
                    o[3] = b - di;
                }
                _ => {
                    for (q, oq) in o.iter_mut().enumerate().take(p) {
                        let mut s = t[0];
                        for (r, tr) in t.iter().enumerate().skip(1) {
                            s += *tr * self.tw(((r * q) % p) * pstep, inverse);
                        }
                        *oq = s;
                    }
                }
            }
            for q in 0..p {
                out[q * m + k] = o[q];
            }
        }
    }
}

/// Row-major N-d transform applied one axis at a time.
#[derive(Debug, Clone)]
pub struct FftNd {
    dims: Vec<usize>,
    plans: Vec<Fft>,
}

impl FftNd {
    pub fn new(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            plans: dims.iter().map(|&n| Fft::new(n)).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false)
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true)
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let total: usize = self.dims.iter().product();
        assert_eq!(buf.len(), total, "buffer length");
        let mut line = Vec::new();
        for (axis, plan) in self.plans.iter().enumerate() {
            let n = self.dims[axis];
            let inner: usize = self.dims[axis + 1..].iter().product();
            let outer = total / (n * inner);
            line.resize(n, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * n * inner + i;
                    for k in 0..n {
                        line[k] = buf[base + k * inner];
                    }
                    if inverse {
                        plan.inverse(&mut line);
                    } else {
                        plan.forward(&mut line);
                    }
                    for k in 0..n {
                        buf[base + k * inner] = line[k];
                    }
                }
            }
        }
    }
}
