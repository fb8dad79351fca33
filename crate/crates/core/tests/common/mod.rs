//! Literal transcription of the reference MATLAB routines (MDG, MDD,
//! operator_A, operator_A_star, operator_R and the update loop) on plain
//! row-major arrays, with a direct-summation DFT. Nothing here calls into the
//! library, so it can serve as an independent oracle.

#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::PI;

/// `N x M` real array, row-major.
#[derive(Clone, Debug)]
pub struct Arr {
    pub n: usize,
    pub m: usize,
    pub d: Vec<f64>,
}

impl Arr {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.m + j]
    }
}

/// Direct 2-D DFT by separable sums; `inverse` divides by `N M`.
pub fn dft2(x: &[Complex64], n: usize, m: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let tw = |len: usize| -> Vec<Complex64> {
        (0..len)
            .map(|t| Complex64::from_polar(1.0, sign * 2.0 * PI * t as f64 / len as f64))
            .collect()
    };
    let (tn, tm) = (tw(n), tw(m));
    let mut rows = vec![Complex64::new(0.0, 0.0); n * m];
    for i in 0..n {
        for l in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..m {
                s += x[i * m + j] * tm[(l * j) % m];
            }
            rows[i * m + l] = s;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n * m];
    for k in 0..n {
        for l in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..n {
                s += rows[i * m + l] * tn[(k * i) % n];
            }
            out[k * m + l] = if inverse { s / (n * m) as f64 } else { s };
        }
    }
    out
}

fn fft2(u: &Arr) -> Vec<Complex64> {
    let c: Vec<Complex64> = u.d.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft2(&c, u.n, u.m, false)
}

fn real_ifft2(s: &[Complex64], n: usize, m: usize) -> Arr {
    Arr { n, m, d: dft2(s, n, m, true).iter().map(|z| z.re).collect() }
}

/// `v(:,:,c)` for `c = 0..2L`.
pub type Stack = Vec<Arr>;

pub fn mdg(u: &Arr, l: usize) -> Stack {
    let (n, m) = (u.n, u.m);
    let theta: Vec<f64> = (0..l).map(|k| PI / 2.0 / l as f64 * k as f64).collect();
    let mut ux = vec![0.0; n * m];
    let mut uy = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            // u - u([N,1:N-1],:) and u - u(:,[M,1:M-1])
            ux[i * m + j] = u.at(i, j) - u.at((i + n - 1) % n, j);
            uy[i * m + j] = u.at(i, j) - u.at(i, (j + m - 1) % m);
        }
    }
    let mut v = Vec::new();
    for t in &theta {
        let (a, b) = (t.cos(), t.sin());
        v.push(Arr { n, m, d: (0..n * m).map(|p| a * ux[p] + b * uy[p]).collect() });
        v.push(Arr { n, m, d: (0..n * m).map(|p| a * uy[p] - b * ux[p]).collect() });
    }
    v
}

pub fn mdd(v: &Stack, l: usize) -> Arr {
    let (n, m) = (v[0].n, v[0].m);
    let theta: Vec<f64> = (0..l).map(|k| PI / 2.0 / l as f64 * k as f64).collect();
    let mut ux = vec![0.0; n * m];
    let mut uy = vec![0.0; n * m];
    for (k, t) in theta.iter().enumerate() {
        let (a, b) = (t.cos(), t.sin());
        for p in 0..n * m {
            ux[p] += a * v[2 * k].d[p] - b * v[2 * k + 1].d[p];
            uy[p] += b * v[2 * k].d[p] + a * v[2 * k + 1].d[p];
        }
    }
    let mut u = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            // (ux([2:N,1],:)-ux) + (uy(:,[2:M,1])-uy)
            u[i * m + j] = (ux[((i + 1) % n) * m + j] - ux[i * m + j]) + (uy[i * m + (j + 1) % m] - uy[i * m + j]);
        }
    }
    Arr { n, m, d: u }
}

pub fn operator_a(v: &Stack, a: &[Complex64], l: usize) -> Arr {
    let d = mdd(v, l);
    let s: Vec<Complex64> = fft2(&d).iter().zip(a).map(|(x, y)| x * y).collect();
    let mut r = real_ifft2(&s, d.n, d.m);
    r.d.iter_mut().for_each(|x| *x *= 1.0 / l as f64);
    r
}

pub fn operator_a_star(u: &Arr, a: &[Complex64], l: usize) -> Stack {
    let s: Vec<Complex64> = fft2(u).iter().zip(a).map(|(x, y)| x * y.conj()).collect();
    let mut v = mdg(&real_ifft2(&s, u.n, u.m), l);
    scale(&mut v, -1.0 / l as f64);
    v
}

pub fn operator_r(v: &Stack, a: &[Complex64], l: usize) -> Stack {
    let d = mdd(v, l);
    let s: Vec<Complex64> = fft2(&d).iter().zip(a).map(|(x, y)| x * (y * y.conj())).collect();
    let mut out = mdg(&real_ifft2(&s, d.n, d.m), l);
    scale(&mut out, -1.0 / (l * l) as f64);
    out
}

fn scale(v: &mut Stack, k: f64) {
    v.iter_mut().flat_map(|c| c.d.iter_mut()).for_each(|x| *x *= k);
}

/// `wthresh(x, 's', tau)`
pub fn wthresh(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// `W_i`: reciprocal of `2cos(2 pi k/N) + 2cos(2 pi l/M) - 4`, zero at DC.
pub fn wi(n: usize, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * m];
    for k in 0..n {
        for l in 0..m {
            if k + l > 0 {
                let w = 2.0 * (2.0 * PI * k as f64 / n as f64).cos() + 2.0 * (2.0 * PI * l as f64 / m as f64).cos() - 4.0;
                out[k * m + l] = Complex64::new(1.0 / w, 0.0);
            }
        }
    }
    out
}

/// Transfer function of a kernel given on the grid (origin at `(0, 0)`),
/// scaled so that `max |H| = 1`.
pub fn transfer(kernel: &Arr) -> Vec<Complex64> {
    let h = fft2(kernel);
    let peak = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    h.iter().map(|z| z / peak).collect()
}

/// Lines 1-4 of the algorithm: `c` with slack `eps` and `tau = lambda d_L / c`.
pub fn step_and_threshold(n: usize, m: usize, l: usize, lambda: f64, eps_fraction: f64) -> (f64, f64) {
    let bound = (1.0 / l as f64) / (2.0 - 2.0 * (2.0 * PI / n.max(m) as f64).cos());
    let c = bound + eps_fraction * bound;
    let d_l = 1.0 / (0..l).map(|k| {
        let t = PI * k as f64 / (2.0 * l as f64);
        t.cos() + t.sin()
    }).sum::<f64>();
    (c, lambda * d_l / c)
}

/// The update loop: returns `(v, f)` after each of `k` updates.
pub fn run(g: &Arr, h: &[Complex64], l: usize, c: f64, tau: f64, k: usize) -> Vec<(Stack, Arr)> {
    let wi = wi(g.n, g.m);
    let a: Vec<Complex64> = h.iter().zip(&wi).map(|(x, y)| x * y).collect();
    let b = operator_a_star(g, &a, l);
    let mut v = mdg(g, l);
    let mut states = Vec::new();
    for _ in 0..k {
        let r = operator_r(&v, &a, l);
        for (ch, (bc, rc)) in v.iter_mut().zip(b.iter().zip(&r)) {
            for (p, x) in ch.d.iter_mut().enumerate() {
                *x = wthresh(*x + (1.0 / c) * (bc.d[p] - rc.d[p]), tau);
            }
        }
        v = mdg(&operator_a(&v, &wi, l), l);
        let f = operator_a(&v, &wi, l);
        states.push((v.clone(), f));
    }
    states
}
