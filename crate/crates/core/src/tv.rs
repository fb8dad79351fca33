//! Total-variation functionals.
//!
//! `tv_i` sums per-pixel gradient magnitudes, `tv_a` sums absolute partial
//! differences, and `tv_l` is the multidirectional family in between:
//! `tv_i <= tv_l <= tv_a`, with `tv_l = tv_a` for `L = 1` and `tv_l -> tv_i` as
//! `L` grows.

use crate::calculus::{gradient, mdg, AngleSet};
use crate::grid::{norms, Image};
use crate::spectral::Boundary;

/// Riemann-sum approximation `I(a, b; L)` of `sqrt(a^2 + b^2)`. It never
/// undershoots, and is exact when `(a, b)` lies on one of the rays
/// `theta_k` or `theta_k + pi/2`.
pub fn riemann_i(a: f64, b: f64, angles: &AngleSet) -> f64 {
    let sum: f64 = angles
        .cos()
        .iter()
        .zip(angles.sin())
        .map(|(&c, &s)| (a * c + b * s).abs() + (b * c - a * s).abs())
        .sum();
    sum * angles.normalization()
}

/// Anisotropic TV: `sum |f_x| + |f_y|`.
pub fn tv_a(f: &Image, boundary: Boundary) -> f64 {
    norms(&gradient(f, boundary)).l1
}

/// Isotropic TV: `sum sqrt(f_x^2 + f_y^2)`.
pub fn tv_i(f: &Image, boundary: Boundary) -> f64 {
    let g = gradient(f, boundary);
    g.channel(0)
        .iter()
        .zip(g.channel(1))
        .map(|(x, y)| x.hypot(*y))
        .sum()
}

/// Multidirectional TV: `d_L * ||mdg(f)||_1`.
pub fn tv_l(f: &Image, angles: &AngleSet, boundary: Boundary) -> f64 {
    angles.normalization() * norms(&mdg(f, angles, boundary)).l1
}
