//! Discrete vector calculus on the image grid.
//!
//! * [`gradient`] / [`divergence`]: first differences and their negative adjoint,
//!   so that `<grad u, v> = <u, -div v>`.
//! * [`mdg`] / [`mdd`]: the multidirectional gradient (the gradient rotated
//!   through `L` angles `pi k / 2L`) and its congruent divergence.
//! * [`integrate`]: spectral left inverse of `mdg` on zero-mean images, which is
//!   also the least-squares solution of `mdg(u) ~ v`.
//! * [`project_onto_range`]: `mdg . integrate`, the orthogonal projector onto
//!   the range of `mdg`.
//!
//! `mdd` carries no leading minus sign: `mdd` with one direction is exactly
//! `divergence`, and `mdd(mdg(u)) = L div(grad u)`.

use std::f64::consts::PI;

use crate::error::{Result, TvError};
use crate::grid::{Field, Grid, Image};
use crate::spectral::{integration_filter, Boundary, CosinePlan, FourierPlan};

/// The `L` directions `theta_k = pi k / (2L)` and the normalization
/// `d_L = 1 / sum_k (cos theta_k + sin theta_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    angles: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    normalization: f64,
}

impl AngleSet {
    pub fn new(directions: usize) -> Result<Self> {
        if directions == 0 {
            return Err(TvError::invalid("L", "direction count must be at least 1"));
        }
        let angles: Vec<f64> = (0..directions)
            .map(|k| PI * k as f64 / (2.0 * directions as f64))
            .collect();
        let cos: Vec<f64> = angles.iter().map(|t| t.cos()).collect();
        let sin: Vec<f64> = angles.iter().map(|t| t.sin()).collect();
        let normalization = 1.0 / cos.iter().zip(&sin).map(|(c, s)| c + s).sum::<f64>();
        Ok(AngleSet {
            angles,
            cos,
            sin,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    /// `d_L`; exactly 1 for a single direction.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }
}

#[inline]
fn prev(i: usize, len: usize, boundary: Boundary) -> usize {
    match (i, boundary) {
        (0, Boundary::Periodic) => len - 1,
        (0, Boundary::Replicative) => 0,
        _ => i - 1,
    }
}

fn gradient_parts(f: &[f64], rows: usize, cols: usize, boundary: Boundary) -> (Vec<f64>, Vec<f64>) {
    let mut fx = vec![0.0; rows * cols];
    let mut fy = vec![0.0; rows * cols];
    for n in 0..rows {
        let pn = prev(n, rows, boundary);
        for m in 0..cols {
            let pm = prev(m, cols, boundary);
            let i = n * cols + m;
            fx[i] = f[i] - f[pn * cols + m];
            fy[i] = f[i] - f[n * cols + pm];
        }
    }
    (fx, fy)
}

fn divergence_parts(
    vx: &[f64],
    vy: &[f64],
    rows: usize,
    cols: usize,
    boundary: Boundary,
) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    match boundary {
        Boundary::Periodic => {
            for n in 0..rows {
                let nn = if n + 1 == rows { 0 } else { n + 1 };
                for m in 0..cols {
                    let nm = if m + 1 == cols { 0 } else { m + 1 };
                    let i = n * cols + m;
                    out[i] = vx[nn * cols + m] - vx[i] + vy[n * cols + nm] - vy[i];
                }
            }
        }
        Boundary::Replicative => {
            // v_x(0, .) and v_y(., 0) never enter: the gradient is zero there.
            for n in 0..rows {
                for m in 0..cols {
                    let i = n * cols + m;
                    let mut acc = 0.0;
                    if n + 1 < rows {
                        acc += vx[i + cols];
                    }
                    if n > 0 {
                        acc -= vx[i];
                    }
                    if m + 1 < cols {
                        acc += vy[i + 1];
                    }
                    if m > 0 {
                        acc -= vy[i];
                    }
                    out[i] = acc;
                }
            }
        }
    }
    out
}

/// `(f_x, f_y)`: backward differences along rows (`n`) and columns (`m`).
pub fn gradient(f: &Image, boundary: Boundary) -> Field {
    let (rows, cols) = f.shape();
    let (mut fx, fy) = gradient_parts(f.as_slice(), rows, cols, boundary);
    fx.extend_from_slice(&fy);
    Field::from_raw(rows, cols, 1, fx)
}

/// Discrete divergence, the negative adjoint of [`gradient`].
pub fn divergence(v: &Field, boundary: Boundary) -> Result<Image> {
    if v.channels() != 2 {
        return Err(TvError::ChannelCount {
            expected: 2,
            found: v.channels(),
        });
    }
    let (rows, cols) = v.shape();
    Ok(Image::from_raw(
        rows,
        cols,
        divergence_parts(v.channel(0), v.channel(1), rows, cols, boundary),
    ))
}

/// Multidirectional gradient: channel pair `k` is the gradient rotated by
/// `theta_k`, `(f_x cos + f_y sin, f_y cos - f_x sin)`.
pub fn mdg(f: &Image, angles: &AngleSet, boundary: Boundary) -> Field {
    let (rows, cols) = f.shape();
    let (fx, fy) = gradient_parts(f.as_slice(), rows, cols, boundary);
    let len = rows * cols;
    let mut data = vec![0.0; 2 * angles.len() * len];
    for (k, (&c, &s)) in angles.cos().iter().zip(angles.sin()).enumerate() {
        let (vx, rest) = data[2 * k * len..].split_at_mut(len);
        let vy = &mut rest[..len];
        for i in 0..len {
            vx[i] = fx[i] * c + fy[i] * s;
            vy[i] = fy[i] * c - fx[i] * s;
        }
    }
    Field::from_raw(rows, cols, angles.len(), data)
}

/// Rotate every channel pair back and sum: the field whose divergence is `mdd(v)`.
fn unrotate_sum(v: &Field, angles: &AngleSet) -> (Vec<f64>, Vec<f64>) {
    let len = v.rows() * v.cols();
    let mut px = vec![0.0; len];
    let mut py = vec![0.0; len];
    for (k, (&c, &s)) in angles.cos().iter().zip(angles.sin()).enumerate() {
        let vx = v.channel(2 * k);
        let vy = v.channel(2 * k + 1);
        for i in 0..len {
            px[i] += vx[i] * c - vy[i] * s;
            py[i] += vy[i] * c + vx[i] * s;
        }
    }
    (px, py)
}

fn check_directions(v: &Field, angles: &AngleSet) -> Result<()> {
    if v.directions() != angles.len() {
        return Err(TvError::ChannelCount {
            expected: 2 * angles.len(),
            found: v.channels(),
        });
    }
    Ok(())
}

/// Multidirectional divergence, satisfying `<mdg u, v> = <u, -mdd v>`.
pub fn mdd(v: &Field, angles: &AngleSet, boundary: Boundary) -> Result<Image> {
    check_directions(v, angles)?;
    let (rows, cols) = v.shape();
    let (px, py) = unrotate_sum(v, angles);
    Ok(Image::from_raw(
        rows,
        cols,
        divergence_parts(&px, &py, rows, cols, boundary),
    ))
}

#[derive(Debug, Clone)]
enum Transform {
    Fourier(FourierPlan),
    Cosine(CosinePlan),
}

/// Reusable left inverse of `mdg` for a fixed grid, direction set and boundary.
///
/// Holds the transform plan and the integration filter so repeated calls (as in
/// the shrinkage iteration) do not rebuild them.
#[derive(Debug, Clone)]
pub struct Integrator {
    rows: usize,
    cols: usize,
    angles: AngleSet,
    boundary: Boundary,
    // W_i / L, real-valued for both transforms
    gain: Vec<f64>,
    transform: Transform,
}

impl Integrator {
    pub fn new(rows: usize, cols: usize, angles: &AngleSet, boundary: Boundary) -> Result<Self> {
        if boundary == Boundary::Replicative && angles.len() > 1 {
            return Err(TvError::UnsupportedBoundary {
                directions: angles.len(),
            });
        }
        let wi = integration_filter(rows, cols, boundary)?;
        let inv_l = 1.0 / angles.len() as f64;
        let gain = wi.coeffs().iter().map(|z| z.re * inv_l).collect();
        let transform = match boundary {
            Boundary::Periodic => Transform::Fourier(FourierPlan::new(rows, cols)),
            Boundary::Replicative => Transform::Cosine(CosinePlan::new(rows, cols)),
        };
        Ok(Integrator {
            rows,
            cols,
            angles: angles.clone(),
            boundary,
            gain,
            transform,
        })
    }

    pub fn angles(&self) -> &AngleSet {
        &self.angles
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn check(&self, v: &Field) -> Result<()> {
        if v.shape() != (self.rows, self.cols) {
            return Err(TvError::shape((self.rows, self.cols), v.shape()));
        }
        check_directions(v, &self.angles)
    }

    /// Solve `div(grad u) = g` for the zero-mean `u` in the spectral domain.
    pub(crate) fn inverse_laplacian(&self, g: &[f64]) -> Vec<f64> {
        match &self.transform {
            Transform::Fourier(plan) => {
                let mut spec = plan.forward_real(g);
                spec.iter_mut().zip(&self.gain).for_each(|(z, w)| *z *= *w);
                plan.inverse_real(spec)
            }
            Transform::Cosine(plan) => {
                let mut spec = plan.forward(g);
                spec.iter_mut().zip(&self.gain).for_each(|(z, w)| *z *= *w);
                plan.inverse(&spec)
            }
        }
    }

    /// `(1/L) T^-1 { T{mdd v} . W_i }`; always zero-mean.
    pub fn integrate(&self, v: &Field) -> Result<Image> {
        self.check(v)?;
        let div = mdd(v, &self.angles, self.boundary)?;
        Ok(Image::from_raw(
            self.rows,
            self.cols,
            self.inverse_laplacian(div.as_slice()),
        ))
    }

    /// `mdg(integrate(v))`.
    pub fn project(&self, v: &Field) -> Result<Field> {
        let u = self.integrate(v)?;
        Ok(mdg(&u, &self.angles, self.boundary))
    }
}

/// Left inverse of [`mdg`] on zero-mean images. Replicative boundaries are
/// only available with a single direction.
pub fn integrate(v: &Field, angles: &AngleSet, boundary: Boundary) -> Result<Image> {
    let (rows, cols) = v.shape();
    Integrator::new(rows, cols, angles, boundary)?.integrate(v)
}

/// Orthogonal projection onto the range of [`mdg`].
pub fn project_onto_range(v: &Field, angles: &AngleSet, boundary: Boundary) -> Result<Field> {
    let (rows, cols) = v.shape();
    Integrator::new(rows, cols, angles, boundary)?.project(v)
}
