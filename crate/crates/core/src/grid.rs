//! Dense real-valued grids: single-channel images and stacked gradient fields.
//!
//! Both types are row-major `f64` buffers. An [`Image`] is an `N x M` array; a
//! [`Field`] stacks `2L` such arrays ordered as
//! `(v_x^0, v_y^0, v_x^1, v_y^1, ..., v_x^{L-1}, v_y^{L-1})`.
//!
//! The zero-mean subspace is not a separate type. Operators that need it say so
//! and [`Image::is_zero_mean`] checks it with the relative tolerance
//! [`ZERO_MEAN_TOL`].

use std::ops::{Index, IndexMut};

use crate::error::{Result, TvError};

/// Relative tolerance for membership in the zero-mean subspace:
/// `|sum f| <= ZERO_MEAN_TOL * N * M * max|f|`.
pub const ZERO_MEAN_TOL: f64 = 1e-9;

/// Common view over the flat storage of images and fields.
pub trait Grid {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// Number of `rows x cols` channels stored.
    fn channels(&self) -> usize;
    fn values(&self) -> &[f64];
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(TvError::InvalidDimensions {
            rows,
            cols,
            reason: "both dimensions must be at least 2",
        });
    }
    Ok(())
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(TvError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Real `N x M` image in row-major order. `n` indexes rows, `m` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(TvError::ShapeMismatch {
                expected: format!("{} samples", rows * cols),
                found: format!("{} samples", data.len()),
            });
        }
        check_finite(&data)?;
        Ok(Image { rows, cols, data })
    }

    /// # Panics
    /// If either dimension is below 2.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows >= 2 && cols >= 2, "image dimensions must be >= 2");
        Image {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows >= 2 && cols >= 2, "image dimensions must be >= 2");
        let mut data = Vec::with_capacity(rows * cols);
        for n in 0..rows {
            for m in 0..cols {
                data.push(f(n, m));
            }
        }
        Image { rows, cols, data }
    }

    /// Construct without validation. Callers guarantee the length.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Image { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_zero_mean(&self) -> bool {
        let sum: f64 = self.data.iter().sum();
        let peak = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        sum.abs() <= ZERO_MEAN_TOL * self.data.len() as f64 * peak
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Image {
        self.map(|v| alpha * v)
    }

    pub fn add_scalar(&self, k: f64) -> Image {
        self.map(|v| v + k)
    }

    pub fn add(&self, other: &Image) -> Result<Image> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Image) -> Result<Image> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        same_shape(self, other)?;
        Ok(Image::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Mirror left-right (column `m` goes to `M - 1 - m`).
    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.rows, self.cols, |n, m| self[(n, self.cols - 1 - m)])
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        check_finite(&self.data)
    }
}

impl Index<(usize, usize)> for Image {
    type Output = f64;
    fn index(&self, (n, m): (usize, usize)) -> &f64 {
        &self.data[n * self.cols + m]
    }
}

impl IndexMut<(usize, usize)> for Image {
    fn index_mut(&mut self, (n, m): (usize, usize)) -> &mut f64 {
        &mut self.data[n * self.cols + m]
    }
}

impl Grid for Image {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn channels(&self) -> usize {
        1
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Stack of `2L` real channels of size `N x M`, one `(x, y)` pair per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    rows: usize,
    cols: usize,
    directions: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(rows: usize, cols: usize, directions: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if directions == 0 {
            return Err(TvError::invalid("directions", "L must be at least 1"));
        }
        let expected = 2 * directions * rows * cols;
        if data.len() != expected {
            return Err(TvError::ChannelCount {
                expected: 2 * directions,
                found: data.len() / (rows * cols),
            });
        }
        check_finite(&data)?;
        Ok(Field {
            rows,
            cols,
            directions,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, directions: usize) -> Self {
        assert!(rows >= 2 && cols >= 2 && directions >= 1);
        Field {
            rows,
            cols,
            directions,
            data: vec![0.0; 2 * directions * rows * cols],
        }
    }

    /// Build from a list of channels (`2L` images of equal shape).
    pub fn from_channels(channels: &[Image]) -> Result<Self> {
        if channels.is_empty() || !channels.len().is_multiple_of(2) {
            return Err(TvError::ChannelCount {
                expected: 2 * channels.len().div_ceil(2).max(1),
                found: channels.len(),
            });
        }
        let (rows, cols) = channels[0].shape();
        let mut data = Vec::with_capacity(channels.len() * rows * cols);
        for c in channels {
            same_shape(&channels[0], c)?;
            data.extend_from_slice(c.as_slice());
        }
        Ok(Field {
            rows,
            cols,
            directions: channels.len() / 2,
            data,
        })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, directions: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), 2 * directions * rows * cols);
        Field {
            rows,
            cols,
            directions,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of directions `L`; the field holds `2L` channels.
    pub fn directions(&self) -> usize {
        self.directions
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        let len = self.rows * self.cols;
        &self.data[index * len..(index + 1) * len]
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut [f64] {
        let len = self.rows * self.cols;
        &mut self.data[index * len..(index + 1) * len]
    }

    pub fn channel_image(&self, index: usize) -> Image {
        Image::from_raw(self.rows, self.cols, self.channel(index).to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(
            self.rows,
            self.cols,
            self.directions,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        same_shape(self, other)?;
        Ok(Field::from_raw(
            self.rows,
            self.cols,
            self.directions,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        check_finite(&self.data)
    }
}

impl Grid for Field {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn channels(&self) -> usize {
        2 * self.directions
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn same_shape<A: Grid, B: Grid>(a: &A, b: &B) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() || a.channels() != b.channels() {
        return Err(TvError::ShapeMismatch {
            expected: format!("{}x{}x{}", a.rows(), a.cols(), a.channels()),
            found: format!("{}x{}x{}", b.rows(), b.cols(), b.channels()),
        });
    }
    Ok(())
}

/// Standard inner product; for fields the sum runs over all channels.
pub fn inner_product<G: Grid>(a: &G, b: &G) -> Result<f64> {
    same_shape(a, b)?;
    Ok(dot(a.values(), b.values()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The three norms of a grid, computed in one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms<G: Grid>(x: &G) -> Norms {
    let (mut l1, mut sq, mut linf) = (0.0, 0.0, 0.0f64);
    for &v in x.values() {
        l1 += v.abs();
        sq += v * v;
        linf = linf.max(v.abs());
    }
    Norms {
        l1,
        l2: sq.sqrt(),
        linf,
    }
}

pub fn l2_norm<G: Grid>(x: &G) -> f64 {
    dot(x.values(), x.values()).sqrt()
}

/// `f - mean(f)`: the orthogonal projection onto the zero-mean subspace.
pub fn zero_mean_project(f: &Image) -> Image {
    let mean = f.mean();
    f.add_scalar(-mean)
}

/// Relative l2 distance `||a - b|| / ||b||` (absolute when `b` is zero).
pub fn relative_l2<G: Grid>(a: &G, b: &G) -> Result<f64> {
    same_shape(a, b)?;
    let diff: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let denom = l2_norm(b);
    Ok(if denom > 0.0 { diff / denom } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rows: usize, cols: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn inner_product_of_ones() {
        let a = Image::filled(2, 2, 1.0);
        assert_eq!(inner_product(&a, &a).unwrap(), 4.0);
        assert_eq!(inner_product(&a, &Image::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_matches_double_loop() {
        let a = random_image(8, 8, 1);
        let b = random_image(8, 8, 2);
        let mut naive = 0.0;
        for n in 0..8 {
            for m in 0..8 {
                naive += a[(n, m)] * b[(n, m)];
            }
        }
        let ip = inner_product(&a, &b).unwrap();
        assert!((ip - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn inner_product_rejects_shape_mismatch() {
        let a = Image::zeros(2, 3);
        let b = Image::zeros(3, 2);
        assert!(matches!(
            inner_product(&a, &b),
            Err(TvError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn field_inner_product_sums_channels() {
        let f = Field::from_channels(&[Image::filled(2, 2, 1.0), Image::filled(2, 2, 2.0)]).unwrap();
        assert_eq!(inner_product(&f, &f).unwrap(), 4.0 + 16.0);
    }

    #[test]
    fn zero_mean_projection_examples() {
        let ones = Image::filled(3, 3, 1.0);
        assert!(zero_mean_project(&ones).as_slice().iter().all(|&v| v == 0.0));

        let f = Image::new(2, 2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = zero_mean_project(&f);
        assert_eq!(p.as_slice(), &[-0.25, -0.25, -0.25, 0.75]);
        assert!(p.is_zero_mean());
        // already centered input is left alone
        assert_eq!(zero_mean_project(&p), p);
    }

    #[test]
    fn norms_examples() {
        let z = norms(&Image::zeros(2, 2));
        assert_eq!((z.l1, z.l2, z.linf), (0.0, 0.0, 0.0));
        let x = Image::new(2, 2, vec![3.0, -4.0, 0.0, 0.0]).unwrap();
        let n = norms(&x);
        assert_eq!((n.l1, n.l2, n.linf), (7.0, 5.0, 4.0));
    }

    #[test]
    fn norms_match_loops() {
        let x = random_image(16, 16, 3);
        let (mut l1, mut sq, mut linf) = (0.0, 0.0, 0.0f64);
        for n in 0..16 {
            for m in 0..16 {
                let v = x[(n, m)];
                l1 += v.abs();
                sq += v * v;
                linf = linf.max(v.abs());
            }
        }
        let got = norms(&x);
        assert!((got.l1 - l1).abs() <= 1e-12 * l1);
        assert!((got.l2 - sq.sqrt()).abs() <= 1e-12 * sq.sqrt());
        assert_eq!(got.linf, linf);
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(
            Image::new(1, 4, vec![0.0; 4]),
            Err(TvError::InvalidDimensions { .. })
        ));
        assert!(matches!(
            Image::new(2, 2, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(TvError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            Field::new(2, 2, 1, vec![0.0; 12]),
            Err(TvError::ChannelCount { expected: 2, found: 3 })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn image_strategy() -> impl Strategy<Value = Image> {
            (2usize..7, 2usize..7).prop_flat_map(|(r, c)| {
                proptest::collection::vec(-100.0f64..100.0, r * c)
                    .prop_map(move |d| Image::new(r, c, d).unwrap())
            })
        }

        proptest! {
            #[test]
            fn zero_mean_is_idempotent(f in image_strategy()) {
                let once = zero_mean_project(&f);
                let twice = zero_mean_project(&once);
                let scale = norms(&f).linf.max(1.0);
                for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-12 * scale);
                }
                prop_assert!(once.is_zero_mean() || norms(&once).linf < 1e-12 * scale);
            }

            #[test]
            fn cauchy_schwarz(f in image_strategy(), seed in any::<u64>()) {
                let g = random_image(f.shape().0, f.shape().1, seed);
                let ip = inner_product(&f, &g).unwrap();
                prop_assert!(ip.abs() <= l2_norm(&f) * l2_norm(&g) * (1.0 + 1e-12));
            }

            #[test]
            fn zero_mean_orthogonal_to_constants(f in image_strategy(), k in -50.0f64..50.0) {
                let g = zero_mean_project(&f);
                let (r, c) = g.shape();
                let ip = inner_product(&g, &Image::filled(r, c, k)).unwrap();
                prop_assert!(ip.abs() <= 1e-9 * (r * c) as f64 * norms(&f).linf.max(1.0) * k.abs().max(1.0));
            }
        }
    }
}
