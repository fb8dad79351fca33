//! Two-dimensional Fourier and cosine transforms, Laplacian symbols, integration
//! filters and frequency-domain convolution.
//!
//! Conventions:
//! * Fourier: unnormalized forward DFT, `1/(NM)` on the inverse, so the DFT of a
//!   unit impulse at the origin is all ones.
//! * Cosine: unnormalized type-II DCT along both axes, inverted by a scaled
//!   type-III DCT. This is the transform that diagonalizes the Laplacian built
//!   from replicative (half-sample symmetric) differences.

use std::sync::Arc;

use num_complex::Complex64;
use rustdct::{DctPlanner, TransformType2And3};
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TvError};
use crate::grid::Image;

/// Boundary handling of the difference operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// `f_{-1} = f_{N-1}`; diagonalized by the DFT.
    Periodic,
    /// `f_{-1} = f_0`; diagonalized by the DCT-II.
    Replicative,
}

impl Boundary {
    pub fn transform(self) -> TransformKind {
        match self {
            Boundary::Periodic => TransformKind::Fourier,
            Boundary::Replicative => TransformKind::Cosine,
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Replicative => "replicative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Fourier,
    Cosine,
}

fn transpose<T: Copy>(src: &[T], rows: usize, cols: usize, dst: &mut [T]) {
    for n in 0..rows {
        for m in 0..cols {
            dst[m * rows + n] = src[n * cols + m];
        }
    }
}

/// Cached row/column FFT plans for one grid size. Immutable once built, so a
/// plan can be shared across threads.
#[derive(Clone)]
pub struct FourierPlan {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl FourierPlan {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        FourierPlan {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn run(&self, buf: &mut [Complex64], forward: bool) {
        assert_eq!(buf.len(), self.rows * self.cols);
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        transpose(buf, self.rows, self.cols, &mut t);
        col.process(&mut t);
        transpose(&t, self.cols, self.rows, buf);
    }

    /// In-place unnormalized forward DFT.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
    }

    /// In-place inverse DFT including the `1/(NM)` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn forward_real(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse DFT, keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `real(IDFT(DFT(u) . coeffs))`.
    pub fn filter_real(&self, u: &[f64], coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = self.forward_real(u);
        buf.iter_mut().zip(coeffs).for_each(|(z, h)| *z *= h);
        self.inverse_real(buf)
    }
}

/// Separable DCT-II / DCT-III plans for one grid size.
#[derive(Clone)]
pub struct CosinePlan {
    rows: usize,
    cols: usize,
    row: Arc<dyn TransformType2And3<f64>>,
    col: Arc<dyn TransformType2And3<f64>>,
}

impl std::fmt::Debug for CosinePlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosinePlan")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl CosinePlan {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = DctPlanner::new();
        CosinePlan {
            rows,
            cols,
            row: planner.plan_dct2(cols),
            col: planner.plan_dct2(rows),
        }
    }

    fn run(&self, data: &mut [f64], forward: bool) {
        assert_eq!(data.len(), self.rows * self.cols);
        let apply = |plan: &Arc<dyn TransformType2And3<f64>>, chunk: &mut [f64]| {
            if forward {
                plan.process_dct2(chunk)
            } else {
                plan.process_dct3(chunk)
            }
        };
        for chunk in data.chunks_exact_mut(self.cols) {
            apply(&self.row, chunk);
        }
        let mut t = vec![0.0; data.len()];
        transpose(data, self.rows, self.cols, &mut t);
        for chunk in t.chunks_exact_mut(self.rows) {
            apply(&self.col, chunk);
        }
        transpose(&t, self.cols, self.rows, data);
    }

    /// `X_{k,l} = sum u_{n,m} cos(pi k (2n+1) / 2N) cos(pi l (2m+1) / 2M)`.
    pub fn forward(&self, u: &[f64]) -> Vec<f64> {
        let mut data = u.to_vec();
        self.run(&mut data, true);
        data
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.run(&mut data, false);
        // DCT-III inverts DCT-II up to N/2 per axis.
        let scale = 4.0 / (self.rows * self.cols) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }
}

/// Dense complex spectrum of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub rows: usize,
    pub cols: usize,
    pub kind: TransformKind,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.cols + l]
    }
}

pub fn forward_transform(u: &Image, kind: TransformKind) -> Spectrum {
    let (rows, cols) = u.shape();
    let data = match kind {
        TransformKind::Fourier => FourierPlan::new(rows, cols).forward_real(u.as_slice()),
        TransformKind::Cosine => CosinePlan::new(rows, cols)
            .forward(u.as_slice())
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect(),
    };
    Spectrum {
        rows,
        cols,
        kind,
        data,
    }
}

/// Inverse of [`forward_transform`]; the real part is returned.
pub fn inverse_transform(s: &Spectrum) -> Image {
    let data = match s.kind {
        TransformKind::Fourier => FourierPlan::new(s.rows, s.cols).inverse_real(s.data.clone()),
        TransformKind::Cosine => {
            let re: Vec<f64> = s.data.iter().map(|z| z.re).collect();
            CosinePlan::new(s.rows, s.cols).inverse(&re)
        }
    };
    Image::from_raw(s.rows, s.cols, data)
}

/// Frequency response on an `N x M` grid, indexed by `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    rows: usize,
    cols: usize,
    boundary: Boundary,
    coeffs: Vec<Complex64>,
}

impl SpectralFilter {
    pub fn new(rows: usize, cols: usize, boundary: Boundary, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != rows * cols {
            return Err(TvError::ShapeMismatch {
                expected: format!("{} coefficients", rows * cols),
                found: format!("{} coefficients", coeffs.len()),
            });
        }
        Ok(SpectralFilter {
            rows,
            cols,
            boundary,
            coeffs,
        })
    }

    /// All-ones response (periodic): convolution with a unit impulse.
    pub fn identity(rows: usize, cols: usize) -> Self {
        SpectralFilter {
            rows,
            cols,
            boundary: Boundary::Periodic,
            coeffs: vec![Complex64::new(1.0, 0.0); rows * cols],
        }
    }

    /// DFT of a periodic convolution kernel given on the grid with its
    /// origin at `(0, 0)` (negative offsets wrap to the far edge).
    pub fn from_kernel(kernel: &Image) -> Self {
        let (rows, cols) = kernel.shape();
        SpectralFilter {
            rows,
            cols,
            boundary: Boundary::Periodic,
            coeffs: FourierPlan::new(rows, cols).forward_real(kernel.as_slice()),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.coeffs[k * self.cols + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    pub fn min_abs(&self) -> f64 {
        self.coeffs.iter().fold(f64::INFINITY, |a, z| a.min(z.norm()))
    }

    /// Element-wise product.
    pub fn product(&self, other: &SpectralFilter) -> Result<SpectralFilter> {
        if self.shape() != other.shape() {
            return Err(TvError::shape(self.shape(), other.shape()));
        }
        Ok(SpectralFilter {
            rows: self.rows,
            cols: self.cols,
            boundary: self.boundary,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn conj(&self) -> SpectralFilter {
        SpectralFilter {
            coeffs: self.coeffs.iter().map(|z| z.conj()).collect(),
            ..self.clone()
        }
    }

    /// `|F|^2` as a (real) filter.
    pub fn abs_sq(&self) -> SpectralFilter {
        SpectralFilter {
            coeffs: self
                .coeffs
                .iter()
                .map(|z| Complex64::new(z.norm_sqr(), 0.0))
                .collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, alpha: f64) -> SpectralFilter {
        SpectralFilter {
            coeffs: self.coeffs.iter().map(|z| z * alpha).collect(),
            ..self.clone()
        }
    }

    /// Spatial kernel `real(IDFT(F))` of a periodic filter.
    pub fn kernel(&self) -> Image {
        Image::from_raw(
            self.rows,
            self.cols,
            FourierPlan::new(self.rows, self.cols).inverse_real(self.coeffs.clone()),
        )
    }
}

fn symbol_value(k: usize, l: usize, rows: usize, cols: usize, boundary: Boundary) -> f64 {
    let period = match boundary {
        Boundary::Periodic => 2.0,
        Boundary::Replicative => 1.0,
    };
    let pi = std::f64::consts::PI;
    2.0 * (period * pi * k as f64 / rows as f64).cos()
        + 2.0 * (period * pi * l as f64 / cols as f64).cos()
        - 4.0
}

fn check_grid(rows: usize, cols: usize) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(TvError::InvalidDimensions {
            rows,
            cols,
            reason: "both dimensions must be at least 2",
        });
    }
    Ok(())
}

/// Symbol `W` of `div(grad(.))`: `2cos(a k/N) + 2cos(a l/M) - 4` with
/// `a = 2 pi` (periodic) or `a = pi` (replicative). `W <= 0` with a single zero
/// at DC.
pub fn laplacian_symbol(rows: usize, cols: usize, boundary: Boundary) -> Result<SpectralFilter> {
    check_grid(rows, cols)?;
    let coeffs = (0..rows)
        .flat_map(|k| (0..cols).map(move |l| (k, l)))
        .map(|(k, l)| Complex64::new(symbol_value(k, l, rows, cols, boundary), 0.0))
        .collect();
    Ok(SpectralFilter {
        rows,
        cols,
        boundary,
        coeffs,
    })
}

/// Integration filter `W_i = 1/W` off DC, `0` at DC.
pub fn integration_filter(rows: usize, cols: usize, boundary: Boundary) -> Result<SpectralFilter> {
    check_grid(rows, cols)?;
    let coeffs = (0..rows)
        .flat_map(|k| (0..cols).map(move |l| (k, l)))
        .map(|(k, l)| {
            let w = if k + l == 0 {
                0.0
            } else {
                1.0 / symbol_value(k, l, rows, cols, boundary)
            };
            Complex64::new(w, 0.0)
        })
        .collect();
    Ok(SpectralFilter {
        rows,
        cols,
        boundary,
        coeffs,
    })
}

/// Closed form of `max |W_i|` for the periodic grid: `[2 - 2cos(2 pi / max(N, M))]^-1`.
pub fn max_integration_gain(rows: usize, cols: usize) -> f64 {
    let big = rows.max(cols) as f64;
    1.0 / (2.0 - 2.0 * (2.0 * std::f64::consts::PI / big).cos())
}

/// Scale `H` so that `max |H|^2 = 1`.
pub fn normalize_blur(h: &SpectralFilter) -> Result<SpectralFilter> {
    let peak = h.max_abs();
    if peak == 0.0 {
        return Err(TvError::ZeroFilter);
    }
    Ok(h.scaled(1.0 / peak))
}

/// Periodic convolution through the spectrum: `real(IDFT(DFT(u) . F))`.
pub fn convolve_freq(u: &Image, filter: &SpectralFilter) -> Result<Image> {
    if u.shape() != filter.shape() {
        return Err(TvError::shape(filter.shape(), u.shape()));
    }
    if filter.boundary() != Boundary::Periodic {
        return Err(TvError::invalid(
            "filter",
            "frequency-domain convolution requires a periodic filter",
        ));
    }
    let (rows, cols) = u.shape();
    let plan = FourierPlan::new(rows, cols);
    Ok(Image::from_raw(
        rows,
        cols,
        plan.filter_real(u.as_slice(), filter.coeffs()),
    ))
}

/// `max|H| / min|H|` over every frequency sample; infinite if `H` vanishes anywhere.
pub fn condition_number(h: &SpectralFilter) -> f64 {
    let min = h.min_abs();
    if min == 0.0 {
        f64::INFINITY
    } else {
        h.max_abs() / min
    }
}
