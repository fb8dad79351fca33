//! Synthetic degradation (periodic blur plus white Gaussian noise), PSNR, and
//! the Shepp-Logan test image.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, TvError};
use crate::grid::Image;
use crate::spectral::{convolve_freq, normalize_blur, SpectralFilter};

/// Intensity peak used by [`psnr`] and the noise-level conversion.
pub const PEAK: f64 = 255.0;

/// Point-spread function description. Kernels are centered at the origin
/// and wrapped periodically onto the image grid.
#[derive(Debug, Clone, PartialEq)]
pub enum BlurSpec {
    /// Separable Gaussian truncated at radius `ceil(4 sigma)`.
    Gaussian { sigma: f64 },
    /// Uniform `size x size` box (`size` odd).
    MovingAverage { size: usize },
    /// Arbitrary non-negative kernel given on the full grid, origin at `(0, 0)`.
    Kernel(Image),
}

impl BlurSpec {
    /// The normalized, origin-centered kernel on a `rows x cols` grid.
    pub fn kernel(&self, rows: usize, cols: usize) -> Result<Image> {
        match self {
            BlurSpec::Gaussian { sigma } => gaussian_kernel(*sigma, rows, cols),
            BlurSpec::MovingAverage { size } => {
                if *size == 0 || size % 2 == 0 {
                    return Err(TvError::invalid("size", format!("box size must be odd, got {size}")));
                }
                let r = (*size / 2) as isize;
                let taps: Vec<(isize, f64)> = (-r..=r).map(|d| (d, 1.0)).collect();
                Ok(separable(&taps, rows, cols))
            }
            BlurSpec::Kernel(k) => {
                if k.shape() != (rows, cols) {
                    return Err(TvError::shape((rows, cols), k.shape()));
                }
                if k.as_slice().iter().any(|&v| v < 0.0) {
                    return Err(TvError::invalid("kernel", "entries must be non-negative"));
                }
                let sum: f64 = k.as_slice().iter().sum();
                if !(sum > 0.0) {
                    return Err(TvError::ZeroFilter);
                }
                Ok(k.scaled(1.0 / sum))
            }
        }
    }

    /// Frequency response, peak-normalized to `max |H|^2 = 1`.
    pub fn filter(&self, rows: usize, cols: usize) -> Result<SpectralFilter> {
        normalize_blur(&SpectralFilter::from_kernel(&self.kernel(rows, cols)?))
    }
}

impl fmt::Display for BlurSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlurSpec::Gaussian { sigma } => write!(f, "gauss:{sigma}"),
            BlurSpec::MovingAverage { size } => write!(f, "box:{size}"),
            BlurSpec::Kernel(k) => write!(f, "kernel:{}x{}", k.shape().0, k.shape().1),
        }
    }
}

impl FromStr for BlurSpec {
    type Err = TvError;

    /// `gauss:<sigma>` or `box:<size>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| TvError::invalid("blur", format!("expected gauss:<sigma> or box:<size>, got `{s}`")))?;
        match kind {
            "gauss" | "gaussian" => {
                let sigma: f64 = value
                    .parse()
                    .map_err(|_| TvError::invalid("blur", format!("bad sigma `{value}`")))?;
                if !(sigma > 0.0) {
                    return Err(TvError::invalid("sigma", format!("must be positive, got {sigma}")));
                }
                Ok(BlurSpec::Gaussian { sigma })
            }
            "box" => {
                let size: usize = value
                    .parse()
                    .map_err(|_| TvError::invalid("blur", format!("bad box size `{value}`")))?;
                Ok(BlurSpec::MovingAverage { size })
            }
            _ => Err(TvError::invalid("blur", format!("unknown blur kind `{kind}`"))),
        }
    }
}

fn separable(taps: &[(isize, f64)], rows: usize, cols: usize) -> Image {
    let mut k = Image::zeros(rows, cols);
    let total: f64 = taps.iter().map(|t| t.1).sum::<f64>().powi(2);
    for &(dn, wn) in taps {
        for &(dm, wm) in taps {
            let n = dn.rem_euclid(rows as isize) as usize;
            let m = dm.rem_euclid(cols as isize) as usize;
            k[(n, m)] += wn * wm / total;
        }
    }
    k
}

/// Sampled Gaussian truncated at `ceil(4 sigma)`, summing to one, wrapped onto
/// the grid with its center at `(0, 0)`.
pub fn gaussian_kernel(sigma: f64, rows: usize, cols: usize) -> Result<Image> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(TvError::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let r = (4.0 * sigma).ceil() as isize;
    let taps: Vec<(isize, f64)> = (-r..=r)
        .map(|d| (d, (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()))
        .collect();
    Ok(separable(&taps, rows, cols))
}

/// Peak-normalized frequency response of a Gaussian blur.
pub fn gaussian_blur_filter(sigma: f64, rows: usize, cols: usize) -> Result<SpectralFilter> {
    BlurSpec::Gaussian { sigma }.filter(rows, cols)
}

/// Noise level, either absolute or as the PSNR the noise alone would give.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Sigma(f64),
    TargetPsnr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub level: NoiseLevel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn sigma(sigma: f64, seed: u64) -> Self {
        NoiseSpec {
            level: NoiseLevel::Sigma(sigma),
            seed,
        }
    }

    pub fn target_psnr(db: f64, seed: u64) -> Self {
        NoiseSpec {
            level: NoiseLevel::TargetPsnr(db),
            seed,
        }
    }

    pub fn none() -> Self {
        Self::sigma(0.0, 0)
    }

    /// Standard deviation in intensity units.
    pub fn resolved_sigma(&self) -> Result<f64> {
        let s = match self.level {
            NoiseLevel::Sigma(s) => s,
            NoiseLevel::TargetPsnr(db) => sigma_for_psnr(db),
        };
        if !(s >= 0.0) || !s.is_finite() {
            return Err(TvError::invalid("noise", format!("standard deviation must be finite and >= 0, got {s}")));
        }
        Ok(s)
    }
}

/// `255 * 10^(-psnr / 20)`: the noise level whose expected MSE gives `psnr`.
pub fn sigma_for_psnr(db: f64) -> f64 {
    PEAK * 10f64.powf(-db / 20.0)
}

#[derive(Debug, Clone)]
pub struct Degraded {
    /// Blurred and noisy observation.
    pub observed: Image,
    pub blurred: Image,
    pub sigma_n: f64,
}

/// `g = H f + e` with `e` white Gaussian noise drawn from a ChaCha20 stream
/// seeded with `noise.seed`.
pub fn degrade(f: &Image, h: &SpectralFilter, noise: &NoiseSpec) -> Result<Degraded> {
    let blurred = convolve_freq(f, h)?;
    let sigma_n = noise.resolved_sigma()?;
    let mut observed = blurred.clone();
    if sigma_n > 0.0 {
        let dist = Normal::new(0.0, sigma_n).map_err(|e| TvError::invalid("noise", e.to_string()))?;
        let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
        for v in observed.as_mut_slice() {
            *v += dist.sample(&mut rng);
        }
    }
    Ok(Degraded {
        observed,
        blurred,
        sigma_n,
    })
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(TvError::shape(a.shape(), b.shape()));
    }
    let n = a.as_slice().len() as f64;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// `10 log10(255^2 / MSE)`; `+inf` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let e = mse(a, b)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / e).log10()
    })
}

/// Intensity table of the phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhantomKind {
    /// Original ten-ellipse head model (skull 2.0, brain 1.02).
    #[default]
    Classic,
    /// Higher-contrast variant (skull 1.0, brain 0.2).
    Modified,
}

// (x0, y0, a, b, phi in degrees)
const ELLIPSES: [(f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0),
    (0.22, 0.0, 0.11, 0.31, -18.0),
    (-0.22, 0.0, 0.16, 0.41, 18.0),
    (0.0, 0.35, 0.21, 0.25, 0.0),
    (0.0, 0.1, 0.046, 0.046, 0.0),
    (0.0, -0.1, 0.046, 0.046, 0.0),
    (-0.08, -0.605, 0.046, 0.023, 0.0),
    (0.0, -0.606, 0.023, 0.023, 0.0),
    (0.06, -0.605, 0.023, 0.046, 0.0),
];

const CLASSIC: [f64; 10] = [2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01];
const MODIFIED: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

/// Shepp-Logan phantom rasterized at pixel centers on `[-1, 1]^2` and scaled
/// to `[0, 255]`. Row 0 is the top of the head.
pub fn shepp_logan(rows: usize, cols: usize) -> Result<Image> {
    phantom(rows, cols, PhantomKind::Classic)
}

pub fn phantom(rows: usize, cols: usize, kind: PhantomKind) -> Result<Image> {
    if rows < 32 || cols < 32 {
        return Err(TvError::InvalidDimensions {
            rows,
            cols,
            reason: "phantom needs at least 32x32",
        });
    }
    let (rho, peak) = match kind {
        PhantomKind::Classic => (&CLASSIC, 2.0),
        PhantomKind::Modified => (&MODIFIED, 1.0),
    };
    let shapes: Vec<_> = ELLIPSES
        .iter()
        .zip(rho)
        .map(|(&(x0, y0, a, b, phi), &r)| {
            let (s, c) = phi.to_radians().sin_cos();
            (x0, y0, a * a, b * b, c, s, r)
        })
        .collect();
    Ok(Image::from_fn(rows, cols, |n, m| {
        let x = 2.0 * (m as f64 + 0.5) / cols as f64 - 1.0;
        let y = 1.0 - 2.0 * (n as f64 + 0.5) / rows as f64;
        let v: f64 = shapes
            .iter()
            .filter(|&&(x0, y0, a2, b2, c, s, _)| {
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * c + dy * s;
                let w = -dx * s + dy * c;
                u * u / a2 + w * w / b2 <= 1.0
            })
            .map(|e| e.6)
            .sum();
        (v / peak * PEAK).clamp(0.0, PEAK)
    }))
}
