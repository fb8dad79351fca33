//! Lagged-diffusivity reference solver for smoothed isotropic TV deconvolution,
//! and the Laplacian-prior estimate of the regularization weight.
//!
//! For each smoothing level `eps` the solver repeats
//!
//! ```text
//! H*H f' - lambda div(grad f' / s) = H* g,    s = sqrt(f_x^2 + f_y^2 + eps) at the previous f
//! ```
//!
//! with a matrix-free preconditioned conjugate-gradient solve, then warm-starts
//! the next (smaller) `eps` from the result.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::calculus::{divergence, gradient};
use crate::error::{Result, TvError};
use crate::grid::{dot, Image};
use crate::spectral::{Boundary, FourierPlan, SpectralFilter};

const P: Boundary = Boundary::Periodic;

#[derive(Debug, Clone, PartialEq)]
pub struct MldConfig {
    pub lambda: f64,
    /// Strictly decreasing smoothing levels.
    pub epsilon_schedule: Vec<f64>,
    /// Relative residual target of each linear solve.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Relative residual of the lagged equation (with `s` evaluated at the
    /// current iterate) at which a stage ends.
    pub outer_tol: f64,
    /// Looser residual target for every level but the last.
    pub stage_tol: f64,
    /// Outer steps per level.
    pub outer_max_iters: usize,
    /// Number of previous steps combined by Anderson mixing (0 disables it).
    pub anderson_depth: usize,
}

impl MldConfig {
    pub fn new(lambda: f64) -> Self {
        MldConfig {
            lambda,
            epsilon_schedule: halving_schedule(1e-2, 1e-6),
            cg_tol: 1e-8,
            cg_max_iters: 2000,
            outer_tol: 5e-7,
            stage_tol: 1e-4,
            outer_max_iters: 500,
            anderson_depth: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(TvError::invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.epsilon_schedule.is_empty() {
            return Err(TvError::invalid("epsilon_schedule", "must not be empty"));
        }
        if self.epsilon_schedule.iter().any(|&e| !(e > 0.0)) {
            return Err(TvError::invalid("epsilon_schedule", "values must be positive"));
        }
        if self.epsilon_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(TvError::invalid("epsilon_schedule", "must be strictly decreasing"));
        }
        if !(self.cg_tol > 0.0) || !(self.outer_tol > 0.0) {
            return Err(TvError::invalid("tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// `start, start/2, start/4, ...` with the last entry clamped to `end`.
pub fn halving_schedule(start: f64, end: f64) -> Vec<f64> {
    let mut out = vec![start];
    let mut e = start;
    while e > end {
        e = (e / 2.0).max(end);
        out.push(e);
    }
    out
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. `precond` applies an SPD approximation of the inverse.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; rhs.len()],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= tol * bnorm {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: rnorm / bnorm,
        });
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(TvError::invalid("operator", "not positive definite along search direction"));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(TvError::NotConverged {
        iterations: max_iters,
        residual: rnorm / bnorm,
        tolerance: tol,
    })
}

/// `sqrt(f_x^2 + f_y^2 + eps)` per pixel, periodic differences.
pub fn smoothed_magnitude(f: &Image, eps: f64) -> Vec<f64> {
    let g = gradient(f, P);
    g.channel(0)
        .iter()
        .zip(g.channel(1))
        .map(|(x, y)| (x * x + y * y + eps).sqrt())
        .collect()
}

/// `1/2 ||H f - g||^2 + lambda sum sqrt(|grad f|^2 + eps)`.
pub fn smoothed_energy(f: &Image, g: &Image, h: &SpectralFilter, lambda: f64, eps: f64) -> Result<f64> {
    let hf = crate::spectral::convolve_freq(f, h)?;
    let data: f64 = hf
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let tv: f64 = smoothed_magnitude(f, eps).iter().sum();
    Ok(0.5 * data + lambda * tv)
}

/// The lagged operator `u -> H*H u - lambda div(grad u / s)` for a fixed `s`.
#[derive(Debug, Clone)]
pub struct LaggedOperator {
    rows: usize,
    cols: usize,
    plan: FourierPlan,
    h_abs_sq: Vec<Complex64>,
    lambda: f64,
    inv_s: Vec<f64>,
}

impl LaggedOperator {
    pub fn new(h: &SpectralFilter, lambda: f64, s: Vec<f64>) -> Result<Self> {
        let (rows, cols) = h.shape();
        if s.len() != rows * cols {
            return Err(TvError::ShapeMismatch {
                expected: format!("{} diffusivities", rows * cols),
                found: format!("{}", s.len()),
            });
        }
        if s.iter().any(|&v| !(v > 0.0)) {
            return Err(TvError::invalid("s", "diffusivity denominators must be positive"));
        }
        Ok(LaggedOperator {
            rows,
            cols,
            plan: FourierPlan::new(rows, cols),
            h_abs_sq: h.coeffs().iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect(),
            lambda,
            inv_s: s.iter().map(|v| 1.0 / v).collect(),
        })
    }

    pub fn set_diffusivity(&mut self, s: &[f64]) {
        self.inv_s.iter_mut().zip(s).for_each(|(i, v)| *i = 1.0 / v);
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.plan.filter_real(u, &self.h_abs_sq);
        let img = Image::from_raw(self.rows, self.cols, u.to_vec());
        let mut grad = gradient(&img, P);
        for c in 0..2 {
            grad.channel_mut(c)
                .iter_mut()
                .zip(&self.inv_s)
                .for_each(|(v, w)| *v *= w);
        }
        let div = divergence(&grad, P).expect("two channels");
        out.iter_mut()
            .zip(div.as_slice())
            .for_each(|(o, d)| *o -= self.lambda * d);
        out
    }

    /// Diagonal of the operator: the constant diagonal of `H*H` plus the
    /// five-point diffusion stencil weights.
    fn diagonal(&self) -> Vec<f64> {
        let n = self.inv_s.len();
        let ch = self.h_abs_sq.iter().map(|z| z.re).sum::<f64>() / n as f64;
        (0..n)
            .map(|p| {
                let [_, (_, dn), _, (_, rt)] = self.neighbours(p);
                ch + self.lambda * (2.0 * self.inv_s[p] + dn + rt)
            })
            .collect()
    }

    /// Periodic neighbours of pixel `p` with the diffusion weight of the shared edge:
    /// up, down, left, right.
    fn neighbours(&self, p: usize) -> [(usize, f64); 4] {
        let (rows, cols) = (self.rows, self.cols);
        let (i, j) = (p / cols, p % cols);
        let dn = ((i + 1) % rows) * cols + j;
        let rt = i * cols + (j + 1) % cols;
        let a = &self.inv_s;
        [
            (((i + rows - 1) % rows) * cols + j, a[p]),
            (dn, a[dn]),
            (i * cols + (j + cols - 1) % cols, a[p]),
            (rt, a[rt]),
        ]
    }

    /// Symmetric Gauss-Seidel sweep on the diffusion stencil plus the diagonal
    /// of `H*H`: `(D + L) D^-1 (D + U)` inverted by a forward and a backward sweep.
    pub fn preconditioner(&self) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        let diag = self.diagonal();
        move |r: &[f64]| {
            let n = r.len();
            let mut y = vec![0.0; n];
            for p in 0..n {
                let mut v = r[p];
                for (q, w) in self.neighbours(p) {
                    if q < p {
                        v += self.lambda * w * y[q];
                    }
                }
                y[p] = v / diag[p];
            }
            let mut z = vec![0.0; n];
            for p in (0..n).rev() {
                let mut v = diag[p] * y[p];
                for (q, w) in self.neighbours(p) {
                    if q > p {
                        v += self.lambda * w * z[q];
                    }
                }
                z[p] = v / diag[p];
            }
            z
        }
    }
}

/// Convergence record of one smoothing level.
#[derive(Debug, Clone, PartialEq)]
pub struct MldStage {
    pub epsilon: f64,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    /// Lagged-equation residual at the end of the stage.
    pub residual: f64,
    /// Smoothed energy at this level's `eps`.
    pub energy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MldOutput {
    pub restored: Image,
    pub stages: Vec<MldStage>,
}

impl MldOutput {
    pub fn final_residual(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.residual)
    }
}

/// `||H*H f - lambda div(grad f / s(f)) - H* g|| / ||H* g||`.
pub fn lagged_residual(f: &Image, g: &Image, h: &SpectralFilter, lambda: f64, eps: f64) -> Result<f64> {
    let op = LaggedOperator::new(h, lambda, smoothed_magnitude(f, eps))?;
    let rhs = crate::spectral::convolve_freq(g, &h.conj())?;
    Ok(residual_of(&op, f.as_slice(), rhs.as_slice()))
}

fn residual_of(op: &LaggedOperator, f: &[f64], rhs: &[f64]) -> f64 {
    let af = op.apply(f);
    let r: f64 = af.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum();
    r.sqrt() / dot(rhs, rhs).sqrt().max(f64::MIN_POSITIVE)
}

/// Lagged-diffusivity restoration. `h` must be periodic and normalized.
///
/// Each outer step maps `f` to the solution of the lagged system with `s`
/// frozen at `f`. With `anderson_depth > 0` successive lagged steps are
/// combined by Anderson mixing; a mixed iterate is kept only if it does not
/// raise the smoothed energy, otherwise the plain lagged step is taken and the
/// mixing history restarts.
pub fn mld_restore(g: &Image, h: &SpectralFilter, config: &MldConfig) -> Result<MldOutput> {
    config.validate()?;
    g.check_finite()?;
    if g.shape() != h.shape() {
        return Err(TvError::shape(h.shape(), g.shape()));
    }
    if h.boundary() != P {
        return Err(TvError::invalid("blur", "only periodic convolution is supported"));
    }
    let (rows, cols) = g.shape();
    let rhs = crate::spectral::convolve_freq(g, &h.conj())?;
    let mut f = g.clone();
    let mut op = LaggedOperator::new(h, config.lambda, vec![1.0; rows * cols])?;
    let mut stages = Vec::with_capacity(config.epsilon_schedule.len());
    let last = config.epsilon_schedule.len() - 1;

    for (k, &eps) in config.epsilon_schedule.iter().enumerate() {
        let tol = if k == last {
            config.outer_tol
        } else {
            config.stage_tol.max(config.outer_tol)
        };
        let mut stage = MldStage {
            epsilon: eps,
            outer_iterations: 0,
            cg_iterations: 0,
            residual: f64::INFINITY,
            energy: f64::NAN,
            converged: false,
        };
        let mut mixer = Anderson::new(config.anderson_depth);
        let energy = |u: &Image| smoothed_energy(u, g, h, config.lambda, eps);
        loop {
            op.set_diffusivity(&smoothed_magnitude(&f, eps));
            stage.residual = residual_of(&op, f.as_slice(), rhs.as_slice());
            if stage.residual <= tol || stage.outer_iterations >= config.outer_max_iters {
                break;
            }
            let cg = conjugate_gradient(
                |u| op.apply(u),
                op.preconditioner(),
                rhs.as_slice(),
                f.as_slice(),
                config.cg_tol,
                config.cg_max_iters,
            )?;
            stage.outer_iterations += 1;
            stage.cg_iterations += cg.iterations;
            let lagged = Image::from_raw(rows, cols, cg.x);
            f = match mixer.mix(f.as_slice(), lagged.as_slice()) {
                Some(mixed) => {
                    let mixed = Image::from_raw(rows, cols, mixed);
                    if mixed.check_finite().is_ok() && energy(&mixed)? <= energy(&lagged)? {
                        mixed
                    } else {
                        mixer.reset();
                        lagged
                    }
                }
                None => lagged,
            };
        }
        f.check_finite()?;
        stage.converged = stage.residual <= tol;
        stage.energy = energy(&f)?;
        stages.push(stage);
    }
    Ok(MldOutput { restored: f, stages })
}

/// Type-II Anderson mixing of a fixed-point map `x -> phi(x)`.
#[derive(Debug)]
struct Anderson {
    depth: usize,
    xs: VecDeque<Vec<f64>>,
    gs: VecDeque<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson {
            depth,
            xs: VecDeque::new(),
            gs: VecDeque::new(),
        }
    }

    fn reset(&mut self) {
        self.xs.clear();
        self.gs.clear();
    }

    /// Record `(x, phi(x))` and return the mixed next iterate, if any history exists.
    fn mix(&mut self, x: &[f64], phi: &[f64]) -> Option<Vec<f64>> {
        if self.depth == 0 {
            return None;
        }
        let g: Vec<f64> = phi.iter().zip(x).map(|(p, x)| p - x).collect();
        self.xs.push_back(x.to_vec());
        self.gs.push_back(g);
        if self.xs.len() > self.depth + 1 {
            self.xs.pop_front();
            self.gs.pop_front();
        }
        let m = self.xs.len() - 1;
        if m == 0 {
            return None;
        }
        let diff = |v: &VecDeque<Vec<f64>>, i: usize| -> Vec<f64> {
            v[i + 1].iter().zip(&v[i]).map(|(a, b)| a - b).collect()
        };
        let dg: Vec<Vec<f64>> = (0..m).map(|i| diff(&self.gs, i)).collect();
        let dx: Vec<Vec<f64>> = (0..m).map(|i| diff(&self.xs, i)).collect();
        let g_last = &self.gs[m];
        // least squares min ||g - dG gamma|| through the (regularized) normal equations
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&dg[i], &dg[j]);
                gram[i * m + j] = v;
                gram[j * m + i] = v;
            }
            rhs[i] = dot(&dg[i], g_last);
        }
        let trace: f64 = (0..m).map(|i| gram[i * m + i]).sum();
        for i in 0..m {
            gram[i * m + i] += 1e-12 * trace.max(f64::MIN_POSITIVE);
        }
        let gamma = solve_spd(&mut gram, &mut rhs, m)?;
        let mut out = phi.to_vec();
        for (i, gi) in gamma.iter().enumerate() {
            for ((o, a), b) in out.iter_mut().zip(&dx[i]).zip(&dg[i]) {
                *o -= gi * (a + b);
            }
        }
        Some(out)
    }
}

/// In-place Cholesky solve of a small dense SPD system.
fn solve_spd(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    Some(b.to_vec())
}

/// Laplacian-prior estimate of the regularization weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    pub lambda: f64,
    /// Scale of the Laplacian prior on gradient magnitudes.
    pub beta: f64,
    /// Unbiased sample variance of the per-pixel gradient magnitude.
    pub gradient_variance: f64,
    pub noise_variance: f64,
}

/// `beta = sqrt(var(|grad f|) / 2)`, `lambda = sigma^2 / beta`.
pub fn estimate_lambda(reference: &Image, noise_variance: f64) -> Result<LambdaEstimate> {
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(TvError::invalid("noise_variance", format!("must be positive, got {noise_variance}")));
    }
    reference.check_finite()?;
    let g = gradient(reference, P);
    let mags: Vec<f64> = g
        .channel(0)
        .iter()
        .zip(g.channel(1))
        .map(|(x, y)| x.hypot(*y))
        .collect();
    from_magnitudes(&mags, noise_variance)
}

fn from_magnitudes(mags: &[f64], noise_variance: f64) -> Result<LambdaEstimate> {
    let gradient_variance = sample_variance(mags);
    let beta = (0.5 * gradient_variance).sqrt();
    if !(beta > 0.0) {
        return Err(TvError::ZeroGradient);
    }
    Ok(LambdaEstimate {
        lambda: noise_variance / beta,
        beta,
        gradient_variance,
        noise_variance,
    })
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::relative_l2;
    use crate::spectral::normalize_blur;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn box_blur(rows: usize, cols: usize) -> SpectralFilter {
        let mut k = Image::zeros(rows, cols);
        for (dn, dm) in [(0, 0), (1, 0), (rows - 1, 0), (0, 1), (0, cols - 1)] {
            k[(dn, dm)] = 0.2;
        }
        normalize_blur(&SpectralFilter::from_kernel(&k)).unwrap()
    }

    #[test]
    fn schedule_halves_and_clamps() {
        let s = halving_schedule(1e-2, 1e-6);
        assert_eq!(s[0], 1e-2);
        assert_eq!(s[1], 5e-3);
        assert_eq!(*s.last().unwrap(), 1e-6);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(s.len(), 15);
    }

    #[test]
    fn config_validation() {
        assert!(MldConfig::new(0.0).validate().is_err());
        let mut c = MldConfig::new(1.0);
        c.epsilon_schedule = vec![1e-3, 1e-3];
        assert!(c.validate().is_err());
        c.epsilon_schedule = vec![1e-3, -1.0];
        assert!(c.validate().is_err());
        assert!(MldConfig::new(1.0).validate().is_ok());
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let d = [1.0, 2.0, 4.0, 8.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        let out = conjugate_gradient(
            |u| u.iter().zip(&d).map(|(a, b)| a * b).collect(),
            |r| r.to_vec(),
            &b,
            &[0.0; 4],
            1e-12,
            10,
        )
        .unwrap();
        for (x, di) in out.x.iter().zip(&d) {
            assert!((x - 1.0 / di).abs() < 1e-12);
        }
        let err = conjugate_gradient(|u| u.to_vec(), |r| r.to_vec(), &b, &[5.0; 4], 1e-12, 0).unwrap_err();
        assert!(matches!(err, TvError::NotConverged { .. }));
    }

    #[test]
    fn lagged_operator_is_spd() {
        let (rows, cols) = (12, 10);
        let s: Vec<f64> = random_vec(rows * cols, 1).iter().map(|v| 0.1 + v.abs()).collect();
        let op = LaggedOperator::new(&box_blur(rows, cols), 0.7, s).unwrap();
        for seed in 0..10 {
            let u = random_vec(rows * cols, 10 + seed);
            let w = random_vec(rows * cols, 100 + seed);
            let (ou, ow) = (op.apply(&u), op.apply(&w));
            let (a, b) = (dot(&ou, &w), dot(&u, &ow));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            assert!(dot(&ou, &u) > 0.0);
        }
        // constants: only the data term acts
        let ones = vec![1.0; rows * cols];
        let o = op.apply(&ones);
        assert!(o.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn preconditioner_is_symmetric_positive() {
        let (rows, cols) = (8, 8);
        let s: Vec<f64> = random_vec(rows * cols, 2).iter().map(|v| 0.05 + v.abs()).collect();
        let op = LaggedOperator::new(&box_blur(rows, cols), 2.0, s).unwrap();
        let pc = op.preconditioner();
        let u = random_vec(rows * cols, 3);
        let w = random_vec(rows * cols, 4);
        let (a, b) = (dot(&pc(&u), &w), dot(&u, &pc(&w)));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        assert!(dot(&pc(&u), &u) > 0.0);
    }

    #[test]
    fn small_lambda_identity_blur_returns_data() {
        let g = Image::from_fn(16, 16, |n, m| if n < 8 && m > 4 { 200.0 } else { 30.0 });
        let mut cfg = MldConfig::new(1e-6);
        cfg.epsilon_schedule = vec![1e-2, 1e-4];
        let out = mld_restore(&g, &SpectralFilter::identity(16, 16), &cfg).unwrap();
        assert!(relative_l2(&out.restored, &g).unwrap() < 1e-8);
    }

    #[test]
    fn residual_and_stage_energies() {
        let (rows, cols) = (16, 16);
        let f = Image::from_fn(rows, cols, |n, m| if (n as i32 - 8).pow(2) + (m as i32 - 7).pow(2) < 20 { 180.0 } else { 40.0 });
        let h = box_blur(rows, cols);
        let g = crate::spectral::convolve_freq(&f, &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = g;
        g.as_mut_slice().iter_mut().for_each(|v| *v += rng.random_range(-5.0..5.0));
        let cfg = MldConfig::new(2.0);
        let out = mld_restore(&g, &h, &cfg).unwrap();
        assert!(out.stages.iter().all(|s| s.converged));
        let eps = *cfg.epsilon_schedule.last().unwrap();
        let res = lagged_residual(&out.restored, &g, &h, cfg.lambda, eps).unwrap();
        assert!(res <= 1e-6, "{res}");
        for w in out.stages.windows(2) {
            assert!(w[1].energy <= w[0].energy * (1.0 + 1e-6), "{:?}", w);
        }
    }

    #[test]
    fn lambda_formula_instance() {
        // magnitudes {0, 2}: sample variance 2
        let est = from_magnitudes(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!((est.gradient_variance, est.beta, est.lambda), (2.0, 1.0, 1.0));
    }

    #[test]
    fn lambda_from_hand_computed_gradient() {
        // single bright pixel at 2x2: magnitudes {0, 1, 1, sqrt 2}
        let f = Image::new(2, 2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let mags = [0.0, 1.0, 1.0, 2f64.sqrt()];
        let mean = mags.iter().sum::<f64>() / 4.0;
        let var = mags.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
        let est = estimate_lambda(&f, 3.0).unwrap();
        assert!((est.gradient_variance - var).abs() < 1e-15);
        assert!((est.lambda - 3.0 / (0.5 * var).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lambda_errors() {
        assert!(matches!(estimate_lambda(&Image::filled(4, 4, 3.0), 1.0), Err(TvError::ZeroGradient)));
        let f = Image::from_fn(4, 4, |n, m| (n * m) as f64);
        assert!(estimate_lambda(&f, 0.0).is_err());
        assert!(estimate_lambda(&f, -1.0).is_err());
    }

    #[test]
    fn lambda_scales_inversely() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = Image::from_fn(20, 20, |_, _| rng.random_range(0.0..100.0));
        let a = estimate_lambda(&f, 4.0).unwrap();
        for alpha in [0.5, 3.0] {
            let b = estimate_lambda(&f.scaled(alpha), 4.0).unwrap();
            assert!((b.beta - alpha * a.beta).abs() < 1e-10 * b.beta);
            assert!((b.lambda - a.lambda / alpha).abs() < 1e-10 * a.lambda);
        }
    }
}
