//! Iterative-shrinkage deconvolution over multidirectional gradient fields.
//!
//! The unknown is the field `f = mdg(u)` rather than the image `u`. With
//! `A_L = H . U_L` (blur after integration) the problem
//!
//! ```text
//! minimize  1/2 ||A_L f - g||^2 + lambda d_L ||f||_1   over f in range(mdg)
//! ```
//!
//! is solved by the update
//!
//! ```text
//! f <- P( S_tau( f + (b - R f) / c ) ),   b = A_L* g,  R = A_L* A_L,  tau = lambda d_L / c
//! ```
//!
//! where `P` projects onto the range of `mdg` and `S_tau` is soft thresholding.
//! Every operator is one FFT-based convolution. The restored image is
//! `U_L f`. [`iterate_fixed`] uses the uniform step constant from
//! [`step_constant`]; [`iterate_backtracking`] shrinks `c` per iteration while
//! the local majorization condition `c ||r||^2 >= <R r, r>` still holds.

use num_complex::Complex64;

use crate::calculus::{mdd, mdg, AngleSet, Integrator};
use crate::error::{Result, TvError};
use crate::grid::{l2_norm, norms, Field, Image};
use crate::spectral::{
    integration_filter, laplacian_symbol, max_integration_gain, Boundary, FourierPlan, SpectralFilter,
};

const P: Boundary = Boundary::Periodic;

/// Soft thresholding `sign(x) max(|x| - tau, 0)`.
pub trait SoftThreshold: Sized {
    fn soft_threshold(&self, tau: f64) -> Result<Self>;
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    let m = x.abs() - tau;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(TvError::invalid("tau", format!("threshold must be >= 0, got {tau}")));
    }
    Ok(())
}

impl SoftThreshold for f64 {
    fn soft_threshold(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(shrink(*self, tau))
    }
}

impl SoftThreshold for Image {
    fn soft_threshold(&self, tau: f64) -> Result<Image> {
        check_tau(tau)?;
        Ok(self.map(|x| shrink(x, tau)))
    }
}

impl SoftThreshold for Field {
    fn soft_threshold(&self, tau: f64) -> Result<Field> {
        check_tau(tau)?;
        Ok(self.map(|x| shrink(x, tau)))
    }
}

pub fn soft_threshold<T: SoftThreshold>(x: &T, tau: f64) -> Result<T> {
    x.soft_threshold(tau)
}

/// `A = W_i . H`: blur composed with spectral integration. `A` vanishes at DC.
pub fn build_a(h: &SpectralFilter, wi: &SpectralFilter) -> Result<SpectralFilter> {
    wi.product(h)
}

/// Uniform step constant `(1/L) [2 - 2cos(2 pi / max(N, M))]^-1 + epsilon`,
/// an upper bound on `||A_L A_L*||` for a blur normalized to `max |H|^2 = 1`.
pub fn step_constant(rows: usize, cols: usize, directions: usize, epsilon: f64) -> f64 {
    max_integration_gain(rows, cols) / directions as f64 + epsilon
}

fn check_normalized(h: &SpectralFilter) -> Result<()> {
    let peak = h.max_abs();
    if (peak * peak - 1.0).abs() > 1e-9 {
        return Err(TvError::invalid(
            "blur",
            format!("expected max |H|^2 = 1, got {:.6e} (see spectral::normalize_blur)", peak * peak),
        ));
    }
    if h.boundary() != P {
        return Err(TvError::invalid("blur", "only periodic convolution is supported"));
    }
    Ok(())
}

/// Value of the objective split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub total: f64,
    pub data_term: f64,
    pub tv_term: f64,
}

/// The operators `A_L`, `A_L*`, `R_L`, `U_L` and the range projection for one
/// grid, blur and direction set.
#[derive(Debug, Clone)]
pub struct DeconvOperators {
    rows: usize,
    cols: usize,
    angles: AngleSet,
    plan: FourierPlan,
    a: Vec<Complex64>,
    a_conj: Vec<Complex64>,
    a_abs_sq: Vec<f64>,
    integrator: Integrator,
}

impl DeconvOperators {
    /// Build from the frequency response `A` (see [`build_a`]).
    pub fn from_a(a: &SpectralFilter, angles: &AngleSet) -> Result<Self> {
        let (rows, cols) = a.shape();
        let coeffs = a.coeffs().to_vec();
        Ok(DeconvOperators {
            rows,
            cols,
            angles: angles.clone(),
            plan: FourierPlan::new(rows, cols),
            a_conj: coeffs.iter().map(|z| z.conj()).collect(),
            a_abs_sq: coeffs.iter().map(|z| z.norm_sqr()).collect(),
            a: coeffs,
            integrator: Integrator::new(rows, cols, angles, P)?,
        })
    }

    /// Build from a blur normalized to `max |H|^2 = 1`.
    pub fn new(h: &SpectralFilter, angles: &AngleSet) -> Result<Self> {
        check_normalized(h)?;
        let (rows, cols) = h.shape();
        let wi = integration_filter(rows, cols, P)?;
        Self::from_a(&build_a(h, &wi)?, angles)
    }

    pub fn angles(&self) -> &AngleSet {
        &self.angles
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check_field(&self, v: &Field) -> Result<()> {
        if v.shape() != (self.rows, self.cols) {
            return Err(TvError::shape((self.rows, self.cols), v.shape()));
        }
        if v.directions() != self.angles.len() {
            return Err(TvError::ChannelCount {
                expected: 2 * self.angles.len(),
                found: 2 * v.directions(),
            });
        }
        Ok(())
    }

    fn check_image(&self, u: &Image) -> Result<()> {
        if u.shape() != (self.rows, self.cols) {
            return Err(TvError::shape((self.rows, self.cols), u.shape()));
        }
        Ok(())
    }

    fn inv_l(&self) -> f64 {
        1.0 / self.angles.len() as f64
    }

    /// `A_L v = (1/L) real(IDFT(DFT(mdd v) . A))`.
    pub fn apply_a(&self, v: &Field) -> Result<Image> {
        self.check_field(v)?;
        let div = mdd(v, &self.angles, P)?;
        let mut out = self.plan.filter_real(div.as_slice(), &self.a);
        let s = self.inv_l();
        out.iter_mut().for_each(|x| *x *= s);
        Ok(Image::from_raw(self.rows, self.cols, out))
    }

    /// `A_L* u = -(1/L) mdg(real(IDFT(DFT(u) . conj(A))))`.
    pub fn apply_a_star(&self, u: &Image) -> Result<Field> {
        self.check_image(u)?;
        let filtered = self.plan.filter_real(u.as_slice(), &self.a_conj);
        let w = Image::from_raw(self.rows, self.cols, filtered);
        Ok(mdg(&w, &self.angles, P).scaled(-self.inv_l()))
    }

    /// `R_L v = A_L* A_L v = -(1/L^2) mdg(real(IDFT(DFT(mdd v) . |A|^2)))`.
    pub fn apply_r(&self, v: &Field) -> Result<Field> {
        self.check_field(v)?;
        let div = mdd(v, &self.angles, P)?;
        let mut spec = self.plan.forward_real(div.as_slice());
        spec.iter_mut().zip(&self.a_abs_sq).for_each(|(z, w)| *z *= *w);
        let w = Image::from_raw(self.rows, self.cols, self.plan.inverse_real(spec));
        let s = self.inv_l();
        Ok(mdg(&w, &self.angles, P).scaled(-s * s))
    }

    /// `U_L v`, the zero-mean image whose multidirectional gradient is closest to `v`.
    pub fn integrate(&self, v: &Field) -> Result<Image> {
        self.integrator.integrate(v)
    }

    pub fn project(&self, v: &Field) -> Result<Field> {
        self.integrator.project(v)
    }

    /// `1/2 ||A_L v - g||^2 + lambda d_L ||v||_1`.
    pub fn energy(&self, v: &Field, g: &Image, lambda: f64) -> Result<Energy> {
        self.check_image(g)?;
        let av = self.apply_a(v)?;
        let data_term = 0.5
            * av.as_slice()
                .iter()
                .zip(g.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        let tv_term = lambda * self.angles.normalization() * norms(v).l1;
        Ok(Energy {
            total: data_term + tv_term,
            data_term,
            tv_term,
        })
    }
}

pub fn apply_a(v: &Field, a: &SpectralFilter, angles: &AngleSet) -> Result<Image> {
    DeconvOperators::from_a(a, angles)?.apply_a(v)
}

pub fn apply_a_star(u: &Image, a: &SpectralFilter, angles: &AngleSet) -> Result<Field> {
    DeconvOperators::from_a(a, angles)?.apply_a_star(u)
}

pub fn apply_r(v: &Field, a: &SpectralFilter, angles: &AngleSet) -> Result<Field> {
    DeconvOperators::from_a(a, angles)?.apply_r(v)
}

pub fn energy(
    v: &Field,
    g: &Image,
    a: &SpectralFilter,
    angles: &AngleSet,
    lambda: f64,
) -> Result<Energy> {
    DeconvOperators::from_a(a, angles)?.energy(v, g, lambda)
}

/// Post-processing of the zero-mean solution `U_L f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Renormalize {
    /// Return `U_L f` as is (zero mean).
    None,
    /// Add back the mean of the data image. A mean-preserving blur keeps the
    /// mean of the original, so this is the right choice for comparisons.
    #[default]
    DataMean,
    /// Affinely stretch to `[0, 255]`.
    Range255,
}

/// Affine stretch of `u` onto `[0, 255]`; a constant image maps to zeros.
pub fn stretch_to_255(u: &Image) -> Image {
    let (lo, hi) = (u.min(), u.max());
    if hi > lo {
        u.map(|v| 255.0 * (v - lo) / (hi - lo))
    } else {
        u.map(|_| 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Number of gradient directions `L`.
    pub directions: usize,
    /// Step constant `c`. Derived from the grid size when `None`.
    pub step: Option<f64>,
    /// Slack added to the uniform bound; defaults to `1e-3` times the bound.
    pub epsilon_margin: Option<f64>,
    /// Back-tracking reduction factor in `(0, 1)`.
    pub mu: f64,
    pub max_backtracks: usize,
    pub max_iters: usize,
    /// Stop when `||f_next - f|| / ||f||` drops below this.
    pub rel_tol: f64,
    pub backtracking: bool,
    /// During back-tracking, only accept a smaller `c` if the projected
    /// iterate does not raise the energy.
    pub energy_guard: bool,
    pub renormalize: Renormalize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1.0,
            directions: 3,
            step: None,
            epsilon_margin: None,
            mu: 0.8,
            max_backtracks: 60,
            max_iters: 500,
            rel_tol: 1e-5,
            backtracking: false,
            energy_guard: true,
            renormalize: Renormalize::DataMean,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(TvError::invalid("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if self.directions == 0 {
            return Err(TvError::invalid("L", "must be at least 1"));
        }
        if let Some(c) = self.step {
            if !(c > 0.0) || !c.is_finite() {
                return Err(TvError::invalid("c", format!("must be positive, got {c}")));
            }
        }
        if let Some(e) = self.epsilon_margin {
            if !(e > 0.0) {
                return Err(TvError::invalid("epsilon", format!("must be positive, got {e}")));
            }
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(TvError::invalid("mu", format!("must lie in (0, 1), got {}", self.mu)));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(TvError::invalid("rel_tol", "must be >= 0"));
        }
        Ok(())
    }

    /// The uniform step constant for an `rows x cols` grid under this config.
    pub fn resolved_step(&self, rows: usize, cols: usize) -> f64 {
        if let Some(c) = self.step {
            return c;
        }
        let bound = step_constant(rows, cols, self.directions, 0.0);
        bound + self.epsilon_margin.unwrap_or(1e-3 * bound)
    }
}

/// Majorization check of one accepted back-tracking step:
/// `c ||r||^2 >= <R r, r>` with `r` the pre-projection update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorizationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Number of times `c` was multiplied by `mu`.
    pub reductions: usize,
}

impl MajorizationCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub data_term: f64,
    pub tv_term: f64,
    pub c: f64,
    /// Relative change of the field in this iteration; `NaN` for the initial state.
    pub delta_rel: f64,
    pub majorization: Option<MajorizationCheck>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

pub const TRACE_HEADER: &str = "iter,energy,data_term,tv_term,c,delta_rel";

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    /// Largest relative energy increase between consecutive records
    /// (`<= 0` for a non-increasing sequence).
    pub fn max_relative_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:e}\n",
                r.iteration, r.energy, r.data_term, r.tv_term, r.c, r.delta_rel
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Restoration {
    pub restored: Image,
    /// Final field iterate (in the range of `mdg`).
    pub field: Field,
    pub trace: IterationTrace,
    /// Uniform step constant the run started from.
    pub step: f64,
    pub converged: bool,
}

impl Restoration {
    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.iteration)
    }

    pub fn final_energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.energy)
    }
}

fn relative_change(next: &Field, prev: &Field) -> f64 {
    let diff: f64 = next
        .as_slice()
        .iter()
        .zip(prev.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let base = l2_norm(prev);
    if base > 0.0 {
        diff / base
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Candidate update for one value of `c`, before projection.
struct Trial {
    c: f64,
    /// Spectrum of `mdd(temp)`.
    mdd_hat: Vec<Complex64>,
    lhs: f64,
    rhs: f64,
}

/// A projected iterate `f = mdg(u)` held together with the spectrum of `u`.
struct State {
    u_hat: Vec<Complex64>,
    f: Field,
    energy: Energy,
}

/// One solver run.
///
/// Every iterate lies in the range of `mdg`, so it is carried as `f = mdg(u)`
/// with `u` zero-mean. On that subspace the operators reduce to pointwise
/// multipliers of `DFT(u)`:
/// `DFT(mdd mdg u) = L W U`, `A_L mdg u = IDFT(W A U)`,
/// `R_L mdg u = mdg IDFT(-(1/L) W |A|^2 U)` and `b_L = mdg IDFT(-(1/L) conj(A) G)`.
/// One update then costs three FFTs.
struct Run<'a> {
    rows: usize,
    cols: usize,
    angles: AngleSet,
    plan: FourierPlan,
    g: &'a Image,
    g_hat: Vec<Complex64>,
    a: Vec<Complex64>,
    wa: Vec<Complex64>,
    r_gain: Vec<f64>,
    b_hat: Vec<Complex64>,
    lw: Vec<f64>,
    wi_l: Vec<f64>,
    config: &'a SolverConfig,
    step: f64,
}

impl<'a> Run<'a> {
    fn new(g: &'a Image, h: &SpectralFilter, config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        g.check_finite()?;
        if g.shape() != h.shape() {
            return Err(TvError::shape(h.shape(), g.shape()));
        }
        check_normalized(h)?;
        let (rows, cols) = g.shape();
        let angles = AngleSet::new(config.directions)?;
        let l = angles.len() as f64;
        let w: Vec<f64> = laplacian_symbol(rows, cols, P)?.coeffs().iter().map(|z| z.re).collect();
        let wi = integration_filter(rows, cols, P)?;
        let a = build_a(h, &wi)?.coeffs().to_vec();
        let plan = FourierPlan::new(rows, cols);
        let g_hat = plan.forward_real(g.as_slice());
        Ok(Run {
            rows,
            cols,
            plan,
            wa: a.iter().zip(&w).map(|(a, w)| a * w).collect(),
            r_gain: a.iter().zip(&w).map(|(a, w)| -w * a.norm_sqr() / l).collect(),
            b_hat: a.iter().zip(&g_hat).map(|(a, g)| -a.conj() * g / l).collect(),
            lw: w.iter().map(|w| l * w).collect(),
            wi_l: wi.coeffs().iter().map(|z| z.re / l).collect(),
            a,
            g_hat,
            angles,
            g,
            config,
            step: config.resolved_step(rows, cols),
        })
    }

    fn tau(&self, c: f64) -> f64 {
        self.config.lambda * self.angles.normalization() / c
    }

    fn image(&self, data: Vec<f64>) -> Image {
        Image::from_raw(self.rows, self.cols, data)
    }

    fn energy(&self, u_hat: &[Complex64], f: &Field) -> Energy {
        let scale = 1.0 / (self.rows * self.cols) as f64;
        let data_term = 0.5
            * scale
            * u_hat
                .iter()
                .zip(&self.wa)
                .zip(&self.g_hat)
                .map(|((u, wa), g)| (wa * u - g).norm_sqr())
                .sum::<f64>();
        let tv_term = self.config.lambda * self.angles.normalization() * norms(f).l1;
        Energy {
            total: data_term + tv_term,
            data_term,
            tv_term,
        }
    }

    fn initial_state(&self) -> State {
        let mut u_hat = self.g_hat.clone();
        u_hat[0] = Complex64::new(0.0, 0.0);
        let f = mdg(self.g, &self.angles, P);
        let energy = self.energy(&u_hat, &f);
        State { u_hat, f, energy }
    }

    /// `b_L - R_L f` for `f = mdg(u)`.
    fn gradient_step(&self, state: &State) -> Field {
        let d_hat: Vec<Complex64> = state
            .u_hat
            .iter()
            .zip(&self.b_hat)
            .zip(&self.r_gain)
            .map(|((u, b), k)| b - u * k)
            .collect();
        mdg(&self.image(self.plan.inverse_real(d_hat)), &self.angles, P)
    }

    fn trial(&self, state: &State, step: &Field, c: f64) -> Result<Trial> {
        let (tau, inv_c) = (self.tau(c), 1.0 / c);
        let temp = state
            .f
            .zip_with(step, |x, d| shrink(x + inv_c * d, tau))?;
        let mdd_hat = self
            .plan
            .forward_real(mdd(&temp, &self.angles, P)?.as_slice());
        let (lhs, rhs) = if self.config.backtracking {
            let r2: f64 = temp
                .as_slice()
                .iter()
                .zip(state.f.as_slice())
                .map(|(t, f)| (t - f) * (t - f))
                .sum();
            // <R r, r> = ||A_L r||^2, by Parseval on DFT(mdd r) = DFT(mdd temp) - L W U
            let l = self.angles.len() as f64;
            let ar2: f64 = mdd_hat
                .iter()
                .zip(&state.u_hat)
                .zip(&self.lw)
                .zip(&self.a)
                .map(|(((m, u), lw), a)| ((m - u * lw) * a).norm_sqr())
                .sum::<f64>()
                / (l * l * (self.rows * self.cols) as f64);
            (c * r2, ar2)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(Trial {
            c,
            mdd_hat,
            lhs,
            rhs,
        })
    }

    /// `mdg U_L temp`.
    fn project(&self, trial: &Trial) -> State {
        let u_hat: Vec<Complex64> = trial
            .mdd_hat
            .iter()
            .zip(&self.wi_l)
            .map(|(m, w)| m * w)
            .collect();
        let u = self.image(self.plan.inverse_real(u_hat.clone()));
        let f = mdg(&u, &self.angles, P);
        let energy = self.energy(&u_hat, &f);
        State { u_hat, f, energy }
    }

    fn solve(self) -> Result<Restoration> {
        let mut state = self.initial_state();
        let mut trace = IterationTrace::default();
        trace.records.push(record(0, &state.energy, self.step, f64::NAN, None));
        let mut converged = false;

        for iteration in 1..=self.config.max_iters {
            let step = self.gradient_step(&state);
            let (next, c, check) = if self.config.backtracking {
                let (next, c, check) = self.backtrack(&state, &step)?;
                (next, c, Some(check))
            } else {
                let t = self.trial(&state, &step, self.step)?;
                (self.project(&t), self.step, None)
            };
            if next.f.check_finite().is_err() || !next.energy.total.is_finite() {
                return Err(TvError::Divergence { iteration });
            }
            let delta = relative_change(&next.f, &state.f);
            trace.records.push(record(iteration, &next.energy, c, delta, check));
            state = next;
            if delta < self.config.rel_tol {
                converged = true;
                break;
            }
        }

        let zero_mean = self.image(self.plan.inverse_real(state.u_hat));
        let restored = match self.config.renormalize {
            Renormalize::None => zero_mean,
            Renormalize::DataMean => zero_mean.add_scalar(self.g.mean()),
            Renormalize::Range255 => stretch_to_255(&zero_mean),
        };
        Ok(Restoration {
            restored,
            field: state.f,
            trace,
            step: self.step,
            converged,
        })
    }

    /// Start from the uniform constant and keep multiplying by `mu` while the
    /// smaller constant still satisfies `c ||r||^2 >= <R r, r>` (and, with the
    /// energy guard, does not raise the energy after projection).
    fn backtrack(&self, state: &State, step: &Field) -> Result<(State, f64, MajorizationCheck)> {
        let mut best = self.trial(state, step, self.step)?;
        let mut best_state: Option<State> = None;
        let mut reductions = 0;
        // r = 0 means f is already a fixed point at this c
        while best.lhs >= best.rhs && best.lhs > 0.0 && reductions < self.config.max_backtracks {
            let t = self.trial(state, step, self.config.mu * best.c)?;
            if t.lhs < t.rhs {
                break;
            }
            if self.config.energy_guard {
                let s = self.project(&t);
                if s.energy.total > state.energy.total {
                    break;
                }
                best_state = Some(s);
            } else {
                best_state = None;
            }
            best = t;
            reductions += 1;
        }
        let next = match best_state {
            Some(s) => s,
            None => self.project(&best),
        };
        let check = MajorizationCheck {
            lhs: best.lhs,
            rhs: best.rhs,
            reductions,
        };
        Ok((next, best.c, check))
    }
}

fn record(
    iteration: usize,
    e: &Energy,
    c: f64,
    delta_rel: f64,
    majorization: Option<MajorizationCheck>,
) -> IterationRecord {
    IterationRecord {
        iteration,
        energy: e.total,
        data_term: e.data_term,
        tv_term: e.tv_term,
        c,
        delta_rel,
        majorization,
    }
}

/// Fixed-step iterative shrinkage.
///
/// `h` must be periodic and normalized to `max |H|^2 = 1`. The iteration starts
/// from `mdg(g)` and stops when the relative change of the field falls below
/// `config.rel_tol` or after `config.max_iters` updates.
pub fn iterate_fixed(g: &Image, h: &SpectralFilter, config: &SolverConfig) -> Result<Restoration> {
    let cfg = SolverConfig {
        backtracking: false,
        ..config.clone()
    };
    Run::new(g, h, &cfg)?.solve()
}

/// Iterative shrinkage with per-iteration back-tracking of the step constant.
pub fn iterate_backtracking(
    g: &Image,
    h: &SpectralFilter,
    config: &SolverConfig,
) -> Result<Restoration> {
    let cfg = SolverConfig {
        backtracking: true,
        ..config.clone()
    };
    Run::new(g, h, &cfg)?.solve()
}

/// Dispatch on `config.backtracking`.
pub fn restore(g: &Image, h: &SpectralFilter, config: &SolverConfig) -> Result<Restoration> {
    Run::new(g, h, config)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, relative_l2};
    use crate::spectral::convolve_freq;
    use crate::tv::tv_l;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rows: usize, cols: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_field(rows: usize, cols: usize, l: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..2 * l * rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Field::new(rows, cols, l, data).unwrap()
    }

    /// Symmetric non-negative kernel -> real, conjugate-symmetric response.
    fn box_blur(rows: usize, cols: usize) -> SpectralFilter {
        let mut k = Image::zeros(rows, cols);
        for (dn, dm) in [(0, 0), (1, 0), (rows - 1, 0), (0, 1), (0, cols - 1)] {
            k[(dn, dm)] = 0.2;
        }
        crate::spectral::normalize_blur(&SpectralFilter::from_kernel(&k)).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(3.0.soft_threshold(1.0).unwrap(), 2.0);
        assert_eq!((-0.5f64).soft_threshold(1.0).unwrap(), 0.0);
        assert_eq!((-3.0f64).soft_threshold(1.0).unwrap(), -2.0);
        for x in [-2.0, -0.1, 0.0, 0.7] {
            assert_eq!(soft_threshold(&x, 0.0).unwrap(), x);
        }
        assert!(matches!(
            1.0.soft_threshold(-0.1),
            Err(TvError::InvalidParameter { name: "tau", .. })
        ));
        let v = random_field(3, 3, 1, 1);
        assert_eq!(v.soft_threshold(0.0).unwrap(), v);
    }

    #[test]
    fn a_vanishes_at_dc_and_is_bounded_by_wi() {
        let wi = integration_filter(8, 8, P).unwrap();
        let id = SpectralFilter::identity(8, 8);
        assert_eq!(build_a(&id, &wi).unwrap(), wi);
        let h = box_blur(8, 8);
        let a = build_a(&h, &wi).unwrap();
        assert_eq!(a.get(0, 0).norm(), 0.0);
        for (x, w) in a.coeffs().iter().zip(wi.coeffs()) {
            assert!(x.norm() <= w.norm() * (1.0 + 1e-12));
        }
        assert!(build_a(&SpectralFilter::identity(4, 4), &wi).is_err());
    }

    #[test]
    fn operators_vanish_on_zero() {
        let ops = DeconvOperators::new(&box_blur(6, 6), &AngleSet::new(2).unwrap()).unwrap();
        assert_eq!(l2_norm(&ops.apply_a(&Field::zeros(6, 6, 2)).unwrap()), 0.0);
        assert_eq!(l2_norm(&ops.apply_a_star(&Image::zeros(6, 6)).unwrap()), 0.0);
        assert_eq!(l2_norm(&ops.apply_r(&Field::zeros(6, 6, 2)).unwrap()), 0.0);
    }

    #[test]
    fn single_direction_matches_spectral_composition() {
        let h = box_blur(7, 9);
        let wi = integration_filter(7, 9, P).unwrap();
        let a = build_a(&h, &wi).unwrap();
        let one = AngleSet::new(1).unwrap();
        let v = random_field(7, 9, 1, 3);
        let via_ops = apply_a(&v, &a, &one).unwrap();
        let div = crate::calculus::divergence(&v, P).unwrap();
        let direct = convolve_freq(&div, &a).unwrap();
        assert!(relative_l2(&via_ops, &direct).unwrap() < 1e-12);
    }

    #[test]
    fn adjoint_composition_and_psd() {
        for l in [1, 2, 3] {
            let angles = AngleSet::new(l).unwrap();
            let ops = DeconvOperators::new(&box_blur(10, 8), &angles).unwrap();
            let v = random_field(10, 8, l, 10 + l as u64);
            let u = random_image(10, 8, 20 + l as u64);
            let av = ops.apply_a(&v).unwrap();
            let asu = ops.apply_a_star(&u).unwrap();
            let lhs = inner_product(&av, &u).unwrap();
            let rhs = inner_product(&v, &asu).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * l2_norm(&v) * l2_norm(&u));

            let rv = ops.apply_r(&v).unwrap();
            let composed = ops.apply_a_star(&av).unwrap();
            assert!(relative_l2(&rv, &composed).unwrap() < 1e-10);
            let q = inner_product(&rv, &v).unwrap();
            assert!(q >= -1e-10 * inner_product(&v, &v).unwrap());
            assert!((q - inner_product(&av, &av).unwrap()).abs() < 1e-10 * q.abs().max(1.0));
        }
    }

    #[test]
    fn back_projection_ignores_constants() {
        let ops = DeconvOperators::new(&box_blur(8, 8), &AngleSet::new(3).unwrap()).unwrap();
        let g = random_image(8, 8, 4);
        let b0 = ops.apply_a_star(&g).unwrap();
        let b1 = ops.apply_a_star(&g.add_scalar(42.0)).unwrap();
        assert!(relative_l2(&b1, &b0).unwrap() < 1e-12);
    }

    #[test]
    fn step_constant_values() {
        let c3 = step_constant(256, 256, 3, 0.0);
        assert!((c3 - 553.38).abs() < 0.01, "{c3}");
        let c1 = step_constant(256, 256, 1, 0.0);
        assert!((c1 - 1660.1).abs() < 0.1, "{c1}");
        for k in 1..9 {
            let ck = step_constant(40, 32, k, 0.0);
            let c1 = step_constant(40, 32, 1, 0.0);
            assert!((ck - c1 / k as f64).abs() <= 1e-12 * c1);
        }
    }

    #[test]
    fn step_constant_bounds_operator_norm() {
        // power iteration on R restricted to random fields
        let angles = AngleSet::new(3).unwrap();
        let ops = DeconvOperators::new(&SpectralFilter::identity(16, 16), &angles).unwrap();
        let mut v = random_field(16, 16, 3, 5);
        let mut est = 0.0;
        for _ in 0..200 {
            let rv = ops.apply_r(&v).unwrap();
            est = l2_norm(&rv) / l2_norm(&v);
            v = rv.scaled(1.0 / l2_norm(&rv));
        }
        let c = step_constant(16, 16, 3, 0.0);
        assert!(est <= c * (1.0 + 1e-9), "{est} vs {c}");
        assert!(est >= 0.99 * c, "bound should be tight for H = 1: {est} vs {c}");
    }

    #[test]
    fn energy_cases() {
        let angles = AngleSet::new(3).unwrap();
        let ops = DeconvOperators::new(&box_blur(8, 8), &angles).unwrap();
        let zero = ops.energy(&Field::zeros(8, 8, 3), &Image::zeros(8, 8), 2.0).unwrap();
        assert_eq!((zero.total, zero.data_term, zero.tv_term), (0.0, 0.0, 0.0));

        let f = random_image(8, 8, 6);
        let v = mdg(&f, &angles, P);
        let g = ops.apply_a(&v).unwrap();
        let e = ops.energy(&v, &g, 0.0).unwrap();
        assert!(e.total.abs() < 1e-20);

        let lambda = 0.7;
        let e = ops.energy(&v, &g, lambda).unwrap();
        assert!((e.tv_term - lambda * tv_l(&f, &angles, P)).abs() < 1e-12 * e.tv_term);
    }

    #[test]
    fn rejects_unnormalized_blur() {
        let h = SpectralFilter::identity(4, 4).scaled(2.0);
        let err = iterate_fixed(&Image::zeros(4, 4), &h, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, TvError::InvalidParameter { name: "blur", .. }));
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { lambda: -1.0, ..Default::default() },
            SolverConfig { directions: 0, ..Default::default() },
            SolverConfig { mu: 1.0, ..Default::default() },
            SolverConfig { step: Some(0.0), ..Default::default() },
            SolverConfig { epsilon_margin: Some(-1.0), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_data_converges_immediately() {
        let h = box_blur(8, 8);
        let out = iterate_fixed(&Image::zeros(8, 8), &h, &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations(), 1);
        assert_eq!(l2_norm(&out.restored), 0.0);
    }

    #[test]
    fn too_small_step_trips_divergence_guard() {
        let g = random_image(16, 16, 8).scaled(100.0);
        let cfg = SolverConfig {
            lambda: 0.0,
            step: Some(1e-3),
            max_iters: 2000,
            rel_tol: 0.0,
            ..Default::default()
        };
        let err = iterate_fixed(&g, &SpectralFilter::identity(16, 16), &cfg).unwrap_err();
        assert!(matches!(err, TvError::Divergence { .. }));
    }

    #[test]
    fn iterate_stays_in_range() {
        let g = random_image(12, 12, 9).scaled(10.0);
        let cfg = SolverConfig {
            lambda: 0.5,
            max_iters: 20,
            rel_tol: 0.0,
            ..Default::default()
        };
        let out = iterate_fixed(&g, &box_blur(12, 12), &cfg).unwrap();
        let ops = DeconvOperators::new(&box_blur(12, 12), &AngleSet::new(3).unwrap()).unwrap();
        let p = ops.project(&out.field).unwrap();
        assert!(relative_l2(&p, &out.field).unwrap() < 1e-10);
    }

    #[test]
    fn no_regularization_identity_blur_reproduces_data() {
        let g = random_image(10, 10, 12).scaled(20.0).add_scalar(100.0);
        let cfg = SolverConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let out = iterate_fixed(&g, &SpectralFilter::identity(10, 10), &cfg).unwrap();
        assert!(relative_l2(&out.restored, &g).unwrap() < 1e-5);
    }

    #[test]
    fn trace_csv_layout() {
        let g = random_image(8, 8, 13);
        let cfg = SolverConfig {
            lambda: 0.1,
            max_iters: 3,
            rel_tol: 0.0,
            ..Default::default()
        };
        let out = iterate_fixed(&g, &box_blur(8, 8), &cfg).unwrap();
        let csv = out.trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 5);
        for (i, line) in lines[1..].iter().enumerate() {
            assert!(line.starts_with(&format!("{i},")));
            assert_eq!(line.split(',').count(), 6);
        }
    }

    #[test]
    fn backtracking_accepts_uniform_bound_when_tight() {
        // 2x2, H = 1, L = 1: the data gradient has constant magnitude, so
        // thresholding keeps every update on the top eigenvector of R and
        // mu * c already violates the majorization check.
        let g = Image::new(2, 2, vec![3.0, 3.0, -3.0, -3.0]).unwrap();
        let cfg = SolverConfig {
            lambda: 0.5,
            directions: 1,
            max_iters: 4,
            rel_tol: 0.0,
            ..Default::default()
        };
        let out = iterate_backtracking(&g, &SpectralFilter::identity(2, 2), &cfg).unwrap();
        for rec in &out.trace.records[1..] {
            let m = rec.majorization.unwrap();
            assert!(m.holds() && m.lhs > 0.0);
            assert_eq!(m.reductions, 0);
            assert_eq!(rec.c, out.step);
        }
    }

    #[test]
    fn backtracking_steps_satisfy_majorization() {
        let g = random_image(12, 12, 14).scaled(5.0);
        let cfg = SolverConfig {
            lambda: 0.05,
            max_iters: 10,
            rel_tol: 0.0,
            ..Default::default()
        };
        let out = iterate_backtracking(&g, &box_blur(12, 12), &cfg).unwrap();
        for rec in &out.trace.records[1..] {
            assert!(rec.majorization.unwrap().holds());
            assert!(rec.c <= out.step);
        }
    }

    /// The update written with the public operators, one step at a time.
    fn operator_iteration(g: &Image, h: &SpectralFilter, cfg: &SolverConfig, steps: usize) -> Vec<(Field, Energy)> {
        let angles = AngleSet::new(cfg.directions).unwrap();
        let ops = DeconvOperators::new(h, &angles).unwrap();
        let c = cfg.resolved_step(g.shape().0, g.shape().1);
        let tau = cfg.lambda * angles.normalization() / c;
        let b = ops.apply_a_star(g).unwrap();
        let mut f = mdg(g, &angles, P);
        let mut out = vec![(f.clone(), ops.energy(&f, g, cfg.lambda).unwrap())];
        for _ in 0..steps {
            let step = b.sub(&ops.apply_r(&f).unwrap()).unwrap();
            let temp = f.zip_with(&step, |x, d| x + d / c).unwrap().soft_threshold(tau).unwrap();
            f = ops.project(&temp).unwrap();
            out.push((f.clone(), ops.energy(&f, g, cfg.lambda).unwrap()));
        }
        out
    }

    #[test]
    fn spectral_state_matches_operator_iteration() {
        for l in [1, 3] {
            let g = random_image(12, 10, 30 + l as u64).scaled(50.0).add_scalar(80.0);
            let h = box_blur(12, 10);
            let cfg = SolverConfig {
                lambda: 2.0,
                directions: l,
                rel_tol: 0.0,
                ..Default::default()
            };
            let expected = operator_iteration(&g, &h, &cfg, 6);
            for (k, (f, e)) in expected.iter().enumerate() {
                let out = iterate_fixed(&g, &h, &SolverConfig { max_iters: k, ..cfg.clone() }).unwrap();
                assert!(relative_l2(&out.field, f).unwrap() < 1e-12, "L={l} k={k}");
                let rec = &out.trace.records[k];
                assert!((rec.energy - e.total).abs() <= 1e-11 * e.total);
                assert!((rec.data_term - e.data_term).abs() <= 1e-11 * e.total);
            }
            let out = iterate_fixed(&g, &h, &SolverConfig { max_iters: 6, ..cfg }).unwrap();
            let ops = DeconvOperators::new(&h, &AngleSet::new(l).unwrap()).unwrap();
            let u = ops.integrate(&out.field).unwrap().add_scalar(g.mean());
            assert!(relative_l2(&out.restored, &u).unwrap() < 1e-12);
        }
    }

    #[test]
    fn guarded_backtracking_never_raises_energy() {
        let g = random_image(16, 16, 40).scaled(60.0).add_scalar(100.0);
        let cfg = SolverConfig {
            lambda: 5.0,
            max_iters: 40,
            rel_tol: 0.0,
            ..Default::default()
        };
        let out = iterate_backtracking(&g, &box_blur(16, 16), &cfg).unwrap();
        assert!(out.trace.max_relative_increase() <= 0.0);
        let fixed = iterate_fixed(&g, &box_blur(16, 16), &cfg).unwrap();
        assert!(out.final_energy() <= fixed.final_energy());
    }
}
