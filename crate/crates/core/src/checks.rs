//! Numerical self-checks of the discrete calculus on random instances.
//!
//! Each check reports the worst relative defect it saw against its tolerance.
//! `mdd_sign = -1` swaps in a sign-flipped divergence, which must make the
//! adjointness and composition checks fail.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{divergence, gradient, mdd, mdg, AngleSet, Integrator};
use crate::error::Result;
use crate::grid::{inner_product, l2_norm, relative_l2, zero_mean_project, Field, Image};
use crate::spectral::{forward_transform, laplacian_symbol, Boundary};
use crate::tv::riemann_i;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub sizes: Vec<(usize, usize)>,
    pub directions: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    /// Relative tolerance for the operator identities.
    pub tolerance: f64,
    pub composition_tolerance: f64,
    pub mdd_sign: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            sizes: vec![(4, 4), (5, 7), (32, 48)],
            directions: vec![1, 2, 3, 5],
            instances: 100,
            seed: 0,
            tolerance: 1e-9,
            composition_tolerance: 1e-10,
            mdd_sign: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub shape: Option<(usize, usize)>,
    pub directions: Option<usize>,
    pub boundary: Option<Boundary>,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ctx = String::new();
        if let Some((r, c)) = self.shape {
            ctx.push_str(&format!(" {r}x{c}"));
        }
        if let Some(l) = self.directions {
            ctx.push_str(&format!(" L={l}"));
        }
        if let Some(b) = self.boundary {
            ctx.push_str(&format!(" {b:?}").to_lowercase());
        }
        write!(
            f,
            "{} {:<22}{:<24} worst {:.3e} (tol {:.0e}, n={})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            ctx,
            self.worst,
            self.tolerance,
            self.instances
        )
    }
}

fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Image {
    Image::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize, directions: usize) -> Field {
    let data = (0..2 * directions * rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Field::new(rows, cols, directions, data).expect("consistent length")
}

struct Worst {
    name: &'static str,
    worst: f64,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Worst { name, worst: 0.0 }
    }

    fn see(&mut self, v: f64) {
        // NaN must register as a failure
        if !(v <= self.worst) {
            self.worst = if v.is_nan() { f64::INFINITY } else { v };
        }
    }
}

fn operator_checks(
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
    (rows, cols): (usize, usize),
    angles: &AngleSet,
    boundary: Boundary,
) -> Result<Vec<CheckResult>> {
    let l = angles.len() as f64;
    let div_l = |v: &Field| -> Result<Image> { Ok(mdd(v, angles, boundary)?.scaled(cfg.mdd_sign)) };
    let integrator = Integrator::new(rows, cols, angles, boundary)?;
    let mut adj = Worst::new("adjointness");
    let mut inv = Worst::new("left-inverse");
    let mut idem = Worst::new("projection-idempotent");
    let mut orth = Worst::new("projection-orthogonal");
    let mut comp = Worst::new("mdd-mdg-composition");
    for _ in 0..cfg.instances {
        let u = random_image(rng, rows, cols);
        let v = random_field(rng, rows, cols, angles.len());
        let gu = mdg(&u, angles, boundary);
        let lhs = inner_product(&gu, &v)?;
        let rhs = -inner_product(&u, &div_l(&v)?)?;
        adj.see((lhs - rhs).abs() / (l2_norm(&gu) * l2_norm(&v)).max(f64::MIN_POSITIVE));

        let f = zero_mean_project(&u);
        inv.see(relative_l2(&integrator.integrate(&mdg(&f, angles, boundary))?, &f)?);

        let p = integrator.project(&v)?;
        idem.see(relative_l2(&integrator.project(&p)?, &p)?);
        let resid = v.sub(&p)?;
        orth.see(inner_product(&resid, &p)?.abs() / (l2_norm(&v) * l2_norm(&p)).max(f64::MIN_POSITIVE));

        let lap = divergence(&gradient(&u, boundary), boundary)?.scaled(l);
        comp.see(relative_l2(&div_l(&gu)?, &lap)?);
    }
    let wrap = |w: Worst, tol: f64| CheckResult {
        name: w.name,
        shape: Some((rows, cols)),
        directions: Some(angles.len()),
        boundary: Some(boundary),
        instances: cfg.instances,
        worst: w.worst,
        tolerance: tol,
    };
    Ok(vec![
        wrap(adj, cfg.tolerance),
        wrap(inv, cfg.tolerance),
        wrap(idem, cfg.tolerance),
        wrap(orth, cfg.tolerance),
        wrap(comp, cfg.composition_tolerance),
    ])
}

/// `T{div grad u} = T{u} . W` for the transform matching the boundary.
fn transform_identity(
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
    (rows, cols): (usize, usize),
    boundary: Boundary,
) -> Result<CheckResult> {
    let w = laplacian_symbol(rows, cols, boundary)?;
    let kind = boundary.transform();
    let mut worst = Worst::new("transform-identity");
    for _ in 0..cfg.instances {
        let u = random_image(rng, rows, cols);
        let lhs = forward_transform(&divergence(&gradient(&u, boundary), boundary)?, kind);
        let rhs = forward_transform(&u, kind);
        let (mut num, mut den) = (0.0, 0.0);
        for ((a, b), s) in lhs.data.iter().zip(&rhs.data).zip(w.coeffs()) {
            num += (a - b * s).norm_sqr();
            den += a.norm_sqr();
        }
        worst.see((num / den.max(f64::MIN_POSITIVE)).sqrt());
    }
    Ok(CheckResult {
        name: worst.name,
        shape: Some((rows, cols)),
        directions: None,
        boundary: Some(boundary),
        instances: cfg.instances,
        worst: worst.worst,
        tolerance: cfg.tolerance,
    })
}

/// Riemann-sum bound `I(a, b; L) >= |(a, b)|` on random pairs and equality on
/// the rays `theta_k + q pi / 2`.
fn riemann_checks(cfg: &CheckConfig, rng: &mut ChaCha8Rng, angles: &AngleSet) -> [CheckResult; 2] {
    let pairs = 100 * cfg.instances;
    let mut bound = Worst::new("riemann-bound");
    let mut rays = Worst::new("riemann-rays");
    for _ in 0..pairs {
        let (a, b) = (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let r: f64 = f64::hypot(a, b);
        // relative shortfall below the magnitude; zero when the bound holds
        bound.see(((r - riemann_i(a, b, angles)) / r.max(1.0)).max(0.0));

        let k = rng.random_range(0..angles.len());
        let q = rng.random_range(0..4) as f64;
        let theta = angles.angles()[k] + q * std::f64::consts::FRAC_PI_2;
        let rho = rng.random_range(0.0..100.0);
        let got = riemann_i(rho * theta.cos(), rho * theta.sin(), angles);
        rays.see((got - rho).abs() / rho.max(1.0));
    }
    let wrap = |w: Worst| CheckResult {
        name: w.name,
        shape: None,
        directions: Some(angles.len()),
        boundary: None,
        instances: pairs,
        worst: w.worst,
        tolerance: 1e-12,
    };
    [wrap(bound), wrap(rays)]
}

/// Run the whole suite. Replicative boundaries are exercised with `L = 1` only.
pub fn run_checks(cfg: &CheckConfig) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for &size in &cfg.sizes {
        for &l in &cfg.directions {
            let angles = AngleSet::new(l)?;
            out.extend(operator_checks(cfg, &mut rng, size, &angles, Boundary::Periodic)?);
            if l == 1 {
                out.extend(operator_checks(cfg, &mut rng, size, &angles, Boundary::Replicative)?);
            }
        }
        for b in [Boundary::Periodic, Boundary::Replicative] {
            out.push(transform_identity(cfg, &mut rng, size, b)?);
        }
    }
    for &l in &cfg.directions {
        out.extend(riemann_checks(cfg, &mut rng, &AngleSet::new(l)?));
    }
    Ok(out)
}
