//! Multidirectional gradient, divergence, left inverse and range projection,
//! followed by the full randomized identity suite.
//!
//!     cargo run --release --example operator_identities

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvis::calculus::{divergence, gradient, mdd, mdg, AngleSet, Integrator};
use tvis::checks::{run_checks, CheckConfig};
use tvis::grid::{inner_product, relative_l2, zero_mean_project, Field, Image};
use tvis::spectral::Boundary;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (rows, cols) = (24, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = Image::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let b = Boundary::Periodic;

    for l in [1, 2, 3, 5] {
        let angles = AngleSet::new(l)?;
        let v = Field::new(rows, cols, l, (0..2 * l * rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let gu = mdg(&u, &angles, b);
        let adjoint_gap = inner_product(&gu, &v)? + inner_product(&u, &mdd(&v, &angles, b)?)?;
        let composition = relative_l2(&mdd(&gu, &angles, b)?, &divergence(&gradient(&u, b), b)?.scaled(l as f64))?;

        let f = zero_mean_project(&u);
        let integ = Integrator::new(rows, cols, &angles, b)?;
        let back = relative_l2(&integ.integrate(&gu)?, &f)?;
        let p = integ.project(&v)?;
        let idem = relative_l2(&integ.project(&p)?, &p)?;
        println!(
            "L={l}: <mdg u,v>+<u,mdd v> = {adjoint_gap:+.2e}  mdd(mdg u) vs L div grad u {composition:.1e}  \
             integrate(mdg f) vs f {back:.1e}  P(P v) vs P v {idem:.1e}"
        );
    }

    let results = run_checks(&CheckConfig { instances: 20, ..CheckConfig::default() })?;
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("\nidentity suite: {} checks, {failed} failed", results.len());
    for r in results.iter().filter(|r| r.shape == Some((32, 48))).take(6) {
        println!("  {r}");
    }
    Ok(())
}
