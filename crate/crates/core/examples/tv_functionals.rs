//! Anisotropic, isotropic and multidirectional total variation of the
//! phantom, and the Riemann-sum approximation behind TV_L.
//!
//!     cargo run --release --example tv_functionals

use tvis::calculus::AngleSet;
use tvis::degrade::shepp_logan;
use tvis::spectral::Boundary;
use tvis::tv::{riemann_i, tv_a, tv_i, tv_l};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = shepp_logan(128, 128)?;
    let b = Boundary::Periodic;
    let (a, i) = (tv_a(&f, b), tv_i(&f, b));
    println!("TV_a = {a:.1}\nTV_i = {i:.1}");
    for l in [1, 2, 3, 4, 8, 16, 32] {
        let t = tv_l(&f, &AngleSet::new(l)?, b);
        println!("TV_{l:<2} = {t:.1}  (excess over TV_i {:.3}%)", 100.0 * (t - i) / i);
    }

    println!("\nI(cos t, sin t; L) for a unit vector at angle t:");
    for l in [1, 3, 8] {
        let angles = AngleSet::new(l)?;
        let worst = (0..=90)
            .map(|deg| (deg as f64).to_radians())
            .map(|t| riemann_i(t.cos(), t.sin(), &angles))
            .fold(0.0, f64::max);
        println!("  L={l}: worst over [0, 90] deg = {worst:.5}");
    }
    Ok(())
}
