//! Laplacian symbol, integration filter, step-constant bound and blur
//! conditioning on a 256 x 256 grid.
//!
//!     cargo run --release --example spectral_symbols

use tvis::degrade::gaussian_blur_filter;
use tvis::shrinkage::{build_a, step_constant};
use tvis::spectral::{condition_number, integration_filter, laplacian_symbol, max_integration_gain, Boundary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 256;
    let w = laplacian_symbol(n, n, Boundary::Periodic)?;
    let wi = integration_filter(n, n, Boundary::Periodic)?;
    let gains: Vec<f64> = wi.coeffs().iter().map(|z| z.re.abs()).collect();
    let mut sorted = gains.clone();
    sorted.sort_by(f64::total_cmp);
    println!("W range: [{:.3}, {:.3}]", w.coeffs().iter().map(|z| z.re).fold(f64::INFINITY, f64::min), w.coeffs()[0].re);
    println!("|W_i|: median {:.4}, max {:.1} (closed form {:.1})", sorted[sorted.len() / 2], sorted[sorted.len() - 1], max_integration_gain(n, n));
    println!("|W_i| > 10 at {} of {} frequencies", gains.iter().filter(|&&g| g > 10.0).count(), gains.len());

    for l in [1, 2, 3, 5, 8] {
        println!("step constant L={l}: {:.2}", step_constant(n, n, l, 0.0));
    }
    for sigma in [0.8, 1.2, 2.0] {
        let h = gaussian_blur_filter(sigma, n, n)?;
        let a = build_a(&h, &wi)?;
        println!("gauss sigma={sigma}: cond(H) = {:.4e}, max|A|^2 = {:.2}", condition_number(&h), a.max_abs().powi(2));
    }
    Ok(())
}
