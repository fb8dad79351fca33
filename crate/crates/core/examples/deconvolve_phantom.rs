//! End-to-end deconvolution of the Shepp-Logan phantom with TVIS-1 and TVIS-3,
//! lambda estimated from the observation.
//!
//!     cargo run --release --example deconvolve_phantom -- [size] [iterations] [--backtracking]

use std::time::Instant;

use tvis::degrade::{degrade, gaussian_blur_filter, psnr, shepp_logan, NoiseSpec};
use tvis::mld::estimate_lambda;
use tvis::shrinkage::{restore, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let backtracking = args.iter().any(|a| a == "--backtracking");
    let mut nums = args.iter().filter_map(|a| a.parse::<usize>().ok());
    let n = nums.next().unwrap_or(256);
    let iters = nums.next().unwrap_or(500);

    let f = shepp_logan(n, n)?;
    let h = gaussian_blur_filter(1.2, n, n)?;
    let d = degrade(&f, &h, &NoiseSpec::target_psnr(19.0, 1))?;
    let est = estimate_lambda(&d.observed, d.sigma_n * d.sigma_n)?;
    println!(
        "{n}x{n} phantom, gauss 1.2, noise PSNR {:.2} dB, observed vs truth {:.2} dB, lambda {:.2}",
        psnr(&d.observed, &d.blurred)?,
        psnr(&d.observed, &f)?,
        est.lambda
    );

    for l in [1, 3] {
        let cfg = SolverConfig {
            lambda: est.lambda,
            directions: l,
            max_iters: iters,
            backtracking,
            ..SolverConfig::default()
        };
        let t = Instant::now();
        let out = restore(&d.observed, &h, &cfg)?;
        println!(
            "TVIS-{l}: {:.2} dB after {} iterations (converged: {}), c0 = {:.2}, final energy {:.6e}, {:.1?}",
            psnr(&out.restored, &f)?,
            out.iterations(),
            out.converged,
            out.step,
            out.final_energy(),
            t.elapsed()
        );
    }
    Ok(())
}
