//! Reference solution by lagged diffusivity with the epsilon schedule
//! 1e-2 -> 1e-6, compared with TVIS at several direction counts.
//!
//!     cargo run --release --example lagged_diffusivity

use std::time::Instant;

use tvis::degrade::{degrade, gaussian_blur_filter, psnr, shepp_logan, NoiseSpec};
use tvis::grid::relative_l2;
use tvis::mld::{estimate_lambda, lagged_residual, mld_restore, MldConfig};
use tvis::shrinkage::{restore, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 64;
    let f = shepp_logan(n, n)?;
    let h = gaussian_blur_filter(1.2, n, n)?;
    let d = degrade(&f, &h, &NoiseSpec::target_psnr(19.0, 1))?;
    let lambda = estimate_lambda(&d.observed, d.sigma_n * d.sigma_n)?.lambda;

    let t = Instant::now();
    let cfg = MldConfig::new(lambda);
    let mld = mld_restore(&d.observed, &h, &cfg)?;
    println!("lagged diffusivity, lambda {lambda:.2}: {:.1?}", t.elapsed());
    for s in &mld.stages {
        println!(
            "  eps {:.2e}: {:>3} outer, {:>5} CG, residual {:.2e}",
            s.epsilon, s.outer_iterations, s.cg_iterations, s.residual
        );
    }
    let eps = *cfg.epsilon_schedule.last().unwrap();
    println!(
        "  plug-back residual {:.2e}, PSNR {:.2} dB",
        lagged_residual(&mld.restored, &d.observed, &h, lambda, eps)?,
        psnr(&mld.restored, &f)?
    );

    for l in [1, 3, 6] {
        let cfg = SolverConfig { lambda, directions: l, max_iters: 20_000, rel_tol: 1e-8, ..SolverConfig::default() };
        let out = restore(&d.observed, &h, &cfg)?;
        println!(
            "TVIS-{l}: relative l2 to MLD {:.3}%, PSNR {:.2} dB ({} iterations)",
            100.0 * relative_l2(&out.restored, &mld.restored)?,
            psnr(&out.restored, &f)?,
            out.iterations()
        );
    }
    Ok(())
}
