//! Synthetic degradations at the noise levels of the reference experiments,
//! with the PSNR actually reached for several seeds.
//!
//!     cargo run --release --example degrade_and_measure

use tvis::degrade::{degrade, psnr, shepp_logan, BlurSpec, NoiseSpec};
use tvis::spectral::condition_number;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = shepp_logan(256, 256)?;
    for (blur, target) in [("gauss:0.8", 21.3), ("gauss:1.2", 24.5), ("gauss:1.2", 19.0), ("box:5", 22.4)] {
        let spec: BlurSpec = blur.parse()?;
        let h = spec.filter(256, 256)?;
        let measured: Vec<String> = (0..4)
            .map(|seed| {
                let d = degrade(&f, &h, &NoiseSpec::target_psnr(target, seed)).unwrap();
                format!("{:.3}", psnr(&d.observed, &d.blurred).unwrap())
            })
            .collect();
        println!(
            "{blur:<10} cond(H) {:>12.1}  target {target:.1} dB  measured [{}]",
            condition_number(&h),
            measured.join(", ")
        );
    }
    Ok(())
}
