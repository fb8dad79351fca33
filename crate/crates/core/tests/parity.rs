//! The solver against an independent transcription of the reference routines.

mod common;

use common::Arr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvis::grid::Image;
use tvis::shrinkage::{iterate_fixed, Renormalize, SolverConfig};
use tvis::spectral::{normalize_blur, SpectralFilter};

pub struct Problem {
    pub g: Arr,
    pub kernel: Arr,
}

fn problem(n: usize, m: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Arr { n, m, d: (0..n * m).map(|_| rng.random_range(0.0..255.0)).collect() };
    let mut k = vec![0.0; n * m];
    for (di, wi) in [(-1isize, 1.0), (0, 2.0), (1, 1.0)] {
        for (dj, wj) in [(-1isize, 1.0), (0, 2.0), (1, 1.0)] {
            let i = di.rem_euclid(n as isize) as usize;
            let j = dj.rem_euclid(m as isize) as usize;
            k[i * m + j] += wi * wj / 16.0;
        }
    }
    Problem { g, kernel: Arr { n, m, d: k } }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn max_defect(l: usize, lambda: f64, iterations: usize) -> f64 {
    let (n, m) = (16, 16);
    let p = problem(n, m, 7 + l as u64);
    let (c, tau) = common::step_and_threshold(n, m, l, lambda, 1e-3);
    let states = common::run(&p.g, &common::transfer(&p.kernel), l, c, tau, iterations);

    let g = Image::new(n, m, p.g.d.clone()).unwrap();
    let h = normalize_blur(&SpectralFilter::from_kernel(&Image::new(n, m, p.kernel.d.clone()).unwrap())).unwrap();
    let mut worst: f64 = 0.0;
    for (k, (v, f)) in states.iter().enumerate() {
        let cfg = SolverConfig {
            lambda,
            directions: l,
            max_iters: k + 1,
            rel_tol: 0.0,
            renormalize: Renormalize::None,
            ..SolverConfig::default()
        };
        let out = iterate_fixed(&g, &h, &cfg).unwrap();
        assert_eq!(out.iterations(), k + 1);
        assert!((out.step - c).abs() <= 1e-12 * c);
        let oracle_v: Vec<f64> = v.iter().flat_map(|ch| ch.d.iter().copied()).collect();
        worst = worst.max(rel(out.field.as_slice(), &oracle_v));
        worst = worst.max(rel(out.restored.as_slice(), &f.d));
    }
    worst
}

#[test]
fn five_updates_match_reference_single_direction() {
    let d = max_defect(1, 20.0, 5);
    assert!(d <= 1e-12, "defect {d:e}");
}

#[test]
fn five_updates_match_reference_three_directions() {
    let d = max_defect(3, 20.0, 5);
    assert!(d <= 1e-12, "defect {d:e}");
}

#[test]
fn oracle_dft_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<num_complex::Complex64> =
        (0..35).map(|_| num_complex::Complex64::new(rng.random(), rng.random())).collect();
    let back = common::dft2(&common::dft2(&x, 5, 7, false), 5, 7, true);
    for (a, b) in x.iter().zip(&back) {
        assert!((a - b).norm() < 1e-13);
    }
}

