//! Total-variation image deconvolution by iterative shrinkage.
//!
//! The restored image is parametrized by a multidirectional gradient field:
//! TVIS alternates a back-projection through the blur and the spectral
//! integrator with soft thresholding of that field, then projects back onto
//! the range of the gradient. With `L` directions the regularizer sits between
//! isotropic and anisotropic total variation.
//!
//! ```
//! use tvis::degrade::{degrade, gaussian_blur_filter, psnr, shepp_logan, NoiseSpec};
//! use tvis::mld::estimate_lambda;
//! use tvis::shrinkage::{restore, SolverConfig};
//!
//! let f = shepp_logan(32, 32).unwrap();
//! let h = gaussian_blur_filter(1.2, 32, 32).unwrap();
//! let d = degrade(&f, &h, &NoiseSpec::target_psnr(25.0, 7)).unwrap();
//! let lambda = estimate_lambda(&d.observed, d.sigma_n * d.sigma_n).unwrap().lambda;
//! let out = restore(&d.observed, &h, &SolverConfig { lambda, max_iters: 50, ..Default::default() }).unwrap();
//! assert!(psnr(&out.restored, &f).unwrap() > psnr(&d.observed, &f).unwrap());
//! ```
//!
//! Modules: [`grid`] containers, [`spectral`] transforms and filters,
//! [`calculus`] gradients and the integrator, [`tv`] functionals,
//! [`shrinkage`] the TVIS solver, [`mld`] the lagged-diffusivity reference,
//! [`degrade`] blur, noise and phantoms, [`pnm`] graymap I/O, [`checks`]
//! operator self-tests and [`pipeline`] the command-line front end.

// `!(x >= 0.0)` style guards are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod checks;
pub mod degrade;
pub mod error;
pub mod grid;
pub mod mld;
pub mod pipeline;
pub mod pnm;
pub mod shrinkage;
pub mod spectral;
pub mod tv;
