//! Determinantal point processes on `ℤ + ½` with gamma kernels.
//!
//! ```
//! use gamma_dpp::finite_dpp::{Sampler, Window};
//! use gamma_dpp::gamma_kernel::{AdmissibleParams, GammaKernel, LatticePoint};
//! use gamma_dpp::palm::reduced_palm_kernel;
//!
//! let params = AdmissibleParams::principal(0.4, 0.7)?;
//! let kernel = GammaKernel::new(params);
//! let rho = kernel.rho1(LatticePoint(0))?;
//! assert!(rho > 0.0 && rho < 1.0);
//!
//! let k = kernel.truncate(&Window::symmetric(20))?;
//! let omega = Sampler::new(&k)?.sample(42, 0);
//! let palm = reduced_palm_kernel(&k, LatticePoint(0))?;
//! assert_eq!(palm.dim(), 39);
//! # let _ = omega;
//! # Ok::<(), gamma_dpp::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod finite_dpp;
pub mod functionals;
pub mod gamma_kernel;
pub mod palm;
pub mod verify;
pub mod specfun;

pub use error::{Error, Result};
