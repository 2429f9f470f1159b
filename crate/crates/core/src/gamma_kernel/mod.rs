//! The gamma kernel in closed, series and Fourier form, its gauge weight and
//! basis functions, and the z-measures on partitions.

mod basis;
mod fourier;
mod kernel;
mod params;
pub mod series;
mod zmeasure;

pub use basis::{basis_constant, basis_g, basis_g_run, basis_h, phi_hat_limit, rank_m_kernel_entry};
pub use fourier::{fourier_adaptive, fourier_numeric, phi_symbol, xi_kernel};
pub use kernel::{
    a_weight, c_constant, gauge, kernel_entry, kernel_series, modified_kernel_entry, trigamma_real,
    GammaKernel, Gauge, SiteData,
};
pub use params::{make_params, AdmissibleParams, LatticePoint, Series};
pub use zmeasure::{
    partitions_of, zmeasure_log_weight, zmeasure_density, zmeasure_partial_mass, zmeasure_weight, Partition,
};
