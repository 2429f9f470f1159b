use std::f64::consts::PI;

use crate::error::Result;
use crate::specfun::{log_gamma_reduced, sin_pi, Complex};

use super::kernel::a_weight;
use super::params::{AdmissibleParams, LatticePoint};

/// `κ = sin(πz') Γ(1+z−z') / π`.
pub fn basis_constant(p: &AdmissibleParams) -> Result<Complex> {
    let g = log_gamma_reduced(1.0 + p.z() - p.zp())?.exp();
    Ok(sin_pi(p.zp()) * g / PI)
}

/// `h_m(x) = κ Γ(x+z'+m+½) / Γ(x+z+m+3/2)`.
pub fn basis_h(p: &AdmissibleParams, m: i64, x: LatticePoint) -> Result<Complex> {
    let t = x.x() + m as f64;
    let l = log_gamma_reduced(p.zp() + t + 0.5)? - log_gamma_reduced(p.z() + t + 1.5)?;
    Ok(basis_constant(p)? * l.exp())
}

/// `g_m(x) = A(x) h_m(x)`.
pub fn basis_g(p: &AdmissibleParams, m: i64, x: LatticePoint) -> Result<Complex> {
    Ok(a_weight(p, x)? * basis_h(p, m, x)?)
}

/// `g_0(x), …, g_{count−1}(x)` via the ratio recurrence in `m`.
pub fn basis_g_run(p: &AdmissibleParams, count: usize, x: LatticePoint) -> Result<Vec<Complex>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let mut g = basis_g(p, 0, x)?;
    for m in 0..count {
        out.push(g);
        let t = x.x() + m as f64;
        g *= (p.zp() + t + 0.5) / (p.z() + t + 1.5);
    }
    Ok(out)
}

/// Fourier coefficient `κ Γ(k+z') / Γ(k+z+1)` of the limit symbol.
pub fn phi_hat_limit(p: &AdmissibleParams, k: i64) -> Result<Complex> {
    let kf = k as f64;
    let l = log_gamma_reduced(p.zp() + kf)? - log_gamma_reduced(p.z() + kf + 1.0)?;
    Ok(basis_constant(p)? * l.exp())
}

/// Finite-rank kernel `K_m(x,y) = Σ_{i<m} g^{(z,z')}_i(x) g^{(z',z)}_i(y)`.
pub fn rank_m_kernel_entry(p: &AdmissibleParams, m: usize, x: LatticePoint, y: LatticePoint) -> Result<Complex> {
    let gx = basis_g_run(p, m, x)?;
    let gy = basis_g_run(&p.swap(), m, y)?;
    Ok(gx.iter().zip(&gy).map(|(a, b)| a * b).sum())
}
