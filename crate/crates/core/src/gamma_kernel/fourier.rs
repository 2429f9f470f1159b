use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::specfun::Complex;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::params::{AdmissibleParams, LatticePoint};

const GRADING: i32 = 6;
const MAX_NODES: usize = 1 << 22;

fn grade(t: f64) -> (f64, f64) {
    let a = t.powi(GRADING);
    let b = (1.0 - t).powi(GRADING);
    let s = a / (a + b);
    let ds = GRADING as f64 * (t * (1.0 - t)).powi(GRADING - 1) / ((a + b) * (a + b));
    (s, ds)
}

fn graded_midpoint<F: Fn(Complex) -> Complex>(f: &F, k: i64, nodes: usize) -> Complex {
    let h = 1.0 / nodes as f64;
    let mut acc = Complex::new(0.0, 0.0);
    for j in 0..nodes {
        let (s, ds) = grade((j as f64 + 0.5) * h);
        let theta = 2.0 * PI * s;
        let u = Complex::from_polar(1.0, theta);
        let phase = Complex::from_polar(1.0, -(k as f64) * theta);
        acc += f(u) * phase * ds;
    }
    acc * h
}

/// `k`-th Fourier coefficient `(1/2π) ∫ f(e^{iθ}) e^{−ikθ} dθ`.
///
/// Uses a midpoint rule in a variable that clusters nodes at `u = 1` (never
/// sampled), evaluated with `nodes` and `2·nodes` points; the finer estimate is
/// returned when the two agree within `tol`.
pub fn fourier_numeric<F: Fn(Complex) -> Complex>(f: F, k: i64, nodes: usize, tol: f64) -> Result<Complex> {
    let nodes = nodes.max(64);
    let coarse = graded_midpoint(&f, k, nodes);
    let fine = graded_midpoint(&f, k, 2 * nodes);
    let difference = (fine - coarse).norm();
    if difference > tol {
        return Err(Error::NonConvergent { difference });
    }
    Ok(fine)
}

/// Doubles the node count from 64 until two successive estimates agree within `tol`.
pub fn fourier_adaptive<F: Fn(Complex) -> Complex>(f: F, k: i64, tol: f64) -> Result<Complex> {
    let mut nodes = 64;
    let mut prev = graded_midpoint(&f, k, nodes);
    loop {
        nodes *= 2;
        let next = graded_midpoint(&f, k, nodes);
        let difference = (next - prev).norm();
        if difference <= tol {
            return Ok(next);
        }
        if nodes >= MAX_NODES {
            return Err(Error::NonConvergent { difference });
        }
        prev = next;
    }
}

/// `Φ_ξ(u) = (1 − √ξ/u)^{z'} / (1 − √ξ u)^{z}`; `ξ = 1` is the limit symbol.
pub fn phi_symbol(p: &AdmissibleParams, xi: f64, u: Complex) -> Complex {
    let r = xi.sqrt();
    let num = one_minus(r, u.conj() / u.norm_sqr());
    let den = one_minus(r, u);
    (p.zp() * num.ln() - p.z() * den.ln()).exp()
}

/// Correlation kernel of the z-measure built from Fourier coefficients of its
/// symbols: `K_ξ(x,y) = Σ_{n≥0} Φ̂(x+n+½) Φ̂'(y+n+½)` on the given sites.
///
/// `Φ̂` is taken from the symbol with parameters swapped and `Φ̂'` from the
/// unswapped symbol, which is the pairing whose `ξ → 1` limit coefficients are
/// [`phi_hat_limit`](super::phi_hat_limit) of `p` and of `p.swap()`.
pub fn xi_kernel(p: &AdmissibleParams, xi: f64, sites: &[LatticePoint], tol: f64) -> Result<DMatrix<Complex>> {
    if !(0.0 < xi && xi < 1.0) {
        return Err(Error::NotAdmissible(format!("xi = {xi} outside (0, 1)")));
    }
    let terms = ((tol * 1e-3).ln() / (0.5 * xi.ln())).ceil() as i64 + 16;
    let lo = sites.iter().map(|s| s.0).min().unwrap_or(0);
    let hi = sites.iter().map(|s| s.0).max().unwrap_or(0) + terms;
    let swapped = p.swap();
    let coeff = |q: &AdmissibleParams, k: i64| fourier_adaptive(|u| phi_symbol(q, xi, u), k, tol * 1e-3);
    let ks: Vec<i64> = (lo + 1..=hi + 1).collect();
    let phi: Vec<Complex> = ks.par_iter().map(|&k| coeff(&swapped, k)).collect::<Result<_>>()?;
    let phi_p: Vec<Complex> = ks.par_iter().map(|&k| coeff(p, k)).collect::<Result<_>>()?;
    let at = |v: &[Complex], k: i64| v[(k - lo - 1) as usize];
    Ok(DMatrix::from_fn(sites.len(), sites.len(), |i, j| {
        (0..terms)
            .map(|n| at(&phi, sites[i].0 + n + 1) * at(&phi_p, sites[j].0 + n + 1))
            .sum()
    }))
}

/// `1 − r·u` for `|u| = 1`, without cancellation near `u = 1`.
fn one_minus(r: f64, u: Complex) -> Complex {
    let theta = u.im.atan2(u.re);
    let half = (0.5 * theta).sin();
    Complex::new((1.0 - r) + r * 2.0 * half * half, -r * theta.sin())
}
