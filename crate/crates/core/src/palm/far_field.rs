//! Sums over the far lattice `|x| > R₀` of the form `Σ F(w) (R₀/w)^n / w^e`.
//!
//! Each side is summed exactly out to `Y`; the remainder beyond `Y` is
//! extrapolated by fitting a power law to the sums over `[Y/4, Y/2]` and
//! `[Y/2, Y]`, which is exact for terms behaving like `c·w^{−s}` with complex `s`.

use rayon::prelude::*;

use crate::error::Result;
use crate::gamma_kernel::LatticePoint;
use crate::specfun::Complex;

const CHUNK: i64 = 4096;

/// Far-field moments indexed by `[function][power]`.
#[derive(Debug, Clone)]
pub struct Moments {
    pub funcs: usize,
    pub powers: usize,
    /// Exact sums over `R₀ < |w| ≤ Y`.
    pub direct: Vec<Complex>,
    /// Extrapolated contribution of `|w| > Y`.
    pub remainder: Vec<Complex>,
}

impl Moments {
    pub fn get(&self, f: usize, n: usize) -> Complex {
        let i = f * self.powers + n;
        self.direct[i] + self.remainder[i]
    }

    pub fn remainder_norm(&self) -> f64 {
        self.remainder.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn segment<F>(lo: i64, hi: i64, r0: f64, funcs: usize, powers: usize, exponent: i32, eval: &F) -> Result<Vec<Complex>>
where
    F: Fn(LatticePoint) -> Result<Vec<Complex>> + Sync,
{
    let starts: Vec<i64> = (lo..hi).step_by(CHUNK as usize).collect();
    let parts = starts
        .par_iter()
        .map(|&start| {
            let mut acc = vec![Complex::new(0.0, 0.0); funcs * powers];
            for k in start..(start + CHUNK).min(hi) {
                let site = LatticePoint(k);
                let w = site.x();
                let vals = eval(site)?;
                let base = w.powi(-exponent);
                let ratio = r0 / w;
                for (f, v) in vals.iter().enumerate() {
                    let mut term = v * base;
                    for n in 0..powers {
                        acc[f * powers + n] += term;
                        term *= ratio;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![Complex::new(0.0, 0.0); funcs * powers];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

fn extrapolate(d1: Complex, d2: Complex) -> Complex {
    if d1.norm() == 0.0 || d2.norm() == 0.0 {
        return Complex::new(0.0, 0.0);
    }
    let rho = d2 / d1;
    if rho.norm() >= 0.95 {
        return Complex::new(0.0, 0.0);
    }
    d2 * rho / (1.0 - rho)
}

/// Computes `Σ_{|w| > R₀} F_f(w) (R₀/w)^n w^{−exponent}` for every function
/// `f < funcs` and power `n < powers`. `outer` is raised to at least `8·R₀`.
pub fn far_moments<F>(r0: usize, outer: usize, funcs: usize, powers: usize, exponent: i32, eval: F) -> Result<Moments>
where
    F: Fn(LatticePoint) -> Result<Vec<Complex>> + Sync,
{
    let r0i = r0 as i64;
    let y = (outer.max(8 * r0) as i64 / 4) * 4;
    let (q1, q2) = (y / 4, y / 2);
    let r0f = r0 as f64;
    let mut direct = vec![Complex::new(0.0, 0.0); funcs * powers];
    let mut remainder = vec![Complex::new(0.0, 0.0); funcs * powers];
    // Positive side: k ∈ [R₀, Y); negative side: k ∈ [−Y, −R₀).
    for (a, b, c, d) in [(r0i, q1, q2, y), (-r0i - 1, -q1 - 1, -q2 - 1, -y - 1)] {
        let seg = |lo: i64, hi: i64| {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi + 1, lo + 1) };
            segment(lo, hi, r0f, funcs, powers, exponent, &eval)
        };
        let s0 = seg(a, b)?;
        let s1 = seg(b, c)?;
        let s2 = seg(c, d)?;
        for i in 0..funcs * powers {
            direct[i] += s0[i] + s1[i] + s2[i];
            remainder[i] += extrapolate(s1[i], s2[i]);
        }
    }
    Ok(Moments { funcs, powers, direct, remainder })
}
