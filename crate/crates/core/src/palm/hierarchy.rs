use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::finite_dpp::{cylinder_prob, Configuration, Sampler, Window};
use crate::gamma_kernel::{basis_g_run, GammaKernel, LatticePoint, SiteData};
use crate::specfun::Complex;

use super::far_field::{far_moments, Moments};
use super::{phi_multiplier, psi_check, reduced_palm_kernel, PalmContext};

const EXPANSION_TERMS: usize = 28;
const INNER_FACTOR: usize = 4;
const DEFAULT_OUTER: usize = 200_000;

type CMatrix = DMatrix<Complex>;

/// Reduced Palm kernel of the gamma kernel on `X_R∖{p}` against `X_{R₀}∖{p}`,
/// together with the far-field expansion coefficients of its rows.
struct PalmRows {
    kernel: GammaKernel,
    radius: usize,
    inner: usize,
    rows: Vec<LatticePoint>,
    cols: Vec<LatticePoint>,
    /// `K(p)(x, w)` for `x ∈ rows`, `w ∈ cols`.
    block: DMatrix<f64>,
    /// `P(x)(x/R₀)^j − c(x)P(p)(p/R₀)^j`.
    alpha: CMatrix,
    /// `Q(x)(x/R₀)^j − c(x)Q(p)(p/R₀)^j`.
    beta: CMatrix,
}

impl PalmRows {
    fn new(ctx: &PalmContext, radius: usize) -> Result<Self> {
        let kernel = ctx.kernel();
        let inner = INNER_FACTOR * radius;
        let p = ctx.p;
        let all = Window::symmetric(inner);
        let data: Vec<SiteData> = all.sites().par_iter().map(|&x| kernel.site_data(x)).collect::<Result<_>>()?;
        let at = |x: LatticePoint| &data[all.index_of(x).expect("site inside inner window")];
        let dp = *at(p);
        let rows: Vec<LatticePoint> = Window::symmetric(radius).sites().iter().copied().filter(|&x| x != p).collect();
        let cols: Vec<LatticePoint> = all.sites().iter().copied().filter(|&x| x != p).collect();
        let kpp = dp.diagonal;
        let kp: Vec<f64> = cols.par_iter().map(|&w| kernel.entry_from(&dp, at(w))).collect::<Result<_>>()?;
        let c: Vec<f64> = rows.iter().map(|&x| Ok(kernel.entry_from(at(x), &dp)? / kpp)).collect::<Result<_>>()?;
        let row_vals: Vec<Vec<f64>> = rows
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let dx = at(x);
                cols.iter()
                    .enumerate()
                    .map(|(j, &w)| Ok(kernel.entry_from(dx, at(w))? - c[i] * kp[j]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let block = DMatrix::from_fn(rows.len(), cols.len(), |i, j| row_vals[i][j]);
        let r0 = inner as f64;
        let pp = p.x() / r0;
        let alpha = CMatrix::from_fn(rows.len(), EXPANSION_TERMS, |i, j| {
            let d = at(rows[i]);
            d.p * (rows[i].x() / r0).powi(j as i32) - c[i] * dp.p * pp.powi(j as i32)
        });
        let beta = CMatrix::from_fn(rows.len(), EXPANSION_TERMS, |i, j| {
            let d = at(rows[i]);
            d.q * (rows[i].x() / r0).powi(j as i32) - c[i] * dp.q * pp.powi(j as i32)
        });
        Ok(Self { kernel, radius, inner, rows, cols, block, alpha, beta })
    }

    /// Far-field part of `Σ_w K(p)(x,w) f(w)` for each column of moments
    /// `U = Σ Q f (R₀/w)^j/w`, `V = Σ P f (R₀/w)^j/w`.
    fn far_apply(&self, moments: &Moments, nf: usize, remainder_only: bool) -> CMatrix {
        let kappa = self.kernel.scale();
        let pick = |f: usize, j: usize| {
            let i = f * moments.powers + j;
            if remainder_only {
                moments.remainder[i]
            } else {
                moments.direct[i] + moments.remainder[i]
            }
        };
        let u = CMatrix::from_fn(EXPANSION_TERMS, nf, |j, f| pick(2 * f, j));
        let v = CMatrix::from_fn(EXPANSION_TERMS, nf, |j, f| pick(2 * f + 1, j));
        (&self.alpha * u - &self.beta * v) * (-kappa)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RangeRow {
    pub m: usize,
    pub residual: f64,
    /// Relative size of the extrapolated contribution from beyond the outer radius.
    pub tail_correction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RangeInclusionReport {
    pub radius: usize,
    pub inner_radius: usize,
    pub outer_radius: usize,
    pub tolerance: f64,
    pub rows: Vec<RangeRow>,
    /// Residual for `g_m − (g_m(p)/K(p,p)) K(·,p)`, which also lies in the Palm range.
    pub corrected_basis_residuals: Vec<f64>,
    /// Residual for a point mass at the window edge; close to 1.
    pub negative_control: f64,
    pub passed: bool,
}

fn relative_residuals(kf: &CMatrix, f: &CMatrix) -> Vec<f64> {
    (0..f.ncols())
        .map(|c| (kf.column(c) - f.column(c)).norm() / f.column(c).norm())
        .collect()
}

/// Applies the reduced Palm kernel to functions given by `values` (inner sites)
/// and `far` (beyond the inner window, returned as one vector per site).
fn apply_palm<F, G>(rows: &PalmRows, nf: usize, outer: usize, values: F, far: G) -> Result<(CMatrix, CMatrix, f64)>
where
    F: Fn(LatticePoint) -> Result<Vec<Complex>> + Sync,
    G: Fn(LatticePoint) -> Result<Vec<Complex>> + Sync,
{
    let fcols: Vec<Vec<Complex>> = rows.cols.par_iter().map(|&w| values(w)).collect::<Result<_>>()?;
    let f_re = DMatrix::from_fn(rows.cols.len(), nf, |i, j| fcols[i][j].re);
    let f_im = DMatrix::from_fn(rows.cols.len(), nf, |i, j| fcols[i][j].im);
    let inner_re = &rows.block * f_re;
    let inner_im = &rows.block * f_im;
    let kernel = rows.kernel;
    let moments = far_moments(rows.inner, outer, 2 * nf, EXPANSION_TERMS, 1, |w| {
        let (p, q) = kernel.integrable_parts(w)?;
        let vals = far(w)?;
        Ok(vals.iter().flat_map(|v| [q * v, p * v]).collect())
    })?;
    let far_total = rows.far_apply(&moments, nf, false);
    let far_rem = rows.far_apply(&moments, nf, true);
    let kf = CMatrix::from_fn(rows.rows.len(), nf, |i, j| {
        Complex::new(inner_re[(i, j)], inner_im[(i, j)]) + far_total[(i, j)]
    });
    let f_rows = CMatrix::from_fn(rows.rows.len(), nf, |i, j| {
        let k = rows.cols.binary_search(&rows.rows[i]).expect("row site is a column site");
        fcols[k][j]
    });
    let norm_f = f_rows.norm().max(f64::MIN_POSITIVE);
    let tail = far_rem.norm() / norm_f;
    Ok((kf, f_rows, tail))
}

/// Checks `φ·g^{(z+1,z'+1)}_m ∈ Ran K(p)` for `m = 0..=m_max` by measuring
/// `‖K(p)f − f‖/‖f‖` on `X_R∖{p}`, with `K(p)f` summed over the whole lattice.
pub fn verify_range_inclusion(ctx: &PalmContext, m_max: usize, radius: usize) -> Result<RangeInclusionReport> {
    verify_range_inclusion_with(ctx, m_max, radius, DEFAULT_OUTER, 1e-3)
}

pub fn verify_range_inclusion_with(
    ctx: &PalmContext,
    m_max: usize,
    radius: usize,
    outer: usize,
    tolerance: f64,
) -> Result<RangeInclusionReport> {
    let rows = PalmRows::new(ctx, radius)?;
    let nf = m_max + 1;
    let shifted = ctx.shifted;
    let f = |w: LatticePoint| -> Result<Vec<Complex>> {
        let phi = phi_multiplier(ctx, w)?;
        Ok(basis_g_run(&shifted, nf, w)?.into_iter().map(|g| g * phi).collect())
    };
    let (kf, fr, tail) = apply_palm(&rows, nf, outer, f, f)?;
    let residuals = relative_residuals(&kf, &fr);
    let tails: Vec<f64> = (0..nf).map(|_| tail).collect();
    let out_rows: Vec<RangeRow> = residuals
        .iter()
        .zip(&tails)
        .enumerate()
        .map(|(m, (&r, &t))| RangeRow { m, residual: r, tail_correction: t, passed: r <= tolerance })
        .collect();

    let kernel = rows.kernel;
    let p = ctx.p;
    let dp = kernel.site_data(p)?;
    let gp = basis_g_run(&ctx.params, nf, p)?;
    let corrected = |w: LatticePoint| -> Result<Vec<Complex>> {
        let kwp = kernel.entry_from(&kernel.site_data(w)?, &dp)?;
        Ok(basis_g_run(&ctx.params, nf, w)?
            .into_iter()
            .zip(&gp)
            .map(|(g, gpm)| g - gpm * kwp / dp.diagonal)
            .collect())
    };
    let (kf2, fr2, _) = apply_palm(&rows, nf, outer, corrected, corrected)?;
    let corrected_basis_residuals = relative_residuals(&kf2, &fr2);

    let edge = LatticePoint(radius as i64 - 1);
    let delta = |w: LatticePoint| Ok(vec![Complex::new(f64::from(w == edge), 0.0)]);
    let zero = |_: LatticePoint| Ok(vec![Complex::new(0.0, 0.0)]);
    let (kf3, fr3, _) = apply_palm(&rows, 1, 8 * rows.inner, delta, zero)?;
    let negative_control = relative_residuals(&kf3, &fr3)[0];

    let passed = out_rows.iter().all(|r| r.passed);
    Ok(RangeInclusionReport {
        radius,
        inner_radius: rows.inner,
        outer_radius: outer.max(8 * rows.inner),
        tolerance,
        rows: out_rows,
        corrected_basis_residuals,
        negative_control,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdempotencyReport {
    pub radius: usize,
    pub inner_radius: usize,
    pub outer_radius: usize,
    /// `max |K(p)² − K(p)|` over `X_R∖{p}`.
    pub residual: f64,
    /// Same quantity with the far-field correction dropped, showing its effect.
    pub residual_without_tail: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `‖K(p)² − K(p)‖_max` on `X_R∖{p}` for the gamma kernel, with the product
/// summed over the whole lattice via a Hankel expansion beyond `X_{R₀}`.
pub fn palm_idempotency(ctx: &PalmContext, radius: usize, tolerance: f64) -> Result<IdempotencyReport> {
    let rows = PalmRows::new(ctx, radius)?;
    let inner = &rows.block * rows.block.transpose();
    let kernel = rows.kernel;
    let powers = 2 * EXPANSION_TERMS - 1;
    let moments = far_moments(rows.inner, DEFAULT_OUTER, 3, powers, 2, |w| {
        let (p, q) = kernel.integrable_parts(w)?;
        Ok(vec![q * q, q * p, p * p])
    })?;
    let hankel = |f: usize| CMatrix::from_fn(EXPANSION_TERMS, EXPANSION_TERMS, |j, k| moments.get(f, j + k));
    let (hqq, hqp, hpp) = (hankel(0), hankel(1), hankel(2));
    let (a, b) = (&rows.alpha, &rows.beta);
    let kappa = kernel.scale();
    let tail = (a * &hqq * a.transpose() - a * &hqp * b.transpose() - b * &hqp * a.transpose()
        + b * &hpp * b.transpose())
        * (kappa * kappa);
    let n = rows.rows.len();
    let target = |i: usize, j: usize| {
        let k = rows.cols.binary_search(&rows.rows[j]).expect("row site is a column site");
        rows.block[(i, k)]
    };
    let mut residual: f64 = 0.0;
    let mut residual_without_tail: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = target(i, j);
            residual = residual.max((inner[(i, j)] + tail[(i, j)].re - t).abs());
            residual_without_tail = residual_without_tail.max((inner[(i, j)] - t).abs());
        }
    }
    Ok(IdempotencyReport {
        radius: rows.radius,
        inner_radius: rows.inner,
        outer_radius: DEFAULT_OUTER.max(8 * rows.inner),
        residual,
        residual_without_tail,
        tolerance,
        passed: residual <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Weighting {
    /// Weight each sample by `Ψ̌`.
    PsiCheck,
    /// Ablation: every sample has weight 1.
    Unit,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternRow {
    pub occupied: Vec<f64>,
    pub exact: f64,
    pub estimate: f64,
    pub sigma: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyReport {
    pub radius: usize,
    pub samples: usize,
    pub seed: u64,
    pub weighting: Weighting,
    pub sites: Vec<f64>,
    pub rows: Vec<PatternRow>,
    pub total_variation: f64,
    pub max_abs_z: f64,
    pub effective_samples: f64,
    /// Fraction of samples with a particle at `p` (weight zero under `Ψ̌`).
    pub occupied_at_p: f64,
    pub passed: bool,
}

/// Compares cylinder probabilities on `t` under the reduced Palm measure of
/// `K^{(z,z')}` at `p` with `Ψ̌`-reweighted samples of `M^{(z+1,z'+1)}` on `X_R`.
pub fn verify_hierarchy_mc(
    ctx: &PalmContext,
    radius: usize,
    t: &[LatticePoint],
    samples: usize,
    seed: u64,
    weighting: Weighting,
) -> Result<HierarchyReport> {
    Ok(verify_hierarchy_mc_weightings(ctx, radius, t, samples, seed, &[weighting])?.remove(0))
}

/// As [`verify_hierarchy_mc`], evaluating several weightings on one batch of draws.
pub fn verify_hierarchy_mc_weightings(
    ctx: &PalmContext,
    radius: usize,
    t: &[LatticePoint],
    samples: usize,
    seed: u64,
    weightings: &[Weighting],
) -> Result<Vec<HierarchyReport>> {
    let window = Window::symmetric(radius);
    let tw = Window::new(t.to_vec())?;
    if tw.contains(ctx.p) || tw.sites().iter().any(|&x| !window.contains(x)) {
        return Err(crate::Error::SubsetViolation("T must lie in X_R without p".into()));
    }
    let mut local = t.to_vec();
    local.push(ctx.p);
    let local = Window::new(local)?;
    let exact_kernel = reduced_palm_kernel(&ctx.kernel().truncate(&local)?, ctx.p)?;
    let patterns = 1usize << tw.len();
    let exact: Vec<f64> = (0..patterns)
        .map(|mask| cylinder_prob(&exact_kernel, tw.sites(), &Configuration::from_mask(&tw, mask as u64)))
        .collect::<Result<_>>()?;

    let sampler = Sampler::new(&ctx.shifted_kernel().truncate(&window)?)?;
    let draws: Vec<(usize, f64, bool)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let omega = sampler.sample(seed, i);
            let psi = psi_check(ctx, &omega, &window)?.value;
            let restricted = omega.restrict(tw.sites());
            Ok((restricted.mask(&tw)? as usize, psi, omega.contains(ctx.p)))
        })
        .collect::<Result<_>>()?;
    let occupied_at_p = draws.iter().filter(|d| d.2).count() as f64 / samples.max(1) as f64;

    Ok(weightings
        .iter()
        .map(|&weighting| {
            let weight = |psi: f64| match weighting {
                Weighting::PsiCheck => psi,
                Weighting::Unit => 1.0,
            };
            let total: f64 = draws.iter().map(|d| weight(d.1)).sum();
            let total_sq: f64 = draws.iter().map(|d| weight(d.1).powi(2)).sum();
            let n_eff = total * total / total_sq;
            let mut mass = vec![0.0; patterns];
            for &(mask, psi, _) in &draws {
                mass[mask] += weight(psi);
            }
            let rows: Vec<PatternRow> = (0..patterns)
                .map(|s| {
                    let estimate = mass[s] / total;
                    let var: f64 = draws
                        .iter()
                        .map(|&(mask, psi, _)| {
                            let dev = f64::from(mask == s) - exact[s];
                            weight(psi).powi(2) * dev * dev
                        })
                        .sum::<f64>()
                        / (total * total);
                    let sigma = var.max(exact[s] * (1.0 - exact[s]) / n_eff).sqrt().max(1e-300);
                    PatternRow {
                        occupied: Configuration::from_mask(&tw, s as u64).occupied().iter().map(|x| x.x()).collect(),
                        exact: exact[s],
                        estimate,
                        sigma,
                        z_score: (estimate - exact[s]) / sigma,
                    }
                })
                .collect();
            let total_variation = 0.5 * rows.iter().map(|r| (r.estimate - r.exact).abs()).sum::<f64>();
            let max_abs_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
            HierarchyReport {
                radius,
                samples,
                seed,
                weighting,
                sites: tw.sites().iter().map(|x| x.x()).collect(),
                rows,
                total_variation,
                max_abs_z,
                effective_samples: n_eff,
                occupied_at_p,
                passed: max_abs_z <= 4.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma_kernel::make_params;

    fn ctx(z: (f64, f64), zp: (f64, f64)) -> PalmContext {
        let p = make_params(Complex::new(z.0, z.1), Complex::new(zp.0, zp.1)).unwrap();
        PalmContext::new(p, LatticePoint(0)).unwrap()
    }

    #[test]
    fn shifted_basis_lies_in_palm_range() {
        let r = verify_range_inclusion_with(&ctx((0.3, 0.2), (0.3, -0.2)), 2, 40, 50_000, 1e-6).unwrap();
        assert!(r.passed, "{:?}", r.rows);
        assert!(r.corrected_basis_residuals.iter().all(|&x| x < 1e-3));
        assert!(r.negative_control > 0.9);
    }

    #[test]
    fn palm_kernel_is_nearly_idempotent() {
        let r = palm_idempotency(&ctx((0.4, 0.0), (0.7, 0.0)), 40, 1e-6).unwrap();
        assert!(r.passed, "{}", r.residual);
        assert!(r.residual_without_tail > 100.0 * r.residual);
    }

    #[test]
    fn reweighting_matches_palm_and_ablation_does_not() {
        let c = ctx((0.4, 0.0), (0.7, 0.0));
        let t: Vec<_> = [-2, -1, 1, 2].iter().map(|&k| LatticePoint(k)).collect();
        let w = verify_hierarchy_mc(&c, 12, &t, 4000, 3, Weighting::PsiCheck).unwrap();
        let u = verify_hierarchy_mc(&c, 12, &t, 4000, 3, Weighting::Unit).unwrap();
        let sum: f64 = w.rows.iter().map(|r| r.estimate).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let exact: f64 = w.rows.iter().map(|r| r.exact).sum();
        assert!((exact - 1.0).abs() < 1e-10);
        assert!(u.max_abs_z > w.max_abs_z);
        assert!(!u.passed);
    }

    #[test]
    fn pattern_window_must_avoid_p() {
        let c = ctx((0.4, 0.0), (0.7, 0.0));
        let t = vec![LatticePoint(0), LatticePoint(1)];
        assert!(verify_hierarchy_mc(&c, 10, &t, 10, 0, Weighting::Unit).is_err());
    }
}
