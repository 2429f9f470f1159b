//! Palm and hole conditioning, the perturbation weight `a_p`, the functional
//! `Ψ̌`, and the checks of the Palm hierarchy `M^{(z,z')}(p) ∝ Ψ̌·M^{(z+1,z'+1)}`.

pub mod far_field;
mod hierarchy;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite_dpp::{Configuration, KernelMatrix, Window};
use crate::gamma_kernel::{AdmissibleParams, GammaKernel, LatticePoint};
use crate::specfun::Complex;

pub use crate::gamma_kernel::rank_m_kernel_entry;
pub use hierarchy::{
    palm_idempotency, verify_hierarchy_mc, verify_hierarchy_mc_weightings, verify_range_inclusion, verify_range_inclusion_with,
    HierarchyReport, IdempotencyReport, PatternRow, RangeInclusionReport, RangeRow, Weighting,
};

const DENSITY_GUARD: f64 = 1e-12;

/// A kernel given entrywise.
pub trait EntryKernel: Sync {
    fn entry(&self, x: LatticePoint, y: LatticePoint) -> Result<f64>;
}

impl EntryKernel for GammaKernel {
    fn entry(&self, x: LatticePoint, y: LatticePoint) -> Result<f64> {
        GammaKernel::entry(self, x, y)
    }
}

impl EntryKernel for KernelMatrix {
    fn entry(&self, x: LatticePoint, y: LatticePoint) -> Result<f64> {
        self.get(x, y).ok_or_else(|| Error::SubsetViolation(format!("({x}, {y}) outside window")))
    }
}

/// `K(x,y) − K(x,p)K(p,y)/K(p,p)` on the ground set without `p`.
pub struct ReducedPalm<K> {
    base: K,
    p: LatticePoint,
    kpp: f64,
}

impl<K: EntryKernel> ReducedPalm<K> {
    pub fn new(base: K, p: LatticePoint) -> Result<Self> {
        let kpp = base.entry(p, p)?;
        if kpp <= DENSITY_GUARD {
            return Err(Error::ZeroDensityAtP(kpp));
        }
        Ok(Self { base, p, kpp })
    }

    pub fn p(&self) -> LatticePoint {
        self.p
    }
}

impl<K: EntryKernel> EntryKernel for ReducedPalm<K> {
    fn entry(&self, x: LatticePoint, y: LatticePoint) -> Result<f64> {
        if x == self.p || y == self.p {
            return Err(Error::EvaluatedAtP);
        }
        let kxp = self.base.entry(x, self.p)?;
        let kpy = self.base.entry(self.p, y)?;
        Ok(self.base.entry(x, y)? - kxp * kpy / self.kpp)
    }
}

/// `K(x,y) + K(x,p)K(p,y)/(1 − K(p,p))` on the ground set without `p`.
pub struct Hole<K> {
    base: K,
    p: LatticePoint,
    kpp: f64,
}

impl<K: EntryKernel> Hole<K> {
    pub fn new(base: K, p: LatticePoint) -> Result<Self> {
        let kpp = base.entry(p, p)?;
        if kpp >= 1.0 - DENSITY_GUARD {
            return Err(Error::FullDensityAtP(kpp));
        }
        Ok(Self { base, p, kpp })
    }
}

impl<K: EntryKernel> EntryKernel for Hole<K> {
    fn entry(&self, x: LatticePoint, y: LatticePoint) -> Result<f64> {
        if x == self.p || y == self.p {
            return Err(Error::EvaluatedAtP);
        }
        let kxp = self.base.entry(x, self.p)?;
        let kpy = self.base.entry(self.p, y)?;
        Ok(self.base.entry(x, y)? + kxp * kpy / (1.0 - self.kpp))
    }
}

fn schur(k: &KernelMatrix, p: LatticePoint, sign: f64, denom: f64) -> Result<KernelMatrix> {
    let ip = k.window().index_of(p).ok_or_else(|| Error::SubsetViolation(format!("p = {p} outside window")))?;
    let window = k.window().without(p)?;
    let keep: Vec<usize> = (0..k.dim()).filter(|&i| i != ip).collect();
    let m = k.matrix();
    let entries = DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
        let (a, b) = (keep[i], keep[j]);
        m[(a, b)] + sign * m[(a, ip)] * m[(ip, b)] / denom
    });
    KernelMatrix::new_unchecked(window, entries)
}

/// Reduced Palm kernel of a kernel matrix at `p`.
pub fn reduced_palm_kernel(k: &KernelMatrix, p: LatticePoint) -> Result<KernelMatrix> {
    let kpp = k.entry(p, p)?;
    if kpp <= DENSITY_GUARD {
        return Err(Error::ZeroDensityAtP(kpp));
    }
    schur(k, p, -1.0, kpp)
}

/// Hole-conditioned kernel of a kernel matrix at `p`.
pub fn hole_kernel(k: &KernelMatrix, p: LatticePoint) -> Result<KernelMatrix> {
    let kpp = k.entry(p, p)?;
    if kpp >= 1.0 - DENSITY_GUARD {
        return Err(Error::FullDensityAtP(kpp));
    }
    schur(k, p, 1.0, 1.0 - kpp)
}

/// Parameters, conditioning site and the shifted pair `(z+1, z'+1)`.
#[derive(Debug, Clone, Copy)]
pub struct PalmContext {
    pub params: AdmissibleParams,
    pub p: LatticePoint,
    pub shifted: AdmissibleParams,
    pub rho_p: f64,
}

impl PalmContext {
    pub fn new(params: AdmissibleParams, p: LatticePoint) -> Result<Self> {
        let rho_p = GammaKernel::new(params).rho1(p)?;
        if rho_p <= DENSITY_GUARD {
            return Err(Error::ZeroDensityAtP(rho_p));
        }
        if rho_p >= 1.0 - DENSITY_GUARD {
            return Err(Error::FullDensityAtP(rho_p));
        }
        Ok(Self { params, p, shifted: params.shifted(1), rho_p })
    }

    pub fn kernel(&self) -> GammaKernel {
        GammaKernel::new(self.params)
    }

    pub fn shifted_kernel(&self) -> GammaKernel {
        GammaKernel::new(self.shifted)
    }

    fn denominator(&self, x: LatticePoint) -> Result<f64> {
        if x == self.p {
            return Err(Error::EvaluatedAtP);
        }
        let t = x.x() + 0.5;
        let d: Complex = (self.params.z() + t) * (self.params.zp() + t);
        Ok(d.re)
    }
}

/// `a_p(x) = (x−p)² / ((x+z+½)(x+z'+½))`.
pub fn a_perturbation(ctx: &PalmContext, x: LatticePoint) -> Result<f64> {
    let d = ctx.denominator(x)?;
    let diff = x.x() - ctx.p.x();
    Ok(diff * diff / d)
}

/// `φ(x) = (x−p) / √((x+z+½)(x+z'+½))`, so that `φ² = a_p`.
pub fn phi_multiplier(ctx: &PalmContext, x: LatticePoint) -> Result<f64> {
    let d = ctx.denominator(x)?;
    Ok((x.x() - ctx.p.x()) / d.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiCheck {
    pub value: f64,
    pub factors: usize,
}

/// `Ψ̌(ω)` restricted to the window `w`: zero if `p ∈ ω`, otherwise
/// `Π_{x∈ω, x>0} a_p(x) · Π_{y∈w∖ω, y<0, y≠p} a_p(y)^{−1}`.
pub fn psi_check(ctx: &PalmContext, omega: &Configuration, w: &Window) -> Result<PsiCheck> {
    if omega.contains(ctx.p) {
        return Ok(PsiCheck { value: 0.0, factors: 0 });
    }
    let mut log = 0.0;
    let mut factors = 0;
    for &x in w.sites() {
        if x == ctx.p {
            continue;
        }
        let occupied = omega.contains(x);
        if occupied && x.x() > 0.0 {
            log += a_perturbation(ctx, x)?.ln();
            factors += 1;
        } else if !occupied && x.x() < 0.0 {
            log -= a_perturbation(ctx, x)?.ln();
            factors += 1;
        }
    }
    Ok(PsiCheck { value: log.exp(), factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dpp::{enumerate_measure, random_projection};

    fn rank_one() -> KernelMatrix {
        KernelMatrix::new(Window::labels(2), DMatrix::from_element(2, 2, 0.5)).unwrap()
    }

    #[test]
    fn rank_one_conditioning() {
        let k = rank_one();
        let palm = reduced_palm_kernel(&k, LatticePoint(1)).unwrap();
        assert!(palm.matrix()[(0, 0)].abs() < 1e-15);
        let hole = hole_kernel(&k, LatticePoint(1)).unwrap();
        assert!((hole.matrix()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn palm_matches_conditional_enumeration() {
        let k = random_projection(7, 3, 21);
        let p = LatticePoint(2);
        let ip = 2;
        let full = enumerate_measure(&k).unwrap();
        let palm = enumerate_measure(&reduced_palm_kernel(&k, p).unwrap()).unwrap();
        let hole = enumerate_measure(&hole_kernel(&k, p).unwrap()).unwrap();
        let rho = k.matrix()[(ip, ip)];
        for (c, prob) in &full {
            let rest = Configuration::new(c.occupied().iter().copied().filter(|&x| x != p).collect());
            let reduced = k.window().without(p).unwrap();
            let mask = rest.mask(&reduced).unwrap() as usize;
            if c.contains(p) {
                assert!((palm[mask].1 - prob / rho).abs() < 1e-12);
            } else {
                assert!((hole[mask].1 - prob / (1.0 - rho)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn entrywise_and_matrix_routes_agree() {
        let k = random_projection(6, 2, 5);
        let p = LatticePoint(3);
        let lazy = ReducedPalm::new(k.clone(), p).unwrap();
        let dense = reduced_palm_kernel(&k, p).unwrap();
        for &x in dense.window().sites() {
            for &y in dense.window().sites() {
                assert!((lazy.entry(x, y).unwrap() - dense.get(x, y).unwrap()).abs() < 1e-15);
            }
        }
        assert!(matches!(lazy.entry(p, p), Err(Error::EvaluatedAtP)));
    }

    #[test]
    fn hole_raises_density() {
        let k = random_projection(6, 3, 9);
        let p = LatticePoint(0);
        let h = hole_kernel(&k, p).unwrap();
        for &x in h.window().sites() {
            assert!(h.get(x, x).unwrap() >= k.get(x, x).unwrap() - 1e-15);
        }
    }

    #[test]
    fn density_guards() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let k = KernelMatrix::new(Window::labels(2), m).unwrap();
        assert!(matches!(reduced_palm_kernel(&k, LatticePoint(0)), Err(Error::ZeroDensityAtP(_))));
        assert!(matches!(hole_kernel(&k, LatticePoint(1)), Err(Error::FullDensityAtP(_))));
    }

    #[test]
    fn perturbation_weight() {
        let ctx = PalmContext::new(AdmissibleParams::principal(0.4, 0.7).unwrap(), LatticePoint(0)).unwrap();
        assert!(matches!(a_perturbation(&ctx, LatticePoint(0)), Err(Error::EvaluatedAtP)));
        for k in -100..100 {
            if k == 0 {
                continue;
            }
            let x = LatticePoint(k);
            let a = a_perturbation(&ctx, x).unwrap();
            let phi = phi_multiplier(&ctx, x).unwrap();
            assert!(a > 0.0);
            assert!((phi * phi - a).abs() < 1e-13 * a);
        }
        let far = phi_multiplier(&ctx, LatticePoint(100_000)).unwrap();
        assert!((far - 1.0).abs() < 1e-4);
    }

    #[test]
    fn psi_check_cases() {
        let ctx = PalmContext::new(AdmissibleParams::real(0.2, 0.6).unwrap(), LatticePoint(0)).unwrap();
        let w = Window::symmetric(5);
        let with_p = Configuration::new(vec![LatticePoint(0), LatticePoint(2)]);
        assert_eq!(psi_check(&ctx, &with_p, &w).unwrap().value, 0.0);
        let negatives = Configuration::new((-5..0).map(LatticePoint).collect());
        let r = psi_check(&ctx, &negatives, &w).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.factors, 0);
    }
}
