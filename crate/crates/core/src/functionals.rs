//! Multiplicative functionals, their normalizers, regularized determinants and
//! the transformation of projections under diagonal multipliers.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite_dpp::{expect_multiplicative, KernelMatrix, Window};
use crate::gamma_kernel::LatticePoint;

pub type SiteFunction = Arc<dyn Fn(LatticePoint) -> f64 + Send + Sync>;

/// `Ψ_a(ω) = Π_{x∈ω} a(x)`.
pub fn psi<F: Fn(LatticePoint) -> f64>(a: F, omega: &crate::finite_dpp::Configuration) -> f64 {
    omega.occupied().iter().map(|&x| a(x)).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Det2Result {
    pub value: f64,
    pub terms_used: usize,
    pub bound: f64,
}

/// `det₂(1+A) = det(1+A)·e^{−tr A}`.
pub fn det2(a: &DMatrix<f64>) -> Det2Result {
    let n = a.nrows();
    let value = (DMatrix::identity(n, n) + a).determinant() * (-a.trace()).exp();
    let bound = 8.0 * f64::EPSILON * (n as f64) * (1.0 + a.norm()) * value.abs();
    Det2Result { value, terms_used: n, bound }
}

fn checked_weights<F: Fn(LatticePoint) -> f64>(b: &F, k: &KernelMatrix) -> Result<Vec<f64>> {
    k.window()
        .sites()
        .iter()
        .map(|&x| {
            let v = b(x);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonPositiveWeight { site: x.to_string(), value: v })
            }
        })
        .collect()
}

/// `Ẽ(b) = det₂(1+(b−1)K)·exp(tr((b−1−log b)K))`.
pub fn e_tilde<F: Fn(LatticePoint) -> f64>(b: F, k: &KernelMatrix) -> Result<f64> {
    let w = checked_weights(&b, k)?;
    let m = k.matrix();
    let n = k.dim();
    let a = DMatrix::from_fn(n, n, |i, j| (w[i] - 1.0) * m[(i, j)]);
    let correction: f64 = (0..n).map(|i| (w[i] - 1.0 - w[i].ln()) * m[(i, i)]).sum();
    Ok(det2(&a).value * correction.exp())
}

/// `E[Ψ_b] / exp(tr((log b)K))`, the unregularized route to `Ẽ(b)`.
pub fn e_tilde_direct<F: Fn(LatticePoint) -> f64>(b: F, k: &KernelMatrix) -> Result<f64> {
    let w = checked_weights(&b, k)?;
    let trace: f64 = (0..k.dim()).map(|i| w[i].ln() * k.matrix()[(i, i)]).sum();
    Ok(expect_multiplicative(k, &b) * (-trace).exp())
}

#[derive(Debug, Clone)]
pub struct TransformResult {
    pub kernel: KernelMatrix,
    /// `max |K̃² − K̃|`.
    pub idempotency_residual: f64,
    /// `max |K̃₁ − K̃₂|` between the two resolvent expressions.
    pub expression_gap: f64,
    /// True when the input was not a projection to 1e-10.
    pub approximate: bool,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Projection onto `A·Ran(K)` for diagonal `A = diag(a)`:
/// `AK(1+(A*A−1)K)^{-1}A* = A(1+K(A*A−1))^{-1}KA*`.
pub fn transform_projection(k: &KernelMatrix, a: &[f64]) -> Result<TransformResult> {
    let n = k.dim();
    if a.len() != n {
        return Err(Error::Dimension(format!("{} multipliers for {n} sites", a.len())));
    }
    let m = k.matrix();
    let big_a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(a));
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { a[i] * a[i] - 1.0 } else { 0.0 });
    let eye = DMatrix::<f64>::identity(n, n);
    let left = &eye + &d * m;
    let right = &eye + m * &d;
    let condition = condition_number(&left);
    if condition > 1e12 {
        return Err(Error::SingularResolvent { condition });
    }
    let left_inv = left.try_inverse().ok_or(Error::SingularResolvent { condition: f64::INFINITY })?;
    let right_inv = right.try_inverse().ok_or(Error::SingularResolvent { condition: f64::INFINITY })?;
    let k1 = &big_a * m * left_inv * &big_a;
    let k2 = &big_a * right_inv * m * &big_a;
    let expression_gap = (&k1 - &k2).amax();
    let sym = (&k1 + k1.transpose()) * 0.5;
    let kernel = KernelMatrix::new_unchecked(k.window().clone(), sym)?;
    Ok(TransformResult {
        idempotency_residual: kernel.idempotency_residual(),
        expression_gap,
        approximate: k.idempotency_residual() > 1e-10,
        kernel,
    })
}

/// Decay certificate `|a(x) − 1| ≤ c/|x|^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub c: f64,
    pub gamma: f64,
}

/// A positive weight with its truncation schedule.
#[derive(Clone)]
pub struct FunctionalSpec {
    pub weight: SiteFunction,
    pub schedule: Vec<usize>,
    pub decay: DecayCertificate,
    /// A site removed from every window (the conditioning site for Palm kernels).
    pub excluded: Option<LatticePoint>,
}

impl FunctionalSpec {
    pub const DEFAULT_SCHEDULE: [usize; 5] = [25, 50, 100, 200, 400];

    pub fn new(weight: SiteFunction, decay: DecayCertificate) -> Self {
        Self { weight, schedule: Self::DEFAULT_SCHEDULE.to_vec(), decay, excluded: None }
    }

    pub fn window(&self, radius: usize) -> Result<Window> {
        let w = Window::symmetric(radius);
        match self.excluded {
            Some(p) => w.without(p),
            None => Ok(w),
        }
    }
}

/// The truncated normalized functional `ω ↦ Ψ_{a_n}(ω)/E[Ψ_{a_n}]` at one radius.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedFunctional {
    pub radius: usize,
    /// `det(1 + (a_n − 1)K)`.
    pub normalizer: f64,
    /// `Ẽ(a_n)`, the regularized normalizer.
    pub regularized: f64,
    /// Relative change of `regularized` from the previous radius.
    pub relative_change: Option<f64>,
}

impl TruncatedFunctional {
    pub fn eval(&self, spec: &FunctionalSpec, omega: &crate::finite_dpp::Configuration) -> f64 {
        let r = self.radius as i64;
        let inside = |x: LatticePoint| -r <= x.0 && x.0 < r && Some(x) != spec.excluded;
        psi(|x| if inside(x) { (spec.weight)(x) } else { 1.0 }, omega) / self.normalizer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<TruncatedFunctional>,
    pub tolerance: f64,
    pub status: ConvergenceStatus,
}

impl ConvergenceReport {
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            ConvergenceStatus::Converged => Ok(self),
            ConvergenceStatus::NotConverged => {
                let last = self.rows.last().and_then(|r| r.relative_change).unwrap_or(f64::NAN);
                Err(Error::NonConvergent { difference: last })
            }
        }
    }
}

/// Evaluates the normalizers along the schedule. Convergence is judged on the
/// regularized normalizer, which has a limit whenever `a − 1 ∈ ℓ²`; the raw
/// determinant is reported alongside but may drift when `a − 1 ∉ ℓ¹`.
pub fn psi_normalized<K>(spec: &FunctionalSpec, kernel: K, tol: f64) -> Result<ConvergenceReport>
where
    K: Fn(&Window) -> Result<KernelMatrix>,
{
    if spec.decay.gamma <= 0.5 {
        return Err(Error::NotAdmissible(format!(
            "decay exponent {} does not certify square summability",
            spec.decay.gamma
        )));
    }
    let mut rows: Vec<TruncatedFunctional> = Vec::new();
    for &radius in &spec.schedule {
        let w = spec.window(radius)?;
        let k = kernel(&w)?;
        let a = |x: LatticePoint| (spec.weight)(x);
        let normalizer = expect_multiplicative(&k, a);
        let regularized = e_tilde(a, &k)?;
        let relative_change = rows
            .last()
            .map(|prev| (regularized - prev.regularized).abs() / regularized.abs().max(f64::MIN_POSITIVE));
        rows.push(TruncatedFunctional { radius, normalizer, regularized, relative_change });
    }
    let changes: Vec<f64> = rows.iter().filter_map(|r| r.relative_change).collect();
    let converged = changes.len() >= 3 && changes[changes.len() - 3..].iter().all(|&c| c < tol);
    let status = if converged { ConvergenceStatus::Converged } else { ConvergenceStatus::NotConverged };
    Ok(ConvergenceReport { rows, tolerance: tol, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dpp::{enumerate_measure, random_projection, Configuration};

    #[test]
    fn psi_trivial() {
        let a = |x: LatticePoint| 1.0 + x.0 as f64;
        assert_eq!(psi(a, &Configuration::default()), 1.0);
        assert_eq!(psi(|_| 1.0, &Configuration::new(vec![LatticePoint(3)])), 1.0);
        assert_eq!(psi(a, &Configuration::new(vec![LatticePoint(3)])), 4.0);
    }

    #[test]
    fn det2_values() {
        assert_eq!(det2(&DMatrix::zeros(3, 3)).value, 1.0);
        let v = nalgebra::DVector::from_column_slice(&[0.6, 0.8, 0.0]);
        let lambda = 0.7;
        let a = &v * v.transpose() * lambda;
        let r = det2(&a);
        assert!((r.value - (1.0 + lambda) * (-lambda).exp()).abs() < 1e-15);
    }

    #[test]
    fn e_tilde_routes_agree() {
        let k = random_projection(8, 3, 2);
        let b = |x: LatticePoint| 0.5 + (x.0 as f64 * 0.37).cos().abs();
        let r1 = e_tilde(b, &k).unwrap();
        let r2 = e_tilde_direct(b, &k).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
        assert!((e_tilde(|_| 1.0, &k).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(e_tilde(|_| -1.0, &k), Err(Error::NonPositiveWeight { .. })));
    }

    #[test]
    fn e_tilde_one_site() {
        let k = KernelMatrix::new(Window::labels(1), DMatrix::from_element(1, 1, 0.3)).unwrap();
        let b = 2.5_f64;
        let want = (1.0 + (b - 1.0) * 0.3) * (-(b.ln()) * 0.3).exp();
        assert!((e_tilde(|_| b, &k).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn transform_identity_and_rank_one() {
        let k = random_projection(5, 2, 8);
        let t = transform_projection(&k, &[1.0; 5]).unwrap();
        assert!((t.kernel.matrix() - k.matrix()).amax() < 1e-14);

        let v = nalgebra::DVector::from_column_slice(&[0.6, 0.8]);
        let k = KernelMatrix::new(Window::labels(2), &v * v.transpose()).unwrap();
        let t = transform_projection(&k, &[2.0, 1.0]).unwrap();
        let w = nalgebra::DVector::from_column_slice(&[1.2, 0.8]).normalize();
        assert!((t.kernel.matrix() - &w * w.transpose()).amax() < 1e-14);
        assert!(t.expression_gap < 1e-12);
    }

    #[test]
    fn transport_identity() {
        let k = random_projection(6, 3, 4);
        let a = |x: LatticePoint| if x.0 < 3 { 1.0 + 0.5 * x.0 as f64 } else { 1.0 };
        let mult: Vec<f64> = k.window().sites().iter().map(|&x| a(x).sqrt()).collect();
        let t = transform_projection(&k, &mult).unwrap();
        let e = expect_multiplicative(&k, a);
        let lhs = enumerate_measure(&t.kernel).unwrap();
        let rhs = enumerate_measure(&k).unwrap();
        for ((c, p), (_, q)) in lhs.iter().zip(&rhs) {
            assert!((p - psi(a, c) * q / e).abs() < 1e-12);
        }
    }

    #[test]
    fn finitely_supported_weight_converges() {
        let spec = FunctionalSpec::new(
            Arc::new(|x: LatticePoint| if x.0.abs() < 5 { 1.3 } else { 1.0 }),
            DecayCertificate { c: 0.0, gamma: 1.0 },
        );
        let g = crate::gamma_kernel::GammaKernel::new(
            crate::gamma_kernel::AdmissibleParams::principal(0.4, 0.7).unwrap(),
        );
        let mut spec = spec;
        spec.schedule = vec![10, 20, 40, 80];
        let report = psi_normalized(&spec, |w| g.truncate(w), 1e-4).unwrap();
        assert_eq!(report.status, ConvergenceStatus::Converged);
        let first = report.rows[1].normalizer;
        for r in &report.rows[1..] {
            assert!((r.normalizer - first).abs() < 1e-9 * first);
        }
    }
}
