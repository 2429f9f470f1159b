use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::Result;
use crate::finite_dpp::{enumerate_probabilities, expect_multiplicative, random_projection, KernelMatrix, Window};
use crate::functionals::{det2, e_tilde, e_tilde_direct, transform_projection};
use crate::gamma_kernel::LatticePoint;
use crate::palm::{hole_kernel, reduced_palm_kernel};

use super::CheckResult;

pub(super) const IDENTITIES: &[&str] = &[
    "transport",
    "multiplicative_expectation",
    "normalized_functional",
    "determinant_ratio",
    "det2",
    "palm_enumeration",
    "palm_permutation",
    "rank_additivity",
];

struct Trial {
    k: KernelMatrix,
    rank: usize,
    alpha: Vec<f64>,
    b: Vec<f64>,
    p: LatticePoint,
    rng: ChaCha8Rng,
}

fn trial(seed: u64, t: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    let n = rng.random_range(3..=9usize);
    let rank = rng.random_range(1..n);
    let k = random_projection(n, rank, rng.random());
    let alpha = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let b = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
    let p = LatticePoint(rng.random_range(0..n as i64));
    Trial { k, rank, alpha, b, p, rng }
}

fn weight(v: &[f64]) -> impl Fn(LatticePoint) -> f64 + '_ {
    move |x: LatticePoint| v[x.0 as usize]
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1e-300)).count()
}

fn psi_mask(mask: usize, w: &[f64]) -> f64 {
    (0..w.len()).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).product()
}

fn residual(identity: &str, t: &mut Trial) -> Result<f64> {
    let n = t.k.dim();
    let m = t.k.matrix().clone();
    match identity {
        "transport" => {
            let tr = transform_projection(&t.k, &t.alpha)?;
            let ak = DMatrix::from_fn(n, n, |i, j| t.alpha[i] * m[(i, j)]);
            let fixes = (tr.kernel.matrix() * &ak - &ak).amax();
            let rank_gap = (numeric_rank(tr.kernel.matrix()) as f64 - t.rank as f64).abs();
            Ok(tr.idempotency_residual.max(tr.expression_gap).max(fixes).max(rank_gap))
        }
        "multiplicative_expectation" => {
            let probs = enumerate_probabilities(&t.k)?;
            let direct: f64 = probs.iter().enumerate().map(|(mask, q)| q * psi_mask(mask, &t.b)).sum();
            Ok((direct - expect_multiplicative(&t.k, weight(&t.b))).abs())
        }
        "normalized_functional" => {
            let a: Vec<f64> = t.alpha.iter().map(|v| v * v).collect();
            let tilde = enumerate_probabilities(&transform_projection(&t.k, &t.alpha)?.kernel)?;
            let base = enumerate_probabilities(&t.k)?;
            let norm = expect_multiplicative(&t.k, weight(&a));
            Ok(tilde
                .iter()
                .zip(&base)
                .enumerate()
                .map(|(mask, (q, r))| (q - psi_mask(mask, &a) * r / norm).abs())
                .fold(0.0, f64::max))
        }
        "determinant_ratio" => {
            let a: Vec<f64> = t.alpha.iter().map(|v| v * v).collect();
            let ba: Vec<f64> = a.iter().zip(&t.b).map(|(x, y)| x * y).collect();
            let tr = transform_projection(&t.k, &t.alpha)?;
            let lhs = expect_multiplicative(&tr.kernel, weight(&t.b));
            let rhs = expect_multiplicative(&t.k, weight(&ba)) / expect_multiplicative(&t.k, weight(&a));
            Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
        }
        "det2" => {
            let a = DMatrix::from_fn(n, n, |i, j| (t.b[i] - 1.0) * m[(i, j)]);
            let d = det2(&a).value;
            let via_eigen: f64 = a
                .complex_eigenvalues()
                .iter()
                .map(|&l| (l + 1.0) * (-l).exp())
                .product::<nalgebra::Complex<f64>>()
                .re;
            let regularized = e_tilde(weight(&t.b), &t.k)?;
            let direct = e_tilde_direct(weight(&t.b), &t.k)?;
            Ok(((d - via_eigen).abs() / via_eigen.abs().max(1.0)).max((regularized - direct).abs() / direct.abs().max(1.0)))
        }
        "palm_enumeration" => {
            let full = enumerate_probabilities(&t.k)?;
            let ip = t.p.0 as usize;
            let rho = m[(ip, ip)];
            let palm = enumerate_probabilities(&reduced_palm_kernel(&t.k, t.p)?)?;
            let hole = enumerate_probabilities(&hole_kernel(&t.k, t.p)?)?;
            let mut worst: f64 = 0.0;
            for (mask, (q, h)) in palm.iter().zip(&hole).enumerate() {
                let low = mask & ((1 << ip) - 1);
                let high = (mask >> ip) << (ip + 1);
                let without = low | high;
                let with = without | (1 << ip);
                worst = worst.max((q - full[with] / rho).abs()).max((h - full[without] / (1.0 - rho)).abs());
            }
            Ok(worst)
        }
        "palm_permutation" => {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, t.rng.random_range(0..=i));
            }
            let permuted = KernelMatrix::new_unchecked(Window::labels(n), DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]))?;
            let inv = perm.iter().position(|&v| v == t.p.0 as usize).unwrap();
            let a = reduced_palm_kernel(&t.k, t.p)?;
            let b = reduced_palm_kernel(&permuted, LatticePoint(inv as i64))?;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if perm[i] == t.p.0 as usize || perm[j] == t.p.0 as usize {
                        continue;
                    }
                    let x = LatticePoint(i as i64);
                    let y = LatticePoint(j as i64);
                    let px = LatticePoint(perm[i] as i64);
                    let py = LatticePoint(perm[j] as i64);
                    worst = worst.max((b.get(x, y).unwrap() - a.get(px, py).unwrap()).abs());
                }
            }
            // Diagonal kernel: holes at p leave the other marginals untouched.
            let diag = DMatrix::from_fn(n, n, |i, j| if i == j { m[(i, i)] } else { 0.0 });
            let dk = KernelMatrix::new(Window::labels(n), diag)?;
            let dh = hole_kernel(&dk, t.p)?;
            for &x in dh.window().sites() {
                worst = worst.max((dh.get(x, x).unwrap() - dk.get(x, x).unwrap()).abs());
            }
            Ok(worst)
        }
        "rank_additivity" => {
            let r = t.rank;
            let g = DMatrix::from_fn(n, r, |_, _| t.rng.random::<f64>() - 0.5);
            let q = g.qr().q();
            let s = DMatrix::from_fn(r, r, |i, j| f64::from(i == j) + 0.5 * (t.rng.random::<f64>() - 0.5));
            let s_inv_t = s.clone().try_inverse().expect("diagonally dominant").transpose();
            let basis = &q * &s;
            let dual = &q * s_inv_t;
            let split = t.rng.random_range(0..=r);
            let proj = |lo: usize, hi: usize| {
                let mut acc = DMatrix::zeros(n, n);
                for i in lo..hi {
                    acc += basis.column(i) * dual.column(i).transpose();
                }
                acc
            };
            let (p1, p2) = (proj(0, split), proj(split, r));
            let p = &q * q.transpose();
            let idem = (&p1 * &p1 - &p1).amax().max((&p2 * &p2 - &p2).amax()).max((&p1 + &p2 - &p).amax());
            let joint = DMatrix::from_fn(n, 2 * n, |i, j| if j < n { p1[(i, j)] } else { p2[(i, j - n)] });
            let ranks = [numeric_rank(&p), numeric_rank(&p1) + numeric_rank(&p2), numeric_rank(&joint)];
            let rank_gap = ranks.iter().map(|&x| (x as f64 - r as f64).abs()).sum::<f64>();
            Ok(idem.max(rank_gap))
        }
        other => unreachable!("unknown identity {other}"),
    }
}

/// Enumeration-versus-formula identities on seeded random finite projections.
pub fn check_synthetic_suite(seed: u64, trials: u64) -> Vec<CheckResult> {
    IDENTITIES
        .iter()
        .map(|&identity| {
            let params = json!({ "identity": identity, "seed": seed, "trials": trials });
            CheckResult::run("check_synthetic_suite", params, 1e-9, || {
                let mut worst: f64 = 0.0;
                for t in 0..trials {
                    let mut tr = trial(seed, t);
                    worst = worst.max(residual(identity, &mut tr)?);
                }
                Ok((worst, Value::Null))
            })
        })
        .collect()
}
