use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

use super::{Configuration, KernelMatrix, Window};

const PIVOT_RESTART: f64 = 1e-12;

/// Spectral sampler for a fixed kernel matrix.
///
/// Draw `i` under seed `s` uses ChaCha8 seeded with `s` on stream `i`, so a
/// batch is reproducible regardless of how it is split across threads.
#[derive(Debug, Clone)]
pub struct Sampler {
    window: Window,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Sampler {
    pub fn new(k: &KernelMatrix) -> Result<Self> {
        k.check_spectrum()?;
        let eig = k.matrix().clone().symmetric_eigen();
        let eigenvalues = eig.eigenvalues.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { window: k.window().clone(), eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn sample(&self, seed: u64, index: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let chosen: Vec<usize> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &lambda)| rng.random::<f64>() < lambda)
            .map(|(j, _)| j)
            .collect();
        let n = self.window.len();
        let mut v = DMatrix::from_fn(n, chosen.len(), |i, j| self.eigenvectors[(i, chosen[j])]);
        let mut occupied = Vec::with_capacity(chosen.len());
        while v.ncols() > 0 {
            let i = pick_row(&v, &mut rng);
            occupied.push(self.window.sites()[i]);
            v = condition_on_row(v, i);
        }
        Configuration::new(occupied)
    }

    /// Draws `count` configurations with indices `0..count`.
    pub fn sample_many(&self, seed: u64, count: usize) -> Vec<Configuration> {
        (0..count as u64).into_par_iter().map(|i| self.sample(seed, i)).collect()
    }
}

fn pick_row(v: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> usize {
    let weights: Vec<f64> = v.row_iter().map(|r| r.norm_squared()).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last
}

/// Orthonormal basis of `{f ∈ span(V) : f(i) = 0}` via a Householder reflection.
fn condition_on_row(v: DMatrix<f64>, i: usize) -> DMatrix<f64> {
    let k = v.ncols();
    let row: DVector<f64> = v.row(i).transpose();
    let norm = row.norm();
    let mut u = row.clone();
    u[0] += norm.copysign(row[0]);
    let uu = u.norm_squared();
    let w = if uu > 0.0 { &v - (&v * &u) * (2.0 / uu) * u.transpose() } else { v };
    let mut rest = w.columns(1, k - 1).into_owned();
    for c in 0..rest.ncols() {
        rest[(i, c)] = 0.0;
    }
    if norm * norm < PIVOT_RESTART || !is_orthonormal(&rest) {
        rest = gram_schmidt(rest);
    }
    rest
}

fn is_orthonormal(v: &DMatrix<f64>) -> bool {
    if v.ncols() == 0 {
        return true;
    }
    let g = v.transpose() * v;
    (g - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-10
}

fn gram_schmidt(v: DMatrix<f64>) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for c in 0..v.ncols() {
        let mut col = v.column(c).into_owned();
        for _ in 0..2 {
            for q in &kept {
                let d = q.dot(&col);
                col -= q * d;
            }
        }
        let n = col.norm();
        if n > 1e-8 {
            kept.push(col / n);
        }
    }
    if kept.is_empty() {
        return DMatrix::zeros(v.nrows(), 0);
    }
    DMatrix::from_columns(&kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dpp::{enumerate_probabilities, random_projection};

    #[test]
    fn fixed_cardinality() {
        for (n, r) in [(6, 2), (10, 5), (12, 12)] {
            let k = random_projection(n, r, 42);
            let s = Sampler::new(&k).unwrap();
            for c in s.sample_many(9, 200) {
                assert_eq!(c.len(), r);
            }
        }
    }

    #[test]
    fn deterministic_per_index() {
        let k = random_projection(9, 4, 1);
        let s = Sampler::new(&k).unwrap();
        let batch = s.sample_many(77, 50);
        for (i, c) in batch.iter().enumerate() {
            assert_eq!(*c, s.sample(77, i as u64));
        }
    }

    #[test]
    fn one_point_frequencies() {
        let k = random_projection(5, 2, 3);
        let sampler = Sampler::new(&k).unwrap();
        let draws = sampler.sample_many(5, 20_000);
        let probs = enumerate_probabilities(&k).unwrap();
        let mut counts = vec![0.0; 32];
        for c in &draws {
            counts[c.mask(k.window()).unwrap() as usize] += 1.0;
        }
        for (m, &p) in probs.iter().enumerate() {
            let f = counts[m] / draws.len() as f64;
            let sigma = (p * (1.0 - p) / draws.len() as f64).sqrt().max(1e-4);
            assert!((f - p).abs() < 5.0 * sigma, "mask {m}: {f} vs {p}");
        }
    }
}
