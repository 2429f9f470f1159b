use serde::{Deserialize, Serialize};

use crate::specfun::Complex;

use super::params::{AdmissibleParams, LatticePoint};

/// A partition as a weakly decreasing list of positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Returns `None` unless `parts` is weakly decreasing; trailing zeros are dropped.
    pub fn new(mut parts: Vec<u32>) -> Option<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        parts.windows(2).all(|w| w[0] >= w[1]).then_some(Self { parts })
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Whether `x = λ_i − i + ½` for some `i ≥ 1` (rows beyond the length count as zero).
    pub fn occupies(&self, x: LatticePoint) -> bool {
        // x = k + ½ with k = λ_i − i
        let k = x.0;
        let len = self.parts.len() as i64;
        if k < -len {
            return true;
        }
        (1..=len).any(|i| self.parts[(i - 1) as usize] as i64 - i == k)
    }

    pub fn conjugate(&self) -> Self {
        let width = self.parts.first().copied().unwrap_or(0);
        let parts = (0..width)
            .map(|j| self.parts.iter().filter(|&&p| p > j).count() as u32)
            .collect();
        Self { parts }
    }

    /// `(content, hook length)` for every box.
    pub fn boxes(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        let conj = self.conjugate();
        self.parts.iter().enumerate().flat_map(move |(i, &row)| {
            let conj = conj.parts.clone();
            (0..row).map(move |j| {
                let arm = row - j - 1;
                let leg = conj[j as usize] - i as u32 - 1;
                (j as i64 - i as i64, arm + leg + 1)
            })
        })
    }

    /// Number of standard tableaux, by the hook-length formula, in log form.
    pub fn log_dim(&self) -> f64 {
        let n = self.size();
        let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        log_fact - self.boxes().map(|(_, h)| (h as f64).ln()).sum::<f64>()
    }
}

/// Partitions of `n` in lexicographically decreasing order, starting from `(n)`.
pub fn partitions_of(n: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(remaining: u32, max: u32, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition { parts: current.clone() });
            return;
        }
        for part in (1..=remaining.min(max)).rev() {
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    rec(n, n, &mut current, &mut out);
    out
}

/// `log M_ξ(λ) = zz' log(1−ξ) + |λ| log ξ + Σ_boxes log((z+c)(z'+c)/h²)`.
pub fn zmeasure_log_weight(p: &AdmissibleParams, xi: f64, lambda: &Partition) -> f64 {
    let zz = (p.z() * p.zp()).re;
    let mut acc = zz * (1.0 - xi).ln() + lambda.size() as f64 * xi.ln();
    for (content, hook) in lambda.boxes() {
        let c = content as f64;
        let factor: Complex = (p.z() + c) * (p.zp() + c);
        acc += factor.re.ln() - 2.0 * (hook as f64).ln();
    }
    acc
}

/// z-measure weight `M^{(z,z')}_ξ(λ)`.
pub fn zmeasure_weight(p: &AdmissibleParams, xi: f64, lambda: &Partition) -> f64 {
    zmeasure_log_weight(p, xi, lambda).exp()
}

/// Cumulative mass of all partitions with `|λ| ≤ n`, for `n = 0..=n_max`.
pub fn zmeasure_partial_mass(p: &AdmissibleParams, xi: f64, n_max: u32) -> Vec<f64> {
    let mut total = 0.0;
    (0..=n_max)
        .map(|n| {
            total += partitions_of(n).iter().map(|l| zmeasure_weight(p, xi, l)).sum::<f64>();
            total
        })
        .collect()
}

/// One-point density of the point configuration `{λ_i − i + ½}` under the
/// z-measure, summed over `|λ| ≤ n_max`.
pub fn zmeasure_density(p: &AdmissibleParams, xi: f64, n_max: u32, sites: &[LatticePoint]) -> Vec<f64> {
    let mut density = vec![0.0; sites.len()];
    for n in 0..=n_max {
        for lambda in partitions_of(n) {
            let w = zmeasure_weight(p, xi, &lambda);
            for (d, s) in density.iter_mut().zip(sites) {
                if lambda.occupies(*s) {
                    *d += w;
                }
            }
        }
    }
    density
}
