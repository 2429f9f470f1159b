//! Determinantal measures on finite windows: truncation, correlation minors,
//! cylinder probabilities, exhaustive enumeration and sampling.

mod sampler;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_kernel::{GammaKernel, LatticePoint};

pub use sampler::Sampler;

pub const SPECTRUM_TOL: f64 = 1e-10;
pub const ENUMERATION_LIMIT: usize = 20;

/// A finite, strictly increasing set of sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    sites: Vec<LatticePoint>,
}

impl Window {
    pub fn new(mut sites: Vec<LatticePoint>) -> Result<Self> {
        sites.sort_unstable();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoint(w[0].to_string()));
        }
        if sites.is_empty() {
            return Err(Error::Dimension("empty window".into()));
        }
        Ok(Self { sites })
    }

    /// `X_n = {−n+½, …, n−½}`.
    pub fn symmetric(radius: usize) -> Self {
        let r = radius.max(1) as i64;
        Self { sites: (-r..r).map(LatticePoint).collect() }
    }

    /// Abstract ground set `{0, …, n−1}` for synthetic kernels.
    pub fn labels(n: usize) -> Self {
        Self { sites: (0..n.max(1) as i64).map(LatticePoint).collect() }
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn index_of(&self, x: LatticePoint) -> Option<usize> {
        self.sites.binary_search(&x).ok()
    }

    pub fn contains(&self, x: LatticePoint) -> bool {
        self.index_of(x).is_some()
    }

    pub fn without(&self, p: LatticePoint) -> Result<Self> {
        Self::new(self.sites.iter().copied().filter(|&x| x != p).collect())
    }

    fn indices(&self, pts: &[LatticePoint]) -> Result<Vec<usize>> {
        let mut seen = std::collections::HashSet::new();
        pts.iter()
            .map(|&x| {
                if !seen.insert(x) {
                    return Err(Error::DuplicatePoint(x.to_string()));
                }
                self.index_of(x).ok_or_else(|| Error::SubsetViolation(format!("site {x} outside window")))
            })
            .collect()
    }
}

/// A finite particle configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Configuration {
    occupied: Vec<LatticePoint>,
}

impl Configuration {
    pub fn new(mut occupied: Vec<LatticePoint>) -> Self {
        occupied.sort_unstable();
        occupied.dedup();
        Self { occupied }
    }

    pub fn from_mask(window: &Window, mask: u64) -> Self {
        let occupied = window
            .sites()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &x)| x)
            .collect();
        Self { occupied }
    }

    pub fn mask(&self, window: &Window) -> Result<u64> {
        if window.len() > 64 {
            return Err(Error::WindowTooLarge { size: window.len(), limit: 64 });
        }
        let mut mask = 0;
        for &x in &self.occupied {
            let i = window
                .index_of(x)
                .ok_or_else(|| Error::SubsetViolation(format!("site {x} outside window")))?;
            mask |= 1 << i;
        }
        Ok(mask)
    }

    pub fn occupied(&self) -> &[LatticePoint] {
        &self.occupied
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn contains(&self, x: LatticePoint) -> bool {
        self.occupied.binary_search(&x).is_ok()
    }

    /// The configuration intersected with `sites`.
    pub fn restrict(&self, sites: &[LatticePoint]) -> Self {
        Self::new(self.occupied.iter().copied().filter(|x| sites.contains(x)).collect())
    }
}

/// A truncated correlation kernel: a labeled real symmetric contraction.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    window: Window,
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    /// Validates symmetry (to 1e-12, then exact symmetrization) and the spectrum.
    pub fn new(window: Window, entries: DMatrix<f64>) -> Result<Self> {
        let k = Self::new_unchecked(window, entries)?;
        k.check_spectrum()?;
        Ok(k)
    }

    /// Skips the spectral check; symmetry is still enforced.
    pub fn new_unchecked(window: Window, mut entries: DMatrix<f64>) -> Result<Self> {
        let n = window.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for {n} sites",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Dimension(format!("asymmetric entry ({i},{j})")));
                }
                let m = 0.5 * (a + b);
                entries[(i, j)] = m;
                entries[(j, i)] = m;
            }
        }
        Ok(Self { window, entries })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn check_spectrum(&self) -> Result<()> {
        for ev in self.eigenvalues() {
            if !(-SPECTRUM_TOL..=1.0 + SPECTRUM_TOL).contains(&ev) || !ev.is_finite() {
                return Err(Error::SpectrumOutOfRange { eigenvalue: ev });
            }
        }
        Ok(())
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.window.len()
    }

    pub fn get(&self, x: LatticePoint, y: LatticePoint) -> Option<f64> {
        Some(self.entries[(self.window.index_of(x)?, self.window.index_of(y)?)])
    }

    /// Principal submatrix on `sites`.
    pub fn restrict(&self, sites: &Window) -> Result<Self> {
        let idx = self.window.indices(sites.sites())?;
        let entries = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]);
        Ok(Self { window: sites.clone(), entries })
    }

    /// `max |K² − K|`.
    pub fn idempotency_residual(&self) -> f64 {
        (&self.entries * &self.entries - &self.entries).amax()
    }
}

/// Principal submatrix of a symmetric entry function on `w`.
pub fn truncate<F>(kernel: F, w: &Window) -> Result<KernelMatrix>
where
    F: Fn(LatticePoint, LatticePoint) -> Result<f64> + Sync,
{
    let n = w.len();
    let sites = w.sites();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel(sites[i], sites[j])).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            m[(i, i + off)] = v;
            m[(i + off, i)] = v;
        }
    }
    KernelMatrix::new(w.clone(), m)
}

impl GammaKernel {
    /// The kernel truncated to `w`, using per-site precomputation.
    pub fn truncate(&self, w: &Window) -> Result<KernelMatrix> {
        let data = w
            .sites()
            .par_iter()
            .map(|&x| self.site_data(x))
            .collect::<Result<Vec<_>>>()?;
        truncate(
            |x, y| {
                let (i, j) = (w.index_of(x).unwrap(), w.index_of(y).unwrap());
                self.entry_from(&data[i], &data[j])
            },
            w,
        )
    }
}

fn minor(k: &KernelMatrix, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| k.entries[(idx[i], idx[j])])
}

/// `ρ_n(x_1..x_n) = det[K(x_i, x_j)]`, clamped at zero.
pub fn correlation(k: &KernelMatrix, pts: &[LatticePoint]) -> Result<f64> {
    let idx = k.window.indices(pts)?;
    if idx.is_empty() {
        return Ok(1.0);
    }
    Ok(minor(k, &idx).determinant().max(0.0))
}

/// `P(ω ∩ T = S) = (−1)^{|T∖S|} det(K_T − I_{T∖S})`.
pub fn cylinder_prob(k: &KernelMatrix, t: &[LatticePoint], s: &Configuration) -> Result<f64> {
    if let Some(x) = s.occupied().iter().find(|x| !t.contains(x)) {
        return Err(Error::SubsetViolation(format!("site {x} of S not in T")));
    }
    let idx = k.window.indices(t)?;
    if idx.is_empty() {
        return Ok(1.0);
    }
    let mut m = minor(k, &idx);
    let mut holes = 0;
    for (i, &x) in t.iter().enumerate() {
        if !s.contains(x) {
            m[(i, i)] -= 1.0;
            holes += 1;
        }
    }
    let sign = if holes % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * m.determinant())
}

/// `E[Ψ_a] = det(1 + (a−1)K)` over the window.
pub fn expect_multiplicative<F: Fn(LatticePoint) -> f64>(k: &KernelMatrix, a: F) -> f64 {
    let n = k.dim();
    let weights: Vec<f64> = k.window.sites().iter().map(|&x| a(x) - 1.0).collect();
    let m = DMatrix::from_fn(n, n, |i, j| f64::from(i == j) + weights[i] * k.entries[(i, j)]);
    m.determinant()
}

/// One configuration of an enumerated measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub mask: u64,
    pub probability: f64,
}

/// Probabilities of all `2^n` configurations, indexed by bitmask over window positions.
pub fn enumerate_probabilities(k: &KernelMatrix) -> Result<Vec<f64>> {
    let n = k.dim();
    if n > ENUMERATION_LIMIT {
        return Err(Error::WindowTooLarge { size: n, limit: ENUMERATION_LIMIT });
    }
    Ok((0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let mut m = k.entries.clone();
            let mut holes = 0;
            for i in 0..n {
                if mask >> i & 1 == 0 {
                    m[(i, i)] -= 1.0;
                    holes += 1;
                }
            }
            let sign = if holes % 2 == 0 { 1.0 } else { -1.0 };
            sign * m.determinant()
        })
        .collect())
}

/// The full determinantal measure on the window.
pub fn enumerate_measure(k: &KernelMatrix) -> Result<Vec<(Configuration, f64)>> {
    Ok(enumerate_probabilities(k)?
        .into_iter()
        .enumerate()
        .map(|(mask, p)| (Configuration::from_mask(&k.window, mask as u64), p))
        .collect())
}

/// Orthogonal projection of rank `r` onto a random subspace of `R^n`.
pub fn random_projection(n: usize, r: usize, seed: u64) -> KernelMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, r.min(n), |_, _| rng.random::<f64>() - 0.5);
    let q = a.qr().q();
    let p = &q * q.transpose();
    KernelMatrix::new_unchecked(Window::labels(n), p).expect("square by construction")
}

/// One draw from the determinantal measure of `k`.
pub fn sample(k: &KernelMatrix, seed: u64) -> Result<Configuration> {
    Ok(Sampler::new(k)?.sample(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma_kernel::AdmissibleParams;

    fn rank_one() -> KernelMatrix {
        KernelMatrix::new(Window::labels(2), DMatrix::from_element(2, 2, 0.5)).unwrap()
    }

    #[test]
    fn rank_one_basics() {
        let k = rank_one();
        let m = enumerate_measure(&k).unwrap();
        let probs: Vec<f64> = m.iter().map(|(_, p)| *p).collect();
        assert!(probs[0].abs() < 1e-15 && probs[3].abs() < 1e-15);
        assert!((probs[1] - 0.5).abs() < 1e-15 && (probs[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_site_window() {
        let p = AdmissibleParams::principal(0.4, 0.7).unwrap();
        let g = GammaKernel::new(p);
        let w = Window::new(vec![LatticePoint(3)]).unwrap();
        let k = g.truncate(&w).unwrap();
        assert_eq!(k.matrix()[(0, 0)], g.rho1(LatticePoint(3)).unwrap());
    }

    #[test]
    fn gamma_truncation_is_contraction() {
        let g = GammaKernel::new(AdmissibleParams::principal(0.4, 0.7).unwrap());
        let k = g.truncate(&Window::symmetric(20)).unwrap();
        let ev = k.eigenvalues();
        assert!(*ev.last().unwrap() <= 1.0 + 1e-10 && ev[0] >= -1e-10);
    }

    #[test]
    fn spectrum_violation_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.3]);
        assert!(matches!(KernelMatrix::new(Window::labels(2), m), Err(Error::SpectrumOutOfRange { .. })));
    }

    #[test]
    fn correlation_minors() {
        let k = random_projection(6, 3, 7);
        let s = k.window().sites().to_vec();
        assert_eq!(correlation(&k, &s[..1]).unwrap(), k.matrix()[(0, 0)]);
        let m = k.matrix();
        let two = m[(1, 1)] * m[(4, 4)] - m[(1, 4)] * m[(4, 1)];
        assert!((correlation(&k, &[s[1], s[4]]).unwrap() - two).abs() < 1e-15);
        assert!(two <= m[(1, 1)] * m[(4, 4)] + 1e-12);
        assert!(matches!(correlation(&k, &[s[1], s[1]]), Err(Error::DuplicatePoint(_))));
    }

    #[test]
    fn cylinder_probabilities() {
        let k = random_projection(8, 4, 11);
        let s = k.window().sites().to_vec();
        let x = s[2];
        let one = cylinder_prob(&k, &[x], &Configuration::new(vec![x])).unwrap();
        let none = cylinder_prob(&k, &[x], &Configuration::default()).unwrap();
        assert!((one - k.matrix()[(2, 2)]).abs() < 1e-15);
        assert!((none - 1.0 + k.matrix()[(2, 2)]).abs() < 1e-15);

        let t = vec![s[0], s[3], s[5], s[6]];
        let tw = Window::new(t.clone()).unwrap();
        let mut total = 0.0;
        for mask in 0..16u64 {
            let sub = Configuration::from_mask(&tw, mask);
            let p = cylinder_prob(&k, &t, &sub).unwrap();
            // Inclusion–exclusion over correlations.
            let mut ie = 0.0;
            for upper in 0..16u64 {
                if upper & mask != mask {
                    continue;
                }
                let u = Configuration::from_mask(&tw, upper);
                let sign = if (upper ^ mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                ie += sign * correlation(&k, u.occupied()).unwrap();
            }
            assert!((p - ie).abs() < 1e-12);
            assert!((-1e-10..=1.0 + 1e-10).contains(&p));
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-12);
        let bad = Configuration::new(vec![s[1]]);
        assert!(matches!(cylinder_prob(&k, &t, &bad), Err(Error::SubsetViolation(_))));
    }

    #[test]
    fn multiplicative_expectation_matches_enumeration() {
        let k = random_projection(7, 3, 5);
        let a = |x: LatticePoint| 1.0 + 0.3 * ((x.0 as f64) * 1.7).sin();
        let direct = expect_multiplicative(&k, a);
        let enumerated: f64 = enumerate_measure(&k)
            .unwrap()
            .iter()
            .map(|(c, p)| p * c.occupied().iter().map(|&x| a(x)).product::<f64>())
            .sum();
        assert!((direct - enumerated).abs() < 1e-12);
        assert!((expect_multiplicative(&k, |_| 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn enumeration_sums_to_one() {
        let k = random_projection(10, 4, 3);
        let probs = enumerate_probabilities(&k).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(probs.iter().all(|&p| p > -1e-12));
        assert!(enumerate_probabilities(&random_projection(21, 2, 1)).is_err());
    }

    #[test]
    fn mask_roundtrip() {
        let w = Window::symmetric(3);
        let c = Configuration::new(vec![LatticePoint(-3), LatticePoint(1)]);
        let m = c.mask(&w).unwrap();
        assert_eq!(m, 0b1_0001);
        assert_eq!(Configuration::from_mask(&w, m), c);
    }
}
