use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::specfun::{digamma, gamma_sign, ln_gamma_real, log_gamma_reduced, sin_pi, Complex};

use super::params::{AdmissibleParams, LatticePoint};
use super::series::{balanced_sum, SeriesSum};

const RESIDUE_TOL: f64 = 1e-10;

/// `log A(x)` split into modulus and phase: `A = exp(log_modulus + i·phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauge {
    pub log_modulus: f64,
    pub phase: f64,
}

impl Gauge {
    pub fn log(&self) -> Complex {
        Complex::new(self.log_modulus, self.phase)
    }

    pub fn value(&self) -> Complex {
        self.log().exp()
    }
}

pub(crate) fn real_part(v: Complex) -> Result<f64> {
    if v.im.abs() > RESIDUE_TOL * v.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue { residue: v.im });
    }
    Ok(v.re)
}

/// Gauge weight `A(x) = Γ(x+z+½)/√(Γ(x+z+½)Γ(x+z'+½))` in log form.
pub fn gauge(p: &AdmissibleParams, x: LatticePoint) -> Result<Gauge> {
    let u = p.z() + x.x() + 0.5;
    let up = p.zp() + x.x() + 0.5;
    if p.is_real() {
        let g = ln_gamma_real(u.re)?;
        let gp = ln_gamma_real(up.re)?;
        let phase = if g.sign > 0.0 { 0.0 } else { PI };
        return Ok(Gauge { log_modulus: 0.5 * (g.log_abs - gp.log_abs), phase });
    }
    let l = log_gamma_reduced(u)?;
    let lp = log_gamma_reduced(up)?;
    Ok(Gauge { log_modulus: 0.5 * (l.re - lp.re), phase: l.im })
}

/// `A^{(z,z')}(x)`.
pub fn a_weight(p: &AdmissibleParams, x: LatticePoint) -> Result<Complex> {
    let g = gauge(p, x)?;
    if p.is_real() {
        let sign = if g.phase == 0.0 { 1.0 } else { -1.0 };
        return Ok(Complex::new(sign * g.log_modulus.exp(), 0.0));
    }
    Ok(g.value())
}

/// `t / sin t` with its removable singularity filled in.
fn t_over_sin(t: Complex) -> Complex {
    if t.norm() < 1e-4 {
        let t2 = t * t;
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        t / t.sin()
    }
}

/// `C(z,z') = sin(πz) sin(πz') / π² · S(π(z−z'))`, `S(t) = t/sin t`.
pub fn c_constant(p: &AdmissibleParams) -> f64 {
    let v = sin_pi(p.z()) * sin_pi(p.zp()) / (PI * PI) * t_over_sin(PI * (p.z() - p.zp()));
    v.re
}

/// Prefactor `sin πz sin πz' / (π sin π(z−z'))` of the off-diagonal formula.
fn prefactor(p: &AdmissibleParams) -> Complex {
    sin_pi(p.z()) * sin_pi(p.zp()) / (PI * sin_pi(p.z() - p.zp()))
}

/// `ψ'(t)` for real `t`: reflection below ½, upward recurrence, then the
/// asymptotic series in Bernoulli numbers.
pub fn trigamma_real(t: f64) -> Result<f64> {
    if t <= 0.0 && (t - t.round()).abs() < 1e-14 {
        return Err(Error::PoleArgument { re: t, im: 0.0 });
    }
    if t < 0.5 {
        let s = sin_pi(Complex::new(t, 0.0)).re;
        return Ok(PI * PI / (s * s) - trigamma_real(1.0 - t)?);
    }
    let mut x = t;
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const BERNOULLI: [f64; 7] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut power = inv * inv2;
    let mut series = inv + 0.5 * inv2;
    for b in BERNOULLI {
        series += b * power;
        power *= inv2;
    }
    Ok(acc + series)
}

/// Per-site quantities for the integrable form
/// `K(x,y) = κ·(P(x)Q(y) − Q(x)P(y))/(x−y)` plus the diagonal value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteData {
    pub site: LatticePoint,
    pub p: Complex,
    pub q: Complex,
    pub diagonal: f64,
}

/// Gamma kernel with the branch selection resolved once.
#[derive(Debug, Clone, Copy)]
pub struct GammaKernel {
    params: AdmissibleParams,
    degenerate: Option<f64>,
    scale: Complex,
    c: f64,
}

impl GammaKernel {
    pub fn new(params: AdmissibleParams) -> Self {
        let degenerate = params.degenerate_value();
        let c = c_constant(&params);
        let scale = if degenerate.is_some() { Complex::new(c, 0.0) } else { prefactor(&params) };
        Self { params, degenerate, scale, c }
    }

    pub fn params(&self) -> &AdmissibleParams {
        &self.params
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Coefficient `κ` of the integrable form.
    pub fn scale(&self) -> Complex {
        self.scale
    }

    /// `(P(x), Q(x))` of the integrable form.
    pub fn integrable_parts(&self, x: LatticePoint) -> Result<(Complex, Complex)> {
        if let Some(a) = self.degenerate {
            let t = x.x() + a + 0.5;
            let s = gamma_sign(t)?;
            let psi = digamma(Complex::new(t, 0.0))?.re;
            return Ok((Complex::new(s * psi, 0.0), Complex::new(s, 0.0)));
        }
        let a = a_weight(&self.params, x)?;
        Ok((a, a.inv()))
    }

    pub fn site_data(&self, x: LatticePoint) -> Result<SiteData> {
        if let Some(a) = self.degenerate {
            let t = x.x() + a + 0.5;
            let s = gamma_sign(t)?;
            let psi = digamma(Complex::new(t, 0.0))?.re;
            let diagonal = self.c * trigamma_real(t)?;
            return Ok(SiteData {
                site: x,
                p: Complex::new(s * psi, 0.0),
                q: Complex::new(s, 0.0),
                diagonal,
            });
        }
        let a = a_weight(&self.params, x)?;
        let u = self.params.z() + x.x() + 0.5;
        let up = self.params.zp() + x.x() + 0.5;
        let diagonal = real_part(self.scale * (digamma(u)? - digamma(up)?))?;
        Ok(SiteData { site: x, p: a, q: a.inv(), diagonal })
    }

    /// Entry from precomputed site data.
    pub fn entry_from(&self, sx: &SiteData, sy: &SiteData) -> Result<f64> {
        if sx.site == sy.site {
            return Ok(sx.diagonal);
        }
        let dx = sx.site.x() - sy.site.x();
        if self.degenerate.is_some() {
            return Ok((sx.p.re * sy.q.re - sx.q.re * sy.p.re) * self.c / dx);
        }
        real_part(self.scale * (sx.p * sy.q - sx.q * sy.p) / dx)
    }

    pub fn entry(&self, x: LatticePoint, y: LatticePoint) -> Result<f64> {
        if x == y {
            return Ok(self.site_data(x)?.diagonal);
        }
        if let Some(a) = self.degenerate {
            let tx = x.x() + a + 0.5;
            let ty = y.x() + a + 0.5;
            let s = gamma_sign(tx)? * gamma_sign(ty)?;
            let dpsi = digamma(Complex::new(tx, 0.0))?.re - digamma(Complex::new(ty, 0.0))?.re;
            return Ok(self.c * s * dpsi / (x.x() - y.x()));
        }
        let l = gauge(&self.params, x)?.log() - gauge(&self.params, y)?.log();
        real_part(self.scale * 2.0 * l.sinh() / (x.x() - y.x()))
    }

    /// One-point density `ρ₁(x) = K(x,x)`.
    pub fn rho1(&self, x: LatticePoint) -> Result<f64> {
        Ok(self.site_data(x)?.diagonal)
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }
}

/// `K^{(z,z')}(x,y)`.
pub fn kernel_entry(p: &AdmissibleParams, x: LatticePoint, y: LatticePoint) -> Result<f64> {
    GammaKernel::new(*p).entry(x, y)
}

/// Modified kernel `(A(y)/A(x))·K(x,y)`.
pub fn modified_kernel_entry(p: &AdmissibleParams, x: LatticePoint, y: LatticePoint) -> Result<Complex> {
    let k = kernel_entry(p, x, y)?;
    let ratio = (gauge(p, y)?.log() - gauge(p, x)?.log()).exp();
    Ok(ratio * k)
}

/// Modified kernel as the balanced series `C·Σ_m Γ(x+z'+½+m)Γ(y+z+½+m)/(Γ(x+z+3/2+m)Γ(y+z'+3/2+m))`.
pub fn kernel_series(p: &AdmissibleParams, x: LatticePoint, y: LatticePoint, tol: f64) -> Result<SeriesSum> {
    let c = c_constant(p);
    let a = p.zp() + x.x() + 0.5;
    let b = p.z() + y.x() + 0.5;
    let cc = p.z() + x.x() + 0.5;
    let s = balanced_sum(a, b, cc, tol / c.max(1e-300))?;
    Ok(SeriesSum { value: s.value * c, bound: s.bound * c, terms: s.terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(k: i64) -> LatticePoint {
        LatticePoint(k)
    }

    fn param_sets() -> Vec<AdmissibleParams> {
        vec![
            AdmissibleParams::principal(0.4, 0.7).unwrap(),
            AdmissibleParams::principal(0.5, 1.0).unwrap(),
            AdmissibleParams::real(0.2, 0.6).unwrap(),
            AdmissibleParams::real(-0.7, -0.2).unwrap(),
            AdmissibleParams::real(0.3, 0.3).unwrap(),
        ]
    }

    #[test]
    fn c_constant_values() {
        let half = AdmissibleParams::real(0.5, 0.5).unwrap();
        assert!((c_constant(&half) - 1.0 / (PI * PI)).abs() < 1e-16);
        let p = AdmissibleParams::principal(0.5, 1.0).unwrap();
        let v = sin_pi(p.z()) * sin_pi(p.zp()) / (PI * PI) * t_over_sin(PI * (p.z() - p.zp()));
        assert!(v.re > 0.0 && v.im.abs() < 1e-13);
        let a = AdmissibleParams::real(0.3, 0.3).unwrap();
        let near = AdmissibleParams::real(0.3, 0.3 + 1e-6).unwrap();
        assert!((c_constant(&a) - c_constant(&near)).abs() < 1e-5);
    }

    #[test]
    fn gauge_properties() {
        let p = AdmissibleParams::principal(0.4, 0.7).unwrap();
        assert!((a_weight(&p, lp(3)).unwrap().norm() - 1.0).abs() < 1e-14);
        for params in param_sets() {
            for k in -6..6 {
                let prod = a_weight(&params, lp(k)).unwrap() * a_weight(&params.swap(), lp(k)).unwrap();
                assert!((prod - 1.0).norm() < 1e-12, "{params} {k}");
            }
        }
        let d = AdmissibleParams::real(0.3, 0.3).unwrap();
        for k in -6..6 {
            let s = gamma_sign(lp(k).x() + 0.8).unwrap();
            assert_eq!(a_weight(&d, lp(k)).unwrap().re, s);
        }
    }

    #[test]
    fn symmetric_and_swap_invariant() {
        for p in param_sets() {
            for i in -5..5 {
                for j in -5..5 {
                    let k = kernel_entry(&p, lp(i), lp(j)).unwrap();
                    assert!((k - kernel_entry(&p, lp(j), lp(i)).unwrap()).abs() < 1e-14);
                    assert!((k - kernel_entry(&p.swap(), lp(i), lp(j)).unwrap()).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn diagonal_is_limit_of_off_diagonal() {
        // Continue the off-diagonal formula to y = x + ε through the gamma ratios.
        let p = AdmissibleParams::principal(0.4, 0.7).unwrap();
        let x = lp(2);
        let eps = 1e-6;
        let log_a = |t: f64| {
            let u = p.z() + t + 0.5;
            let up = p.zp() + t + 0.5;
            let l = log_gamma_reduced(u).unwrap();
            let lp = log_gamma_reduced(up).unwrap();
            Complex::new(0.5 * (l.re - lp.re), l.im)
        };
        let l = log_a(x.x()) - log_a(x.x() + eps);
        let near = (prefactor(&p) * 2.0 * l.sinh() / -eps).re;
        assert!((near - kernel_entry(&p, x, x).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn trigamma_accuracy() {
        // ψ'(1) = π²/6, ψ'(½) = π²/2.
        assert!((trigamma_real(1.0).unwrap() - PI * PI / 6.0).abs() < 1e-14);
        assert!((trigamma_real(0.5).unwrap() - PI * PI / 2.0).abs() < 1e-14);
        for (t, want) in [
            (0.8, 2.299_474_137_501_7),
            (-2.3, 14.725_912_160_961_292),
            (13.5, 0.076_885_224_601_578_37),
            (10000.8, 0.000_099_997_000_006_671_47),
        ] {
            let got = trigamma_real(t).unwrap();
            assert!((got - want).abs() < 1e-14 * want, "{t}: {got} vs {want}");
        }
        // ψ'(t) = ψ'(t+1) + 1/t².
        let t = -3.7;
        let r = trigamma_real(t).unwrap() - trigamma_real(t + 1.0).unwrap() - 1.0 / (t * t);
        assert!(r.abs() < 1e-12);
        assert!(trigamma_real(-2.0).is_err());
    }

    #[test]
    fn site_data_route_matches_direct() {
        for p in param_sets() {
            let k = GammaKernel::new(p);
            let data: Vec<_> = (-6..6).map(|i| k.site_data(lp(i)).unwrap()).collect();
            for a in &data {
                for b in &data {
                    let direct = k.entry(a.site, b.site).unwrap();
                    let fast = k.entry_from(a, b).unwrap();
                    assert!((direct - fast).abs() < 1e-13, "{p} {} {}", a.site, b.site);
                }
            }
        }
    }

    #[test]
    fn series_matches_closed_form() {
        for p in param_sets() {
            for i in -4..4 {
                for j in -4..4 {
                    let closed = modified_kernel_entry(&p, lp(i), lp(j)).unwrap();
                    let s = kernel_series(&p, lp(i), lp(j), 1e-12).unwrap();
                    assert!(
                        (s.value - closed).norm() <= 1e-10 * closed.norm().max(1e-3),
                        "{p} ({i},{j}): {} vs {}",
                        s.value,
                        closed
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_series_terms() {
        let a = 0.3;
        let p = AdmissibleParams::real(a, a).unwrap();
        let c = c_constant(&p);
        let (x, y) = (lp(1), lp(-3));
        for m in 0..=5 {
            let mf = m as f64;
            let term = c / ((x.x() + a + 0.5 + mf) * (y.x() + a + 0.5 + mf));
            let ln = log_gamma_reduced(Complex::new(x.x() + a + 0.5 + mf, 0.0)).unwrap()
                + log_gamma_reduced(Complex::new(y.x() + a + 0.5 + mf, 0.0)).unwrap()
                - log_gamma_reduced(Complex::new(x.x() + a + 1.5 + mf, 0.0)).unwrap()
                - log_gamma_reduced(Complex::new(y.x() + a + 1.5 + mf, 0.0)).unwrap();
            assert!((c * ln.exp().re - term).abs() < 1e-14);
        }
    }
}
