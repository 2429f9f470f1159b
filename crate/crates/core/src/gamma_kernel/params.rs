use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::Complex;

const INTEGER_GUARD: f64 = 1e-12;
const NEAR_DEGENERATE: f64 = 1e-8;

/// A half-integer lattice site `x = k + ½`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticePoint(pub i64);

impl LatticePoint {
    /// The site whose coordinate is `x`; `x` must be a half-integer.
    pub fn from_coordinate(x: f64) -> Option<Self> {
        let k = x - 0.5;
        (k.fract() == 0.0 && k.abs() < 9e15).then_some(Self(k as i64))
    }

    pub fn x(self) -> f64 {
        self.0 as f64 + 0.5
    }

    pub fn shifted(self, by: i64) -> Self {
        Self(self.0 + by)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.x())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Series {
    Principal,
    Complementary { ell: i64 },
}

/// An admissible parameter pair `(z, z')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleParams {
    z: Complex,
    zp: Complex,
    series: Series,
}

fn is_integer(t: f64) -> bool {
    (t - t.round()).abs() < INTEGER_GUARD
}

/// Classifies `(z, z')`, rejecting pairs outside the principal and complementary series.
pub fn make_params(z: Complex, zp: Complex) -> Result<AdmissibleParams> {
    let finite = |w: Complex| w.re.is_finite() && w.im.is_finite();
    if !finite(z) || !finite(zp) {
        return Err(Error::NotAdmissible("non-finite parameter".into()));
    }
    if z.im != 0.0 || zp.im != 0.0 {
        let mismatch = (zp - z.conj()).norm();
        if mismatch > 1e-14 * z.norm().max(1.0) {
            return Err(Error::NotAdmissible(format!(
                "complex z = {z} requires z' = conj(z), got {zp}"
            )));
        }
        return Ok(AdmissibleParams { z, zp: z.conj(), series: Series::Principal });
    }
    let (a, b) = (z.re, zp.re);
    if is_integer(a) || is_integer(b) {
        return Err(Error::NotAdmissible(format!("integer parameter in ({a}, {b})")));
    }
    let ell = a.floor();
    if b.floor() != ell {
        return Err(Error::NotAdmissible(format!(
            "{a} and {b} do not lie in a common interval (l, l+1)"
        )));
    }
    Ok(AdmissibleParams { z, zp, series: Series::Complementary { ell: ell as i64 } })
}

impl AdmissibleParams {
    pub fn new(z: Complex, zp: Complex) -> Result<Self> {
        make_params(z, zp)
    }

    pub fn real(z: f64, zp: f64) -> Result<Self> {
        make_params(Complex::new(z, 0.0), Complex::new(zp, 0.0))
    }

    pub fn principal(re: f64, im: f64) -> Result<Self> {
        make_params(Complex::new(re, im), Complex::new(re, -im))
    }

    pub fn z(&self) -> Complex {
        self.z
    }

    pub fn zp(&self) -> Complex {
        self.zp
    }

    pub fn series(&self) -> Series {
        self.series
    }

    pub fn is_real(&self) -> bool {
        self.z.im == 0.0 && self.zp.im == 0.0
    }

    /// True when `z = z'` exactly.
    pub fn is_degenerate(&self) -> bool {
        self.z == self.zp
    }

    /// The common value `a` when `|z − z'|` is small enough for the degenerate formulas.
    pub fn degenerate_value(&self) -> Option<f64> {
        ((self.z - self.zp).norm() < NEAR_DEGENERATE).then(|| 0.5 * (self.z + self.zp).re)
    }

    /// `(z', z)`.
    pub fn swap(&self) -> Self {
        Self { z: self.zp, zp: self.z, series: self.series }
    }

    /// `(z + m, z' + m)`.
    pub fn shifted(&self, m: i64) -> Self {
        let series = match self.series {
            Series::Principal => Series::Principal,
            Series::Complementary { ell } => Series::Complementary { ell: ell + m },
        };
        Self { z: self.z + m as f64, zp: self.zp + m as f64, series }
    }

    /// Complementary pairs reordered so that `z ≤ z'`; principal pairs unchanged.
    pub fn ordered(&self) -> Self {
        if self.is_real() && self.z.re > self.zp.re {
            self.swap()
        } else {
            *self
        }
    }
}

impl fmt::Display for AdmissibleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(z={}, z'={})", self.z, self.zp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let p = AdmissibleParams::principal(0.4, 0.7).unwrap();
        assert_eq!(p.series(), Series::Principal);
        let p = AdmissibleParams::real(0.2, 0.6).unwrap();
        assert_eq!(p.series(), Series::Complementary { ell: 0 });
        let p = AdmissibleParams::real(-0.7, -0.2).unwrap();
        assert_eq!(p.series(), Series::Complementary { ell: -1 });
        assert!(AdmissibleParams::real(0.2, 1.6).is_err());
        assert!(AdmissibleParams::real(1.0, 1.5).is_err());
        assert!(make_params(Complex::new(0.4, 0.7), Complex::new(0.4, 0.7)).is_err());
        assert!(AdmissibleParams::real(0.3, 0.3).unwrap().is_degenerate());
    }

    #[test]
    fn lattice_points() {
        assert_eq!(LatticePoint::from_coordinate(-1.5), Some(LatticePoint(-2)));
        assert_eq!(LatticePoint::from_coordinate(2.0), None);
        assert_eq!(LatticePoint(3).x(), 3.5);
    }

    #[test]
    fn shift_and_swap() {
        let p = AdmissibleParams::real(0.2, 0.6).unwrap();
        assert_eq!(p.shifted(2).series(), Series::Complementary { ell: 2 });
        assert_eq!(p.swap().z().re, 0.6);
        assert_eq!(p.swap().ordered(), p);
    }
}
