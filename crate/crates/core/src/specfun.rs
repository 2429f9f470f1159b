//! Gamma-family special functions over real and complex arguments.
//!
//! Everything is computed in the log domain. `log_gamma` returns the principal
//! branch; `log_gamma_reduced` returns the same value with the imaginary part
//! wrapped into (−π, π], which is all that ratios and gauge weights need and is
//! immune to the loss of absolute accuracy in a large principal phase.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

const POLE_GUARD: f64 = 1e-14;
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_PI: f64 = 1.144_729_885_849_400_2;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bernoulli numbers B_2, B_4, ..., B_18.
const BERNOULLI_EVEN: [f64; 9] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
];

/// `log|Γ(t)|` together with the sign of `Γ(t)` for real `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogMagnitude {
    pub log_abs: f64,
    pub sign: f64,
}

impl SignedLogMagnitude {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

fn check_pole(w: Complex) -> Result<()> {
    let n = w.re.round();
    if n <= 0.0 && (w.re - n).hypot(w.im) < POLE_GUARD {
        return Err(Error::PoleArgument { re: w.re, im: w.im });
    }
    Ok(())
}

/// `e^w − 1` without cancellation for small `|w|`.
pub fn expm1(w: Complex) -> Complex {
    let half_sin = (0.5 * w.im).sin();
    Complex::new(
        w.re.exp_m1() * w.im.cos() - 2.0 * half_sin * half_sin,
        w.re.exp() * w.im.sin(),
    )
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * (theta / two_pi).round();
    if t <= -PI {
        t += two_pi;
    } else if t > PI {
        t -= two_pi;
    }
    t
}

fn lanczos(w: Complex) -> Complex {
    let z = w - 1.0;
    let mut series = Complex::new(LANCZOS[0], 0.0);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + series.ln()
}

/// `1 − e^{2πiw}` for `Im w ≥ 0`, accurate near the real axis and near integers.
fn one_minus_exp_2pi_i(w: Complex) -> Complex {
    let theta = 2.0 * PI * (w.re - w.re.round());
    let decay = (-2.0 * PI * w.im).exp();
    let half = (0.5 * theta).sin();
    Complex::new(
        -(-2.0 * PI * w.im).exp_m1() + decay * 2.0 * half * half,
        -decay * theta.sin(),
    )
}

fn log_gamma_upper(w: Complex, reduce: bool) -> Complex {
    if w.re >= 0.5 {
        return lanczos(w);
    }
    // log sin(πw) = −ln 2 + iπ(½ − w) + Ln(1 − e^{2πiw}) on the closed upper half plane.
    let tail = one_minus_exp_2pi_i(w).ln();
    let x = if reduce { w.re - 2.0 * (0.5 * w.re).round() } else { w.re };
    let log_sin = Complex::new(-LN_2 + PI * w.im + tail.re, PI * (0.5 - x) + tail.im);
    LN_PI - log_sin - lanczos(1.0 - w)
}

fn log_gamma_impl(w: Complex, reduce: bool) -> Result<Complex> {
    check_pole(w)?;
    let v = if w.im < 0.0 {
        log_gamma_upper(w.conj(), reduce).conj()
    } else {
        log_gamma_upper(w, reduce)
    };
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::PoleArgument { re: w.re, im: w.im });
    }
    Ok(if reduce { Complex::new(v.re, wrap_phase(v.im)) } else { v })
}

/// Principal branch of `log Γ(w)`.
pub fn log_gamma(w: Complex) -> Result<Complex> {
    log_gamma_impl(w, false)
}

/// `log Γ(w)` with the imaginary part reduced into (−π, π].
pub fn log_gamma_reduced(w: Complex) -> Result<Complex> {
    log_gamma_impl(w, true)
}

/// `log|Γ(t)|` and `sgn Γ(t)` for real `t`.
pub fn ln_gamma_real(t: f64) -> Result<SignedLogMagnitude> {
    let sign = gamma_sign(t)?;
    let log_abs = log_gamma_reduced(Complex::new(t, 0.0))?.re;
    Ok(SignedLogMagnitude { log_abs, sign })
}

/// Sign of `Γ(t)` for real `t`.
pub fn gamma_sign(t: f64) -> Result<f64> {
    check_pole(Complex::new(t, 0.0))?;
    if t > 0.0 {
        return Ok(1.0);
    }
    let n = (-t).ceil();
    Ok(if n % 2.0 == 0.0 { 1.0 } else { -1.0 })
}

/// `cot(πw)`, stable for large `|Im w|` and for large real parts.
pub fn cot_pi(w: Complex) -> Complex {
    if w.im == 0.0 {
        let r = PI * (w.re - w.re.round());
        return Complex::new(r.cos() / r.sin(), 0.0);
    }
    if w.im < 0.0 {
        return cot_pi(w.conj()).conj();
    }
    let one_minus_q = one_minus_exp_2pi_i(w);
    let one_plus_q = 2.0 - one_minus_q;
    Complex::new(0.0, -1.0) * one_plus_q / one_minus_q
}

/// Digamma `ψ(w) = Γ'(w)/Γ(w)`.
pub fn digamma(w: Complex) -> Result<Complex> {
    check_pole(w)?;
    if w.re < 0.5 {
        let reflected = digamma(1.0 - w)?;
        return Ok(reflected - PI * cot_pi(w));
    }
    let mut w = w;
    let mut acc = Complex::new(0.0, 0.0);
    while w.re < 10.0 {
        acc -= w.inv();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut power = inv2;
    let mut series = Complex::new(0.0, 0.0);
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        series += *b / (2.0 * (k + 1) as f64) * power;
        power *= inv2;
    }
    Ok(acc + w.ln() - 0.5 * inv - series)
}

/// Digamma of a real argument.
pub fn digamma_real(t: f64) -> Result<f64> {
    Ok(digamma(Complex::new(t, 0.0))?.re)
}

/// Euler–Mascheroni constant, `−ψ(1)`.
pub fn euler_gamma() -> f64 {
    EULER_GAMMA
}

/// `Γ(x+α)/Γ(x+β)` through a log-domain difference.
pub fn gamma_ratio(x: f64, alpha: Complex, beta: Complex) -> Result<Complex> {
    let num = log_gamma_reduced(alpha + x)?;
    let den = log_gamma_reduced(beta + x)?;
    Ok((num - den).exp())
}

/// `sin(πw)` with the real part reduced modulo 2 before scaling.
pub fn sin_pi(w: Complex) -> Complex {
    let x = w.re - 2.0 * (0.5 * w.re).round();
    (Complex::new(x, w.im) * PI).sin()
}
