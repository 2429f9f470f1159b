//! Balanced series `Σ_{m≥0} Γ(a+m)Γ(b+m) / (Γ(c+m+1)Γ(d+m+1))` with `a+b = c+d`.
//!
//! The summand decays like `m^{-2}`, so plain partial sums converge far too
//! slowly. After an exact head of `N` terms the tail is expanded in inverse
//! powers of `m + c + 1` and summed with Hurwitz zeta values, which gives
//! near machine accuracy with a few hundred terms.

use crate::error::{Error, Result};
use crate::specfun::{expm1, log_gamma_reduced, Complex};

pub const TERM_BUDGET: usize = 10_000_000;
const TAIL_ORDER: usize = 18;
const REANCHOR: usize = 512;
const CONTINUITY_GUARD: f64 = 1e-8;
const CONTINUITY_STEP: f64 = 1e-3;

/// Bernoulli numbers `B_0 ..= B_20` (with `B_1 = −½`).
const BERNOULLI: [f64; 21] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
    0.0,
    7.0 / 6.0,
    0.0,
    -3617.0 / 510.0,
    0.0,
    43867.0 / 798.0,
    0.0,
    -174611.0 / 330.0,
];

/// Value of a summed series with a bound on its total error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: Complex,
    pub bound: f64,
    pub terms: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn bernoulli_poly(n: usize, alpha: Complex) -> Complex {
    let mut sum = Complex::new(0.0, 0.0);
    let mut power = Complex::new(1.0, 0.0);
    for j in 0..=n {
        let k = n - j;
        sum += binomial(n, k) * BERNOULLI[k] * power;
        power *= alpha;
    }
    sum
}

/// Hurwitz zeta `ζ(s, q)` for integer `s ≥ 2` and `|q| ≥ 20`, `Re q > 0`.
fn hurwitz_zeta(s: usize, q: Complex) -> Complex {
    let sf = s as f64;
    let inv = q.inv();
    let lead = (-(sf - 1.0) * q.ln()).exp();
    let mut sum = lead / (sf - 1.0) + 0.5 * lead * inv;
    let mut rising = sf;
    let mut factorial = 2.0;
    let mut power = lead * inv * inv;
    let inv2 = inv * inv;
    for j in 1..=9 {
        sum += BERNOULLI[2 * j] / factorial * rising * power;
        rising *= (sf + 2.0 * j as f64 - 1.0) * (sf + 2.0 * j as f64);
        factorial *= (2 * j + 1) as f64 * (2 * j + 2) as f64;
        power *= inv2;
    }
    sum
}

fn log_term(a: Complex, b: Complex, c: Complex, d: Complex, m: f64) -> Result<Complex> {
    Ok(log_gamma_reduced(a + m)? + log_gamma_reduced(b + m)?
        - log_gamma_reduced(c + m + 1.0)?
        - log_gamma_reduced(d + m + 1.0)?)
}

fn check_parameters(a: Complex, b: Complex, c: Complex, d: Complex) -> Result<()> {
    for w in [a, b, c + 1.0, d + 1.0] {
        let n = w.re.round();
        if n <= 0.0 && (w.re - n).hypot(w.im) < 1e-14 {
            return Err(Error::PoleArgument { re: w.re, im: w.im });
        }
    }
    Ok(())
}

/// Sums the balanced series with `d = a + b − c` to absolute accuracy `tol`.
pub fn balanced_sum(a: Complex, b: Complex, c: Complex, tol: f64) -> Result<SeriesSum> {
    let d = a + b - c;
    check_parameters(a, b, c, d)?;
    let shift = c + 1.0;
    let alphas = [a - shift, b - shift];
    let beta = d - c;
    let spread = alphas[0].norm().max(alphas[1].norm()).max(beta.norm()).max(1.0);

    let mut coeffs = [Complex::new(0.0, 0.0); TAIL_ORDER + 1];
    let mut logs = [Complex::new(0.0, 0.0); TAIL_ORDER + 1];
    for (n, log) in logs.iter_mut().enumerate().skip(1) {
        let combo = bernoulli_poly(n + 1, alphas[0]) + bernoulli_poly(n + 1, alphas[1])
            - bernoulli_poly(n + 1, Complex::new(0.0, 0.0))
            - bernoulli_poly(n + 1, beta);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        *log = sign * combo / (n * (n + 1)) as f64;
    }
    coeffs[0] = Complex::new(1.0, 0.0);
    for k in 1..=TAIL_ORDER {
        let mut acc = Complex::new(0.0, 0.0);
        for j in 1..=k {
            acc += j as f64 * logs[j] * coeffs[k - j];
        }
        coeffs[k] = acc / k as f64;
    }

    let start = (10.0 * spread + 40.0 - shift.re).max(32.0).ceil();
    let mut head_len = start as usize;
    let mut head = Complex::new(0.0, 0.0);
    let mut abs_head = 0.0;
    let mut done = 0usize;
    let mut term = Complex::new(0.0, 0.0);
    loop {
        if head_len > TERM_BUDGET {
            return Err(Error::BudgetExceeded { budget: TERM_BUDGET });
        }
        while done < head_len {
            let m = done as f64;
            if done.is_multiple_of(REANCHOR) {
                term = log_term(a, b, c, d, m)?.exp();
            }
            head += term;
            abs_head += term.norm();
            term *= (a + m) * (b + m) / ((c + m + 1.0) * (d + m + 1.0));
            done += 1;
        }
        let q = shift + head_len as f64;
        let mut tail = Complex::new(0.0, 0.0);
        for (k, ck) in coeffs.iter().enumerate().take(TAIL_ORDER) {
            tail += ck * hurwitz_zeta(k + 2, q);
        }
        let truncation = 2.0 * (coeffs[TAIL_ORDER] * hurwitz_zeta(TAIL_ORDER + 2, q)).norm();
        let rounding = 32.0 * f64::EPSILON * (abs_head + tail.norm());
        let bound = truncation + rounding;
        if bound <= tol {
            return Ok(SeriesSum { value: head + tail, bound, terms: head_len });
        }
        if rounding > tol {
            return Err(Error::NonConvergent { difference: rounding });
        }
        head_len *= 2;
    }
}

/// Right-hand side of the summation formula: `(1 − Γ(a)Γ(b)/(Γ(c)Γ(d))) / ((a−c)(b−c))`.
///
/// When `(a−c)(b−c)` is tiny the removable singularity is resolved by averaging
/// symmetric offsets `c ± ε` and Richardson-extrapolating in `ε`.
pub fn balanced_closed_form(a: Complex, b: Complex, c: Complex) -> Result<Complex> {
    let d = a + b - c;
    check_parameters(a, b, c, d)?;
    let raw = |c: Complex| -> Result<Complex> {
        let d = a + b - c;
        let l = log_gamma_reduced(a)? + log_gamma_reduced(b)?
            - log_gamma_reduced(c)?
            - log_gamma_reduced(d)?;
        Ok(-expm1(l) / ((a - c) * (b - c)))
    };
    if ((a - c) * (b - c)).norm() >= CONTINUITY_GUARD {
        return raw(c);
    }
    let avg = |eps: f64| -> Result<Complex> { Ok(0.5 * (raw(c + eps)? + raw(c - eps)?)) };
    let coarse = avg(CONTINUITY_STEP)?;
    let fine = avg(0.5 * CONTINUITY_STEP)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn brute(a: Complex, b: Complex, cc: Complex, terms: usize) -> Complex {
        let d = a + b - cc;
        let mut t = log_term(a, b, cc, d, 0.0).unwrap().exp();
        let mut s = c(0.0, 0.0);
        for m in 0..terms {
            s += t;
            let m = m as f64;
            t *= (a + m) * (b + m) / ((cc + m + 1.0) * (d + m + 1.0));
        }
        s
    }

    #[test]
    fn closed_form_oracle() {
        // (a, b, c) = (1, 2, 1.5): (Γ(1.5)² − 1)/(−0.25 Γ(1.5)²).
        let g = 0.886_226_925_452_758;
        let want = (g * g - 1.0) / (-0.25 * g * g);
        let got = balanced_closed_form(c(1.0, 0.0), c(2.0, 0.0), c(1.5, 0.0)).unwrap();
        assert!((got.re - want).abs() < 1e-13);
        let s = balanced_sum(c(1.0, 0.0), c(2.0, 0.0), c(1.5, 0.0), 1e-12).unwrap();
        assert!((s.value - got).norm() < 1e-12, "{} vs {}", s.value, got);
    }

    #[test]
    fn tail_beats_brute_force() {
        let (a, b, cc) = (c(0.3, 0.2), c(1.7, -0.4), c(0.9, 0.1));
        let s = balanced_sum(a, b, cc, 1e-13).unwrap();
        let closed = balanced_closed_form(a, b, cc).unwrap();
        assert!((s.value - closed).norm() < 1e-12);
        // Partial sums alone are off by roughly 1/N.
        let partial = brute(a, b, cc, 1000);
        assert!((partial - closed).norm() > 1e-4);
    }

    #[test]
    fn indeterminate_branch() {
        let (a, b) = (c(0.6, 0.0), c(1.9, 0.0));
        let s = balanced_sum(a, b, a, 1e-12).unwrap();
        let closed = balanced_closed_form(a, b, a).unwrap();
        assert!((s.value - closed).norm() < 1e-9, "{} vs {}", s.value, closed);
    }

    #[test]
    fn symmetric_in_c_and_d() {
        let (a, b, cc) = (c(2.2, 0.0), c(0.4, 0.0), c(1.1, 0.0));
        let d = a + b - cc;
        let x = balanced_closed_form(a, b, cc).unwrap();
        let y = balanced_closed_form(a, b, d).unwrap();
        assert!((x - y).norm() < 1e-13);
    }

    #[test]
    fn wide_spread_parameters() {
        let (a, b, cc) = (c(-7.3, 0.0), c(12.9, 0.0), c(-6.1, 0.0));
        let s = balanced_sum(a, b, cc, 1e-12).unwrap();
        let closed = balanced_closed_form(a, b, cc).unwrap();
        assert!((s.value - closed).norm() < 1e-10 * closed.norm().max(1.0));
    }

    #[test]
    fn poles_rejected() {
        assert!(balanced_sum(c(-2.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), 1e-10).is_err());
    }
}
