use gamma_dpp::finite_dpp::{random_projection, Sampler};
use gamma_dpp::gamma_kernel::{kernel_entry, make_params, LatticePoint};
use gamma_dpp::specfun::{digamma, log_gamma, sin_pi, Complex};
use proptest::prelude::*;

fn away_from_poles() -> impl Strategy<Value = Complex> {
    (-15.0..15.0f64, -10.0..10.0f64)
        .prop_filter("near a pole", |(re, im)| im.abs() > 0.05 || (re - re.round()).abs() > 0.05 || *re > 0.5)
        .prop_map(|(re, im)| Complex::new(re, im))
}

proptest! {
    #[test]
    fn log_gamma_recurrence(w in away_from_poles()) {
        let lhs = log_gamma(w + 1.0).unwrap().exp();
        let rhs = w * log_gamma(w).unwrap().exp();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1e-300));
    }

    #[test]
    fn reflection_formula(w in away_from_poles()) {
        let prod = (log_gamma(w).unwrap() + log_gamma(1.0 - w).unwrap()).exp() * sin_pi(w);
        prop_assert!((prod - std::f64::consts::PI).norm() <= 1e-9 * prod.norm().max(1.0));
    }

    #[test]
    fn digamma_recurrence(w in away_from_poles()) {
        let diff = digamma(w + 1.0).unwrap() - digamma(w).unwrap() - 1.0 / w;
        prop_assert!(diff.norm() <= 1e-10 * (1.0 + (1.0 / w).norm()));
    }

    #[test]
    fn principal_kernel_is_symmetric(
        re in -2.0..2.0f64,
        im in 0.1..2.0f64,
        kx in -40i64..40,
        ky in -40i64..40,
    ) {
        let z = Complex::new(re, im);
        let p = make_params(z, z.conj()).unwrap();
        let a = kernel_entry(&p, LatticePoint(kx), LatticePoint(ky)).unwrap();
        let b = kernel_entry(&p, LatticePoint(ky), LatticePoint(kx)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        let d = kernel_entry(&p, LatticePoint(kx), LatticePoint(kx)).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        // 2x2 minors of a correlation kernel are nonnegative
        let e = kernel_entry(&p, LatticePoint(ky), LatticePoint(ky)).unwrap();
        prop_assert!(d * e - a * b >= -1e-12);
    }

    #[test]
    fn projection_samples_have_fixed_size(n in 1usize..10, r_frac in 0.0..=1.0f64, seed: u64, index: u64) {
        let r = (r_frac * n as f64).round() as usize;
        let k = random_projection(n, r, seed);
        let omega = Sampler::new(&k).unwrap().sample(seed, index);
        prop_assert_eq!(omega.len(), r);
    }
}
