use middelay::midcore::{factorization_relative, force_multiplicity};
use middelay::quasipoly::{Quasipolynomial, RealPolynomial, SearchBox};
use middelay::roots::winding_count;
use middelay::specfun::{kummer_phi, KummerParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn quasi() -> impl Strategy<Value = Quasipolynomial> {
    (1usize..=4, 0.2f64..2.0)
        .prop_flat_map(|(n, tau)| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, 1..=n),
                Just(tau),
            )
        })
        .prop_map(|(a, alpha, tau)| Quasipolynomial::from_coefficients(&a, &alpha, tau).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn json_round_trip(q in quasi()) {
        let s = serde_json::to_string(&q).unwrap();
        let back: Quasipolynomial = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(&back, &q);
        let pretty: Quasipolynomial = serde_json::from_str(&middelay::cli::to_json(&q)).unwrap();
        prop_assert_eq!(pretty, q);
    }

    #[test]
    fn normalize_is_a_change_of_variable(q in quasi(), l0 in -2.0f64..1.0, re in -2.0f64..2.0, im in -3.0f64..3.0) {
        let z = Complex64::new(re, im);
        let tau = q.delay();
        let lhs = q.normalize(l0).eval(z);
        let rhs = q.eval(Complex64::new(l0, 0.0) + z / tau) * tau.powi(q.n() as i32);
        let scale = q.normalize(l0).magnitude_scale(z);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        let back = q.normalize(l0).denormalize(l0, tau).unwrap();
        for (x, y) in back.a_coeffs().iter().zip(q.a_coeffs()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        for (x, y) in back.alpha_coeffs().iter().zip(q.alpha_coeffs()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn designs_reach_full_multiplicity(
        n in 2usize..=4,
        mfrac in 0.0f64..1.0,
        tau in 0.2f64..2.0,
        l0 in -3.0f64..0.0,
        a in -2.0f64..2.0,
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
    ) {
        let m = 1 + ((n - 1) as f64 * mfrac) as usize % (n - 1);
        let d = force_multiplicity(n, m, tau, l0, a).unwrap();
        prop_assert!(d.multiplicity >= n + m);
        let lam = Complex64::new(l0 + re / tau, im / tau);
        prop_assert!(factorization_relative(&d, lam).unwrap() < 1e-8);
    }

    #[test]
    fn winding_counts_polynomial_roots(roots in prop::collection::vec(-3.0f64..3.0, 1..=5)) {
        prop_assume!(roots.iter().all(|r| (r.abs() - 1.5).abs() > 0.05));
        let mut p = RealPolynomial::constant(1.0);
        for &r in &roots {
            p = &p * &RealPolynomial::new(vec![-r, 1.0]);
        }
        let n = roots.len();
        let q = Quasipolynomial::with_shape(p, RealPolynomial::zero(), 0, 1.0).unwrap();
        let bx = SearchBox::new(-1.5, 1.5, -1.0, 1.0).unwrap();
        let inside = roots.iter().filter(|r| r.abs() < 1.5).count();
        prop_assert!(inside <= n);
        prop_assert_eq!(winding_count(&q, &bx).unwrap(), inside);
    }

    #[test]
    fn phi_with_equal_parameters_is_exponential(a in 0.5f64..5.0, re in -15.0f64..15.0, im in -15.0f64..15.0) {
        let z = Complex64::new(re, im);
        let v = kummer_phi(&KummerParams::real(a, a).unwrap(), z).unwrap();
        prop_assert!((v - z.exp()).norm() <= 1e-13 * z.exp().norm());
    }
}
