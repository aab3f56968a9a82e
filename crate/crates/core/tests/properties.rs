use proptest::prelude::*;
use symmix::baseline::{em_fit, loglik, EmConfig, GaussianParams};
use symmix::contrast::{contrast_p1, contrast_p2, ghat_lambda, gtilde_theta};
use symmix::empirical::{Ecdf, SmoothedCdf};
use symmix::estimate::{default_grid, estimate_cdf, estimate_density, fit_lambda, jackknife_se};
use symmix::model::{apply_a, apply_a_inv, apply_sd, g_theta};
use symmix::optimize::default_starts;
use symmix::{Bandwidth, OptimConfig, ParamSpace, Sample, SeriesTruncation, Theta};

fn theta() -> impl Strategy<Value = Theta> {
    (0.0..0.45f64, -3.0..3.0f64, 0.5..4.0f64, any::<bool>()).prop_map(|(l, m1, sep, right)| {
        let m2 = if right { m1 + sep } else { m1 - sep };
        Theta::new(l, m1, m2).unwrap()
    })
}

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Sample> {
    prop::collection::vec(-6.0..6.0f64, len).prop_map(|v| Sample::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ecdf_closed_form_matches_series(t in theta(), s in sample(2..30), x in -12.0..12.0f64) {
        let fine = SeriesTruncation::new(1e-14, 100_000).unwrap();
        let series = g_theta(&t, &Ecdf(&s), x, &fine);
        prop_assert!((ghat_lambda(&t, &s, x) - series).abs() <= 1e-8);
    }

    #[test]
    fn smoothed_closed_form_matches_series(
        t in theta(), s in sample(2..30), x in -12.0..12.0f64, b in 0.05..2.0f64,
    ) {
        let b = Bandwidth::fixed(b).unwrap();
        let fine = SeriesTruncation::new(1e-14, 100_000).unwrap();
        let series = g_theta(&t, &SmoothedCdf { sample: &s, bandwidth: b }, x, &fine);
        prop_assert!((gtilde_theta(&t, &s, &b, x) - series).abs() <= 1e-8);
    }

    #[test]
    fn contrasts_are_nonnegative(t in theta(), s in sample(2..40), b in 0.05..2.0f64) {
        prop_assert!(contrast_p1(&t, &s).value >= 0.0);
        prop_assert!(contrast_p2(&t, &s, &Bandwidth::fixed(b).unwrap()).value >= 0.0);
    }

    #[test]
    fn p1_contrast_ignores_input_order(t in theta(), v in prop::collection::vec(-6.0..6.0f64, 2..30)) {
        let a = Sample::new(v.clone()).unwrap();
        let mut r = v;
        r.reverse();
        let b = Sample::new(r).unwrap();
        prop_assert_eq!(contrast_p1(&t, &a).value, contrast_p1(&t, &b).value);
    }

    #[test]
    fn round_trip_within_tail(t in theta(), x in -8.0..8.0f64) {
        let trunc = SeriesTruncation::default();
        let h = |y: f64| (2.0 * y).sin();
        let ah = |y: f64| apply_a(&t, &h, y);
        let r = t.ratio().abs();
        let k = trunc.terms(t.lambda) as i32;
        let bound = r.powi(k) + 64.0 * k as f64 * f64::EPSILON;
        prop_assert!((apply_a_inv(&t, &ah, x, &trunc) - h(x)).abs() <= bound);
    }

    #[test]
    fn operator_norm_bounds(t in theta(), x in -8.0..8.0f64) {
        let trunc = SeriesTruncation::default();
        let h = |y: f64| (3.0 * y).cos();
        prop_assert!(apply_a(&t, &h, x).abs() <= 1.0 + 1e-15);
        prop_assert!(apply_a_inv(&t, &h, x, &trunc).abs() <= 1.0 / (1.0 - 2.0 * t.lambda) + 1e-12);
    }

    #[test]
    fn sd_is_an_exact_involution(x in -1e6..1e6f64) {
        let h = |y: f64| y.exp().ln_1p() * 0.3;
        prop_assert_eq!(apply_sd(&|y: f64| apply_sd(&h, y), x), h(x));
    }

    #[test]
    fn functional_estimators_are_symmetric(t in theta(), s in sample(5..40), points in 16usize..80) {
        let trunc = SeriesTruncation::default();
        let b = Bandwidth::n_pow_neg_quarter(s.n());
        let grid = default_grid(&s, &t, b.value, points).unwrap();
        let cdf = estimate_cdf(&s, &t, &grid, &trunc).unwrap();
        let y = cdf.ordinates();
        for k in 0..points {
            prop_assert_eq!(y[k] + y[points - 1 - k], 1.0);
        }
        if let Ok(d) = estimate_density(&s, &t, &b, &grid, &trunc) {
            let f = d.curve.ordinates();
            for k in 0..points {
                prop_assert!(f[k] >= 0.0);
                prop_assert_eq!(f[k], f[points - 1 - k]);
            }
            prop_assert!((d.curve.trapezoid() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn p1_fit_is_shift_equivariant(s in sample(10..60), c in -5.0..5.0f64) {
        let space = ParamSpace::new(0.05, (-1.0, -1.0), (2.0, 2.0), 3.0).unwrap();
        let cfg = OptimConfig::default();
        let a = fit_lambda(&s, -1.0, 2.0, &space, &cfg).unwrap();
        let b = fit_lambda(&s.shifted(c), -1.0 + c, 2.0 + c, &space.shifted(c), &cfg).unwrap();
        prop_assert!((a.theta.lambda - b.theta.lambda).abs() <= 1e-6);
    }

    #[test]
    fn starts_are_feasible(s in sample(4..50), n_starts in 1usize..12) {
        for left in [true, false] {
            let space = ParamSpace::from_data(s.values(), 0.05, left).unwrap();
            let starts = default_starts(&space, &s, n_starts);
            prop_assert_eq!(starts.len(), n_starts);
            for st in starts {
                prop_assert!(space.contains(&Theta::from_slice(&st).unwrap()));
            }
        }
    }

    #[test]
    fn em_ascends(s in sample(5..60), l in 0.05..0.95f64, m1 in -3.0..3.0f64, m2 in -3.0..3.0f64) {
        let init = GaussianParams::new(l, m1, m2).unwrap();
        if let Ok(fit) = em_fit(&s, &EmConfig::default(), init) {
            prop_assert!(fit.monotone);
            prop_assert!(fit.params.lambda <= 0.5);
            prop_assert!(fit.params.mu1 >= s.min() && fit.params.mu1 <= s.max());
            prop_assert!(fit.params.mu2 >= s.min() && fit.params.mu2 <= s.max());
            if fit.restarts == 0 {
                prop_assert!(fit.loglik >= loglik(&s, &init, 1.0) - 1e-9);
            }
        }
    }

    #[test]
    fn jackknife_of_constant_is_zero(s in sample(3..30), c in -10.0..10.0f64) {
        let r = jackknife_se(&s, |_| Ok(vec![c])).unwrap();
        prop_assert_eq!(r.se, vec![0.0]);
    }
}
