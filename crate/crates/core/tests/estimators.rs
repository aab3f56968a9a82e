use symmix::contrast::{contrast_p2, gtilde_theta, population_contrast};
use symmix::empirical::smoothed_cdf;
use symmix::estimate::{
    default_grid, estimate_cdf, estimate_density, fit_lambda, fit_theta, fit_theta_default,
    jackknife_se, moment_lambda,
};
use symmix::normal;
use symmix::optimize::default_starts;
use symmix::simulate::{
    run_monte_carlo, sample_gaussian_mixture, sample_trimodal, BandwidthSetting, GaussianMixture,
    Scenario,
};
use symmix::{Bandwidth, OptimConfig, ParamSpace, Problem, Sample, SeriesTruncation, Theta};

fn theta0() -> Theta {
    Theta::new(0.25, -1.0, 2.0).unwrap()
}

fn known_locations() -> ParamSpace {
    ParamSpace::new(0.05, (-1.0, -1.0), (2.0, 2.0), 3.0).unwrap()
}

fn p2_space() -> ParamSpace {
    ParamSpace::new(0.05, (-4.0, 0.25), (0.75, 5.0), 0.5).unwrap()
}

#[test]
fn p1_fit_near_truth() {
    let s = sample_gaussian_mixture(&theta0(), 1.0, 400, 11).unwrap();
    let fit = fit_lambda(&s, -1.0, 2.0, &known_locations(), &OptimConfig::default()).unwrap();
    assert!(
        (fit.theta.lambda - 0.25).abs() <= 0.1,
        "{}",
        fit.theta.lambda
    );
    assert!(fit.diagnostics.converged);
    assert!(fit.contrast_at_opt >= 0.0);
}

#[test]
fn p1_fit_at_boundary() {
    let t = Theta::new(0.0, -1.0, 2.0).unwrap();
    let s = sample_gaussian_mixture(&t, 1.0, 1000, 12).unwrap();
    let fit = fit_lambda(&s, -1.0, 2.0, &known_locations(), &OptimConfig::default()).unwrap();
    assert!(
        (0.0..=0.05).contains(&fit.theta.lambda),
        "{}",
        fit.theta.lambda
    );
}

#[test]
fn exact_cdf_contrast_vanishes_at_truth() {
    let t = theta0();
    let g = GaussianMixture::two_component(&t, 1.0).unwrap();
    let k = population_contrast(
        &t,
        &|x: f64| g.cdf(x),
        &|x: f64| g.pdf(x),
        (-13.0, 14.0),
        4000,
        &SeriesTruncation::default(),
    );
    assert!(k <= 1e-8, "{k}");
}

#[test]
fn smoothed_plug_in_is_consistent() {
    let t = theta0();
    let s = sample_gaussian_mixture(&t, 1.0, 2000, 13).unwrap();
    let b = Bandwidth::n_pow_neg_quarter(2000);
    let worst = s
        .values()
        .iter()
        .map(|&x| (gtilde_theta(&t, &s, &b, x) - smoothed_cdf(&s, &b, x)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn p2_contrast_at_truth_decreases_with_n() {
    let t = theta0();
    let values: Vec<f64> = [200, 800, 2000]
        .iter()
        .map(|&n| {
            let b = Bandwidth::n_pow_neg_quarter(n);
            (0..20)
                .map(|seed| {
                    let s = sample_gaussian_mixture(&t, 1.0, n, 1400 + seed).unwrap();
                    contrast_p2(&t, &s, &b).value
                })
                .sum::<f64>()
                / 20.0
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn p2_contrast_cost_at_n_2000() {
    let t = theta0();
    let s = sample_gaussian_mixture(&t, 1.0, 2000, 15).unwrap();
    let b = Bandwidth::n_pow_neg_quarter(2000);
    let start = std::time::Instant::now();
    let v = contrast_p2(&t, &s, &b);
    assert!(v.value.is_finite());
    assert!(start.elapsed().as_secs_f64() < 1.0, "{:?}", start.elapsed());
}

#[test]
fn some_start_is_near_truth() {
    let s = sample_gaussian_mixture(&theta0(), 1.0, 200, 16).unwrap();
    let starts = default_starts(&p2_space(), &s, 8);
    let t = theta0().to_array();
    let nearest = starts
        .iter()
        .map(|st| {
            st.iter()
                .zip(&t)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(nearest <= 1.5, "{nearest}");
}

#[test]
fn p2_fit_is_canonical_and_shift_equivariant() {
    let s = sample_gaussian_mixture(&theta0(), 1.0, 150, 17).unwrap();
    let b = Bandwidth::n_pow_neg_quarter(150);
    let cfg = OptimConfig::default();
    let a = fit_theta(&s, &p2_space(), &b, &cfg).unwrap();
    assert!(a.theta.lambda <= 0.45);
    assert!(p2_space().contains(&a.theta));
    let c = 3.25;
    let shifted = fit_theta(&s.shifted(c), &p2_space().shifted(c), &b, &cfg).unwrap();
    assert!((a.theta.lambda - shifted.theta.lambda).abs() <= 1e-6);
    assert!((a.theta.mu1 + c - shifted.theta.mu1).abs() <= 1e-6);
    assert!((a.theta.mu2 + c - shifted.theta.mu2).abs() <= 1e-6);
}

#[test]
fn cdf_estimate_close_to_phi() {
    let t = theta0();
    let s = sample_gaussian_mixture(&t, 1.0, 2000, 18).unwrap();
    let grid = default_grid(&s, &t, 0.0, 512).unwrap();
    let f = estimate_cdf(&s, &t, &grid, &SeriesTruncation::default()).unwrap();
    let sup = f
        .iter()
        .map(|(x, y)| (y - normal::cdf(x)).abs())
        .fold(0.0, f64::max);
    assert!(sup < 0.05, "{sup}");
}

fn l1(curve: &symmix::Curve, f0: impl Fn(f64) -> f64) -> f64 {
    let xs = curve.abscissae();
    let d: Vec<f64> = curve.iter().map(|(x, y)| (y - f0(x)).abs()).collect();
    xs.windows(2)
        .zip(d.windows(2))
        .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
        .sum()
}

#[test]
fn projection_contracts_on_gaussian_data() {
    let t = theta0();
    for seed in 0..5 {
        let s = sample_gaussian_mixture(&t, 1.0, 100, 19 + seed).unwrap();
        let b = Bandwidth::n_pow_neg_quarter(100);
        let grid = default_grid(&s, &t, b.value, 512).unwrap();
        let d = estimate_density(&s, &t, &b, &grid, &SeriesTruncation::default()).unwrap();
        assert!(l1(&d.projection, normal::pdf) <= l1(&d.unprojected, normal::pdf));
    }
}

#[test]
fn trimodal_pipeline() {
    let s = sample_trimodal(100, 20).unwrap();
    let b = Bandwidth::n_pow_neg_quarter(100);
    let (fit, _) = fit_theta_default(&s, 0.05, &b, &OptimConfig::default()).unwrap();
    let grid = default_grid(&s, &fit.theta, b.value, 512).unwrap();
    let d = estimate_density(&s, &fit.theta, &b, &grid, &SeriesTruncation::default()).unwrap();
    let f0 = GaussianMixture::trimodal_component();
    let dist = l1(&d.curve, |x| f0.pdf(x));
    assert!(dist < 0.5, "L1 = {dist}, theta = {:?}", fit.theta);
}

#[test]
fn jackknife_on_a_rainfall_sized_sample() {
    let s = sample_gaussian_mixture(&theta0(), 1.0, 70, 21).unwrap();
    let b = Bandwidth::n_pow_neg_quarter(70);
    let cfg = OptimConfig {
        n_starts: 4,
        ..OptimConfig::default()
    };
    let space = p2_space();
    let j = jackknife_se(&s, |x| Ok(fit_theta(x, &space, &b, &cfg)?.estimates())).unwrap();
    assert_eq!(j.se.len(), 3);
    assert!(j.se.iter().all(|v| v.is_finite() && *v > 0.0), "{:?}", j.se);
    assert_eq!(j.failures, 0);
}

#[test]
fn moment_and_contrast_estimates_agree() {
    let s = sample_gaussian_mixture(&theta0(), 1.0, 400, 22).unwrap();
    let space = known_locations();
    let cfg = OptimConfig::default();
    let contrast = fit_lambda(&s, -1.0, 2.0, &space, &cfg)
        .unwrap()
        .theta
        .lambda;
    let moment = moment_lambda(&s, -1.0, 2.0, &space);
    let se_c = jackknife_se(&s, |x| {
        Ok(fit_lambda(x, -1.0, 2.0, &space, &cfg)?.estimates())
    })
    .unwrap()
    .se[0];
    let se_m = jackknife_se(&s, |x| Ok(vec![moment_lambda(x, -1.0, 2.0, &space)]))
        .unwrap()
        .se[0];
    assert!((contrast - moment).abs() <= 2.0 * (se_c * se_c + se_m * se_m).sqrt());
}

#[test]
fn simulated_means() {
    let t = Theta::new(0.0, -1.0, 2.0).unwrap();
    let s = sample_gaussian_mixture(&t, 1.5, 5000, 23).unwrap();
    assert!((s.mean() - 2.0).abs() <= 4.0 * 1.5 / (5000f64).sqrt());

    let n = 100_000;
    let s = sample_gaussian_mixture(&theta0(), 1.0, n, 24).unwrap();
    let sd = (1.0 + 0.25 * 0.75 * 9.0f64).sqrt();
    assert!((s.mean() - 1.25).abs() <= 4.0 * sd / (n as f64).sqrt());

    let s = sample_trimodal(n, 25).unwrap();
    let g = GaussianMixture::trimodal();
    let var: f64 = g
        .weights()
        .iter()
        .zip(g.centers())
        .map(|(w, c)| w * (1.0 + (c - 3.0) * (c - 3.0)))
        .sum();
    assert!((s.mean() - 3.0).abs() <= 4.0 * var.sqrt() / (n as f64).sqrt());
}

#[test]
fn simulation_is_seed_deterministic() {
    let a = sample_gaussian_mixture(&theta0(), 1.0, 300, 26).unwrap();
    let b = sample_gaussian_mixture(&theta0(), 1.0, 300, 26).unwrap();
    let c = sample_gaussian_mixture(&theta0(), 1.0, 300, 27).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
    assert_eq!(
        sample_trimodal(50, 1).unwrap(),
        sample_trimodal(50, 1).unwrap()
    );
}

fn scenario(lambda: f64, n: usize, reps: usize, problem: Problem) -> Scenario {
    Scenario {
        lambda,
        mu1: -1.0,
        mu2: 2.0,
        sigma: 1.0,
        n,
        reps,
        problem,
        seed: 28,
        bandwidth: BandwidthSetting::default(),
    }
}

#[test]
fn single_replication_report() {
    let sc = scenario(0.25, 200, 1, Problem::P1);
    let space = sc.space(0.05, 3.0, 0.5).unwrap();
    let r = run_monte_carlo(&sc, &space, &OptimConfig::default()).unwrap();
    assert!(!r.std_defined);
    assert_eq!(r.std, vec![0.0]);
    let s = sample_gaussian_mixture(&theta0(), 1.0, 200, 28).unwrap();
    let fit = fit_lambda(&s, -1.0, 2.0, &space, &OptimConfig::default()).unwrap();
    assert_eq!(r.mean, vec![fit.theta.lambda]);
}

#[test]
fn normalised_dispersion_decreases_with_lambda() {
    let ratios: Vec<f64> = [0.15, 0.25, 0.35]
        .iter()
        .map(|&l| {
            let sc = scenario(l, 100, 300, Problem::P1);
            let r = run_monte_carlo(
                &sc,
                &sc.space(0.05, 3.0, 0.5).unwrap(),
                &OptimConfig::default(),
            )
            .unwrap();
            r.std[0] / l
        })
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn rejects_invalid_inputs() {
    assert!(Sample::new(vec![1.0]).is_err());
    assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
    assert!(Theta::new(0.5, 0.0, 1.0).is_err());
    assert!(Theta::new(0.2, 1.0, 1.0).is_err());
    let s = Sample::new(vec![0.0, 1.0, 2.0]).unwrap();
    assert!(fit_lambda(&s, 1.0, 1.0, &known_locations(), &OptimConfig::default()).is_err());
    let sc = scenario(0.25, 1, 1, Problem::P1);
    assert!(sc.validate().is_err());
    let sc = scenario(0.25, 10, 0, Problem::P1);
    assert!(sc.validate().is_err());
}
