use crate::io::{fmt_f64, read_column, to_json, tsv_curve, write_text};
use crate::{
    CliError, CurvesArgs, EmArgs, FitArgs, FitLambdaArgs, InputArgs, MonteCarloArgs, SearchArgs,
    SimulateArgs, SCHEMA_VERSION,
};
use serde::Serialize;
use std::fs;
use symmix::baseline::{em_fit, EmConfig, GaussianParams};
use symmix::estimate::{
    default_grid, estimate_cdf, estimate_density, fit_lambda as fit_p1, fit_theta,
    fit_theta_default, jackknife_se, moment_lambda, reconstructed_density, JackknifeResult,
};
use symmix::optimize::default_starts;
use symmix::simulate::{rng_for, run_monte_carlo, GaussianMixture, Scenario};
use symmix::{Bandwidth, FitResult, OptimConfig, ParamSpace, Sample, SeriesTruncation, Theta};

fn load_sample(input: &InputArgs) -> Result<Sample, CliError> {
    let values = read_column(&input.input, &input.column, input.header)?;
    if values.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need n >= 2 observations, found {}",
            input.input.display(),
            values.len()
        )));
    }
    Ok(Sample::new(values)?)
}

fn optim_config(search: &SearchArgs) -> Result<OptimConfig, CliError> {
    let cfg = OptimConfig {
        n_starts: search.starts,
        ..OptimConfig::default()
    };
    cfg.validate()?;
    if !(search.d > 0.0 && search.d < 0.5) {
        return Err(CliError::Input(format!(
            "--d must lie in (0, 1/2), got {}",
            search.d
        )));
    }
    Ok(cfg)
}

fn bandwidth(value: Option<f64>, n: usize) -> Result<Bandwidth, CliError> {
    match value {
        Some(v) => Ok(Bandwidth::fixed(v)?),
        None => Ok(Bandwidth::n_pow_neg_quarter(n)),
    }
}

#[derive(Serialize)]
struct StandardErrors {
    values: Vec<f64>,
    failures: usize,
    warning: bool,
}

impl From<JackknifeResult> for StandardErrors {
    fn from(j: JackknifeResult) -> Self {
        Self {
            values: j.se,
            failures: j.failures,
            warning: j.warning,
        }
    }
}

#[derive(Serialize)]
struct FitOutput {
    schema_version: u32,
    command: &'static str,
    n: usize,
    lambda: f64,
    mu1: f64,
    mu2: f64,
    contrast: f64,
    converged: bool,
    n_iters: usize,
    n_evals: usize,
    bandwidth: f64,
    d: f64,
    space: ParamSpace,
    se: Option<StandardErrors>,
}

fn finish(converged: bool, output: Option<&std::path::Path>, json: String) -> Result<(), CliError> {
    write_text(output, &json)?;
    if converged {
        Ok(())
    } else {
        Err(CliError::Numerical("optimiser did not converge".into()))
    }
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.input)?;
    let cfg = optim_config(&a.search)?;
    let b = bandwidth(a.bandwidth, sample.n())?;
    let (fit, space) = fit_theta_default(&sample, a.search.d, &b, &cfg)?;
    let se = if a.jackknife {
        let j = jackknife_se(&sample, |s| Ok(fit_theta(s, &space, &b, &cfg)?.estimates()))?;
        Some(j.into())
    } else {
        None
    };
    let out = FitOutput {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        n: sample.n(),
        lambda: fit.theta.lambda,
        mu1: fit.theta.mu1,
        mu2: fit.theta.mu2,
        contrast: fit.contrast_at_opt,
        converged: fit.diagnostics.converged,
        n_iters: fit.diagnostics.n_iters,
        n_evals: fit.diagnostics.n_evals,
        bandwidth: b.value,
        d: a.search.d,
        space,
        se,
    };
    finish(out.converged, a.output.as_deref(), to_json(&out))
}

#[derive(Serialize)]
struct FitLambdaOutput {
    schema_version: u32,
    command: &'static str,
    n: usize,
    mu1: f64,
    mu2: f64,
    lambda: f64,
    moment_lambda: f64,
    contrast: f64,
    converged: bool,
    n_iters: usize,
    n_evals: usize,
    d: f64,
    se: Option<StandardErrors>,
}

pub fn fit_lambda(a: FitLambdaArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.input)?;
    let cfg = optim_config(&a.search)?;
    Theta::new(0.0, a.mu1, a.mu2)?;
    // Only λ is searched, so the location boxes just have to hold the known values.
    let space = ParamSpace::new(
        a.search.d,
        (a.mu1, a.mu1),
        (a.mu2, a.mu2),
        (a.mu2 - a.mu1).abs(),
    )?;
    let fit: FitResult = fit_p1(&sample, a.mu1, a.mu2, &space, &cfg)?;
    let se = if a.jackknife {
        let j = jackknife_se(&sample, |s| {
            Ok(fit_p1(s, a.mu1, a.mu2, &space, &cfg)?.estimates())
        })?;
        Some(j.into())
    } else {
        None
    };
    let out = FitLambdaOutput {
        schema_version: SCHEMA_VERSION,
        command: "fit-lambda",
        n: sample.n(),
        mu1: a.mu1,
        mu2: a.mu2,
        lambda: fit.theta.lambda,
        moment_lambda: moment_lambda(&sample, a.mu1, a.mu2, &space),
        contrast: fit.contrast_at_opt,
        converged: fit.diagnostics.converged,
        n_iters: fit.diagnostics.n_iters,
        n_evals: fit.diagnostics.n_evals,
        d: a.search.d,
        se,
    };
    finish(out.converged, a.output.as_deref(), to_json(&out))
}

fn read_scenario(path: &std::path::Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: invalid scenario: {e}", path.display())))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let (mixture, n, seed, label) = if let Some(path) = &a.scenario {
        let s = read_scenario(path)?;
        let seed = a.seed.unwrap_or(s.seed);
        let label = format!(
            "lambda={} mu1={} mu2={} sigma={} n={} seed={seed}",
            s.lambda, s.mu1, s.mu2, s.sigma, s.n
        );
        (
            GaussianMixture::two_component(&s.theta0()?, s.sigma)?,
            s.n,
            seed,
            label,
        )
    } else if a.trimodal {
        let seed = a.seed.unwrap_or(0);
        (
            GaussianMixture::trimodal(),
            a.n,
            seed,
            format!("trimodal n={} seed={seed}", a.n),
        )
    } else {
        let theta = Theta::new(a.lambda, a.mu1, a.mu2)?;
        let seed = a.seed.unwrap_or(0);
        let label = format!(
            "lambda={} mu1={} mu2={} sigma={} n={} seed={seed}",
            a.lambda, a.mu1, a.mu2, a.sigma, a.n
        );
        (
            GaussianMixture::two_component(&theta, a.sigma)?,
            a.n,
            seed,
            label,
        )
    };
    if n < 1 {
        return Err(CliError::Input("n must be >= 1".into()));
    }
    let mut text = format!("# schema_version {SCHEMA_VERSION}\n# {label}\n");
    for v in mixture.draw(n, &mut rng_for(seed, 0)) {
        text.push_str(&fmt_f64(v));
        text.push('\n');
    }
    write_text(a.output.as_deref(), &text)
}

pub fn montecarlo(a: MonteCarloArgs) -> Result<(), CliError> {
    let mut scenario = read_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let cfg = optim_config(&a.search)?;
    let space = scenario.space(a.search.d, a.reach, a.min_separation)?;
    let report = run_monte_carlo(&scenario, &space, &cfg)?;
    let theta0 = scenario.theta0()?.to_array();
    let scenario_json = serde_json::to_string(&scenario).expect("serializable");
    let mut text = format!("# schema_version\t{SCHEMA_VERSION}\n# scenario\t{scenario_json}\n");
    text.push_str("parameter\ttrue\tmean\tstd\tstd_defined\tsuccesses\tfailures\tnonconverged\n");
    for (j, name) in report.parameters.iter().enumerate() {
        text.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            fmt_f64(theta0[j]),
            fmt_f64(report.mean[j]),
            fmt_f64(report.std[j]),
            report.std_defined,
            report.successes,
            report.failures,
            report.nonconverged,
        ));
    }
    write_text(a.output.as_deref(), &text)
}

#[derive(Serialize)]
struct CurvesSummary {
    schema_version: u32,
    command: &'static str,
    n: usize,
    lambda: f64,
    mu1: f64,
    mu2: f64,
    fitted: bool,
    bandwidth: f64,
    grid_points: usize,
    normalization: f64,
    files: [&'static str; 3],
}

pub fn curves(a: CurvesArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.input)?;
    if a.grid_points < 16 {
        return Err(CliError::Input(format!(
            "--grid-points must be >= 16, got {}",
            a.grid_points
        )));
    }
    let b = bandwidth(a.bandwidth, sample.n())?;
    let (theta, fitted) = match (a.lambda, a.mu1, a.mu2) {
        (Some(l), Some(m1), Some(m2)) => (Theta::new(l, m1, m2)?, false),
        _ => {
            let cfg = optim_config(&a.search)?;
            (
                fit_theta_default(&sample, a.search.d, &b, &cfg)?.0.theta,
                true,
            )
        }
    };
    let trunc = SeriesTruncation::default();
    let grid = default_grid(&sample, &theta, b.value, a.grid_points)?;
    let cdf = estimate_cdf(&sample, &theta, &grid, &trunc)?;
    let density = estimate_density(&sample, &theta, &b, &grid, &trunc)?;
    let centre = theta.mixture_mean();
    let mixture_grid: Vec<f64> = grid.iter().map(|x| x + centre).collect();
    let mixture = reconstructed_density(&density.curve, &theta, &mixture_grid)?;
    let files = ["cdf.tsv", "density.tsv", "mixture_density.tsv"];
    let dir = &a.output;
    write_text(Some(&dir.join(files[0])), &tsv_curve("x", "F", &cdf))?;
    write_text(
        Some(&dir.join(files[1])),
        &tsv_curve("x", "f", &density.curve),
    )?;
    write_text(Some(&dir.join(files[2])), &tsv_curve("x", "g", &mixture))?;
    let summary = CurvesSummary {
        schema_version: SCHEMA_VERSION,
        command: "curves",
        n: sample.n(),
        lambda: theta.lambda,
        mu1: theta.mu1,
        mu2: theta.mu2,
        fitted,
        bandwidth: b.value,
        grid_points: a.grid_points,
        normalization: density.normalization,
        files,
    };
    write_text(Some(&dir.join("summary.json")), &to_json(&summary))
}

#[derive(Serialize)]
struct EmOutput {
    schema_version: u32,
    command: &'static str,
    n: usize,
    lambda: f64,
    mu1: f64,
    mu2: f64,
    sigma: f64,
    loglik: f64,
    n_iters: usize,
    restarts: usize,
    converged: bool,
    monotone: bool,
}

pub fn em_baseline(a: EmArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.input)?;
    let cfg = EmConfig {
        sigma: a.sigma,
        estimate_sigma: a.estimate_sigma,
        ..EmConfig::default()
    };
    let space = ParamSpace::from_data(sample.values(), a.d, true)?;
    let [l, m1, m2] = default_starts(&space, &sample, 1)[0];
    let fit = em_fit(&sample, &cfg, GaussianParams::new(l, m1, m2)?)?;
    let out = EmOutput {
        schema_version: SCHEMA_VERSION,
        command: "em-baseline",
        n: sample.n(),
        lambda: fit.params.lambda,
        mu1: fit.params.mu1,
        mu2: fit.params.mu2,
        sigma: fit.sigma,
        loglik: fit.loglik,
        n_iters: fit.n_iters,
        restarts: fit.restarts,
        converged: fit.converged,
        monotone: fit.monotone,
    };
    finish(out.converged, a.output.as_deref(), to_json(&out))
}
