use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dbicc::bootstrap::{bootstrap_draws, MIN_RECOMMENDED_REPLICATES};
use dbicc::experiment::{
    coverage_study, data_seed, default_m_grid, point_estimate_study, sb_study, CoverageConfig,
    GaussianDesign, SbStudyConfig,
};
use dbicc::simulation::MatrixEstimate;
use dbicc::sweep::{parse_grid, threshold_sweep};
use dbicc::{
    bootstrap_dbicc, compute_distance_matrix, dbicc_point, BootstrapConfig, DbiccEstimate, DistanceKind,
    DistanceMatrix, DistanceSpec, SbOffset,
};
use serde::Serialize;

use crate::input::{read_input, Input};
use crate::output::{csv_opt, format_g17, nums, Num};
use crate::{BootstrapArgs, Cli, CliError, Command, EstimateArgs, Experiment, MatrixArg, SimulateArgs, SweepArgs};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| dispatch(&cli.command)),
        None => dispatch(&cli.command),
    }
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Estimate(args) => {
            let json = cmd_estimate(args)?;
            emit(args.input.out.as_deref(), &json)
        }
        Command::Bootstrap(args) => {
            let json = cmd_bootstrap(args)?;
            emit(args.estimate.input.out.as_deref(), &json)
        }
        Command::SweepThreshold(args) => {
            let csv = cmd_sweep_threshold(args)?;
            emit(args.input.out.as_deref(), &csv)
        }
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn distance_spec(args: &EstimateArgs) -> Result<DistanceSpec, CliError> {
    let spec = DistanceSpec::new(args.distance.into());
    match args.threshold {
        Some(l) if !(0.0..=1.0).contains(&l) => {
            Err(CliError::Config(format!("--threshold must lie in [0, 1], got {l}")))
        }
        Some(l) => Ok(spec.with_threshold(l)?),
        None => Ok(spec),
    }
}

/// Loads the input and produces the distance matrix the estimate is based on.
pub(crate) fn load_distances(args: &EstimateArgs) -> Result<DistanceMatrix, CliError> {
    let spec = distance_spec(args)?;
    let input = read_input(&args.input.input, args.input.groups.as_deref(), args.input.format)?;
    match input {
        Input::Sample(sample) => Ok(compute_distance_matrix(&sample, &spec)?),
        Input::Distances(d) => {
            if spec.threshold.is_some() {
                return Err(CliError::Config(
                    "--threshold cannot be applied to a precomputed distance matrix".into(),
                ));
            }
            Ok(d)
        }
    }
}

#[derive(Serialize)]
struct EstimateJson {
    rho_hat: Num,
    msd_within: Num,
    msd_between: Num,
    n_within_pairs: u64,
    n_between_pairs: u64,
    n_individuals: usize,
    n_observations: usize,
    distance: &'static str,
    threshold: Option<Num>,
}

fn estimate_json(est: &DbiccEstimate, d: &DistanceMatrix, args: &EstimateArgs) -> EstimateJson {
    EstimateJson {
        rho_hat: Num(est.rho_hat),
        msd_within: Num(est.msd_within),
        msd_between: Num(est.msd_between),
        n_within_pairs: est.n_within_pairs,
        n_between_pairs: est.n_between_pairs,
        n_individuals: d.n_individuals(),
        n_observations: d.n(),
        distance: DistanceKind::from(args.distance).name(),
        threshold: args.threshold.map(Num),
    }
}

pub(crate) fn cmd_estimate(args: &EstimateArgs) -> Result<String, CliError> {
    let d = load_distances(args)?;
    let est = dbicc_point(&d)?;
    Ok(to_json(&estimate_json(&est, &d, args)))
}

#[derive(Serialize)]
struct BootstrapJson {
    #[serde(flatten)]
    estimate: EstimateJson,
    ci_low: Num,
    ci_high: Num,
    level: Num,
    #[serde(rename = "B")]
    b: usize,
    corrected: bool,
    seed: u64,
    n_degenerate: usize,
}

pub(crate) fn cmd_bootstrap(args: &BootstrapArgs) -> Result<String, CliError> {
    if args.boot == 0 {
        return Err(CliError::Config("--boot must be positive".into()));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Config(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    if args.boot < MIN_RECOMMENDED_REPLICATES {
        eprintln!(
            "warning: only {} bootstrap replicates; intervals will be unstable",
            args.boot
        );
    }
    let d = load_distances(&args.estimate)?;
    let est = dbicc_point(&d)?;
    let cfg = BootstrapConfig {
        replicates: args.boot,
        corrected: !args.naive,
        level: args.level,
        seed: args.seed,
    };
    let res = bootstrap_dbicc(&d, &cfg)?;
    if let Some(path) = &args.replicate_log {
        let draws = bootstrap_draws(&d, args.boot, args.seed)?;
        let mut log = String::from("replicate,all_distinct,naive,corrected\n");
        for draw in &draws {
            let _ = writeln!(
                log,
                "{},{},{},{}",
                draw.index,
                draw.all_distinct(),
                csv_opt(draw.naive),
                csv_opt(draw.corrected)
            );
        }
        emit(Some(path), &log)?;
    }
    Ok(to_json(&BootstrapJson {
        estimate: estimate_json(&est, &d, &args.estimate),
        ci_low: Num(res.ci_low),
        ci_high: Num(res.ci_high),
        level: Num(res.level),
        b: res.replicates,
        corrected: res.corrected,
        seed: res.seed,
        n_degenerate: res.n_degenerate,
    }))
}

pub(crate) fn cmd_sweep_threshold(args: &SweepArgs) -> Result<String, CliError> {
    let grid = parse_grid(&args.threshold_grid).map_err(|e| CliError::Config(e.to_string()))?;
    if grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(CliError::Config("threshold grid must lie in [0, 1]".into()));
    }
    let sample = match read_input(&args.input.input, args.input.groups.as_deref(), args.input.format)? {
        Input::Sample(s) => s,
        Input::Distances(_) => {
            return Err(CliError::Config(
                "threshold sweeps need time-series or matrix input, not distances".into(),
            ))
        }
    };
    let kinds: Vec<DistanceKind> = args.distance.iter().map(|&d| d.into()).collect();
    let rows = threshold_sweep(&sample, &kinds, &grid)?;
    let mut csv = String::from("distance,lambda,avg_fraction_zeroed,rho_hat\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.distance,
            format_g17(r.lambda),
            format_g17(r.avg_fraction_zeroed),
            format_g17(r.estimate.rho_hat)
        );
    }
    Ok(csv)
}

#[derive(Serialize)]
struct PointJson {
    experiment: &'static str,
    rho: Num,
    individuals: usize,
    replicates: usize,
    reps: usize,
    seed: u64,
    replicate_seeds: Vec<u64>,
    mean: Num,
    sd: Num,
    estimates: Vec<Num>,
}

#[derive(Serialize)]
struct CoverageReplicateJson {
    data_seed: u64,
    rho_hat: Num,
    naive_ci: [Num; 2],
    corrected_ci: [Num; 2],
    naive_median: Num,
    corrected_median: Num,
    n_degenerate: usize,
}

#[derive(Serialize)]
struct CoverageJson {
    experiment: &'static str,
    rho: Num,
    individuals: usize,
    replicates: usize,
    #[serde(rename = "B")]
    b: usize,
    level: Num,
    reps: usize,
    seed: u64,
    naive_coverage: Num,
    corrected_coverage: Num,
    mean_rho_hat: Num,
    outer_replicates: Vec<CoverageReplicateJson>,
}

#[derive(Serialize)]
struct SbPointJson {
    m: u32,
    rho_hat: Num,
    x: Num,
    y: Num,
}

#[derive(Serialize)]
struct SbCurveJson {
    curve: usize,
    slope: Num,
    intercept: Num,
    slope_se: Num,
    intercept_se: Num,
    points: Vec<SbPointJson>,
    excluded: Vec<(u32, Num)>,
}

#[derive(Serialize)]
struct SbJson {
    experiment: &'static str,
    individuals: usize,
    replicates: usize,
    p: usize,
    df: usize,
    phi: Num,
    matrix: &'static str,
    distance: &'static str,
    sb_offset: u32,
    m_grid: Vec<usize>,
    curves_requested: usize,
    seed: u64,
    mean_slope: Num,
    slope_sd: Num,
    mean_intercept: Num,
    curves: Vec<SbCurveJson>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn gaussian_design(args: &SimulateArgs) -> Result<GaussianDesign, CliError> {
    if !(args.rho > 0.0 && args.rho < 1.0) {
        return Err(CliError::Config(format!("--rho must lie in (0, 1), got {}", args.rho)));
    }
    Ok(GaussianDesign::new(
        args.rho,
        args.individuals.unwrap_or(40),
        args.replicates.unwrap_or(4),
    ))
}

pub(crate) fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::Config("--reps must be positive".into()));
    }
    let (json, csv) = match args.experiment {
        Experiment::Point => {
            let design = gaussian_design(args)?;
            let est = point_estimate_study(&design, args.reps, args.seed)?;
            let (mean, sd) = mean_sd(&est);
            let mut csv = String::from("replicate,rho_hat\n");
            for (r, v) in est.iter().enumerate() {
                let _ = writeln!(csv, "{r},{}", format_g17(*v));
            }
            let json = to_json(&PointJson {
                experiment: "point",
                rho: Num(design.rho),
                individuals: design.individuals,
                replicates: design.replicates,
                reps: args.reps,
                seed: args.seed,
                replicate_seeds: (0..args.reps).map(|r| data_seed(args.seed, r)).collect(),
                mean: Num(mean),
                sd: Num(sd),
                estimates: nums(&est),
            });
            (json, csv)
        }
        Experiment::Coverage => {
            if !(args.level > 0.0 && args.level < 1.0) {
                return Err(CliError::Config(format!("--level must lie in (0, 1), got {}", args.level)));
            }
            if args.boot < 2 {
                return Err(CliError::Config("--boot must be at least 2".into()));
            }
            let design = gaussian_design(args)?;
            let report = coverage_study(&CoverageConfig {
                design,
                boot: args.boot,
                level: args.level,
                reps: args.reps,
                seed: args.seed,
            })?;
            let mut csv = String::from(
                "replicate,rho_hat,naive_low,naive_high,corrected_low,corrected_high,naive_median,corrected_median\n",
            );
            for (r, x) in report.replicates.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{r},{},{},{},{},{},{},{}",
                    format_g17(x.rho_hat),
                    format_g17(x.naive_ci.0),
                    format_g17(x.naive_ci.1),
                    format_g17(x.corrected_ci.0),
                    format_g17(x.corrected_ci.1),
                    format_g17(x.naive_median),
                    format_g17(x.corrected_median)
                );
            }
            let est: Vec<f64> = report.replicates.iter().map(|r| r.rho_hat).collect();
            let json = to_json(&CoverageJson {
                experiment: "coverage",
                rho: Num(design.rho),
                individuals: design.individuals,
                replicates: design.replicates,
                b: args.boot,
                level: Num(args.level),
                reps: args.reps,
                seed: args.seed,
                naive_coverage: Num(report.naive_coverage),
                corrected_coverage: Num(report.corrected_coverage),
                mean_rho_hat: Num(mean_sd(&est).0),
                outer_replicates: report
                    .replicates
                    .iter()
                    .enumerate()
                    .map(|(r, x)| CoverageReplicateJson {
                        data_seed: data_seed(args.seed, r),
                        rho_hat: Num(x.rho_hat),
                        naive_ci: [Num(x.naive_ci.0), Num(x.naive_ci.1)],
                        corrected_ci: [Num(x.corrected_ci.0), Num(x.corrected_ci.1)],
                        naive_median: Num(x.naive_median),
                        corrected_median: Num(x.corrected_median),
                        n_degenerate: x.n_degenerate,
                    })
                    .collect(),
            });
            (json, csv)
        }
        Experiment::Sb => {
            if !(0.0..1.0).contains(&args.phi) {
                return Err(CliError::Config(format!("--phi must lie in [0, 1), got {}", args.phi)));
            }
            let offset = SbOffset::from_value(args.sb_offset).map_err(|e| CliError::Config(e.to_string()))?;
            let cfg = SbStudyConfig {
                individuals: args.individuals.unwrap_or(25),
                replicates: args.replicates.unwrap_or(2),
                p: args.p,
                df: args.df,
                m_grid: args.m_grid.clone().unwrap_or_else(default_m_grid),
                phi: args.phi,
                matrix: match args.matrix {
                    MatrixArg::Cov => MatrixEstimate::Covariance,
                    MatrixArg::Corr => MatrixEstimate::Correlation,
                },
                distance: args.distance.into(),
                offset,
                curves: args.curves,
                seed: args.seed,
            };
            let report = sb_study(&cfg)?;
            let mut csv = String::from("curve,m,rho_hat,x,y\n");
            for (c, curve) in report.curves.iter().enumerate() {
                for p in &curve.points {
                    let _ = writeln!(
                        csv,
                        "{c},{},{},{},{}",
                        p.m,
                        format_g17(p.rho_hat),
                        format_g17(p.x),
                        format_g17(p.y)
                    );
                }
            }
            let json = to_json(&SbJson {
                experiment: "sb",
                individuals: cfg.individuals,
                replicates: cfg.replicates,
                p: cfg.p,
                df: cfg.df,
                phi: Num(cfg.phi),
                matrix: cfg.matrix.name(),
                distance: cfg.distance.name(),
                sb_offset: offset.value(),
                m_grid: cfg.m_grid.clone(),
                curves_requested: cfg.curves,
                seed: cfg.seed,
                mean_slope: Num(report.mean_slope),
                slope_sd: Num(report.slope_sd),
                mean_intercept: Num(report.mean_intercept),
                curves: report
                    .curves
                    .iter()
                    .enumerate()
                    .map(|(c, curve)| SbCurveJson {
                        curve: c,
                        slope: Num(curve.fit.slope),
                        intercept: Num(curve.fit.intercept),
                        slope_se: Num(curve.fit.slope_se),
                        intercept_se: Num(curve.fit.intercept_se),
                        points: curve
                            .points
                            .iter()
                            .map(|p| SbPointJson {
                                m: p.m,
                                rho_hat: Num(p.rho_hat),
                                x: Num(p.x),
                                y: Num(p.y),
                            })
                            .collect(),
                        excluded: curve.excluded.iter().map(|&(m, r)| (m, Num(r))).collect(),
                    })
                    .collect(),
            });
            (json, csv)
        }
    };
    if let Some(path) = &args.csv {
        emit(Some(path), &csv)?;
    }
    emit(args.out.as_deref(), &json)
}
