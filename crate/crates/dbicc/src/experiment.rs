//! Monte Carlo experiment runners.
//!
//! Seeds are split per (outer replicate, intensity, individual, replicate) with
//! [`derive_seed`], so every runner gives the same answer for any thread count.

use rayon::prelude::*;

use crate::bootstrap::{bootstrap_draws, BootstrapResult};
use crate::distances::{DistanceKind, DistanceSpec};
use crate::error::{Error, Result};
use crate::estimator::dbicc_point;
use crate::model::{compute_distance_matrix, GroupedSample, IndividualRecord, PayloadKind};
use crate::rng::{derive_seed, stream_rng};
use crate::simulation::{
    gen_gaussian_sample, wishart_correlation_population, ConnectivityPopulation, MatrixEstimate,
    TrueScorePopulation,
};
use crate::spearman_brown::{build_sb_curve, SbCurve, SbOffset};

const TAG_DATA: u64 = 0;
const TAG_BOOT: u64 = 1;
const TAG_POPULATION: u64 = 2;

/// Seed of the data set simulated for outer replicate `r`.
pub fn data_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, &[r as u64, TAG_DATA])
}

/// Seed of the bootstrap run on outer replicate `r`.
pub fn boot_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, &[r as u64, TAG_BOOT])
}

/// Gaussian true-score design: scores `N(0, I_p)`, errors `N(0, c I_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDesign {
    pub rho: f64,
    pub individuals: usize,
    pub replicates: usize,
    pub dim: usize,
}

impl GaussianDesign {
    pub fn new(rho: f64, individuals: usize, replicates: usize) -> Self {
        GaussianDesign {
            rho,
            individuals,
            replicates,
            dim: 2,
        }
    }

    pub fn population(&self) -> Result<TrueScorePopulation> {
        TrueScorePopulation::with_reliability(self.dim, self.rho, self.individuals, self.replicates)
    }

    /// Euclidean distance matrix of one simulated data set.
    pub fn simulate(&self, seed: u64) -> Result<crate::model::DistanceMatrix> {
        let sample = gen_gaussian_sample(&self.population()?, &mut stream_rng(seed, 0))?;
        compute_distance_matrix(&sample, &DistanceSpec::new(DistanceKind::L2))
    }
}

/// Point estimates from `reps` independent data sets.
pub fn point_estimate_study(design: &GaussianDesign, reps: usize, seed: u64) -> Result<Vec<f64>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let d = design.simulate(data_seed(seed, r))?;
            Ok(dbicc_point(&d)?.rho_hat)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageConfig {
    pub design: GaussianDesign,
    pub boot: usize,
    pub level: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Outcome of one simulated data set: both intervals come from the same
/// bootstrap draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReplicate {
    pub rho_hat: f64,
    pub naive_ci: (f64, f64),
    pub corrected_ci: (f64, f64),
    pub naive_median: f64,
    pub corrected_median: f64,
    pub n_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub truth: f64,
    pub replicates: Vec<CoverageReplicate>,
    /// Percent of naive intervals containing the truth.
    pub naive_coverage: f64,
    pub corrected_coverage: f64,
}

pub fn coverage_study(cfg: &CoverageConfig) -> Result<CoverageReport> {
    let truth = cfg.design.population()?.population_rho();
    let replicates = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let d = cfg.design.simulate(data_seed(cfg.seed, r))?;
            let rho_hat = dbicc_point(&d)?.rho_hat;
            let boot_seed = boot_seed(cfg.seed, r);
            let draws = bootstrap_draws(&d, cfg.boot, boot_seed)?;
            let naive = BootstrapResult::from_draws(&draws, false, cfg.level, boot_seed)?;
            let corrected = BootstrapResult::from_draws(&draws, true, cfg.level, boot_seed)?;
            Ok(CoverageReplicate {
                rho_hat,
                naive_ci: (naive.ci_low, naive.ci_high),
                corrected_ci: (corrected.ci_low, corrected.ci_high),
                naive_median: naive.median(),
                corrected_median: corrected.median(),
                n_degenerate: corrected.n_degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pct = |f: &dyn Fn(&CoverageReplicate) -> (f64, f64)| {
        let hits = replicates
            .iter()
            .filter(|r| {
                let (lo, hi) = f(r);
                lo <= truth && truth <= hi
            })
            .count();
        100.0 * hits as f64 / replicates.len() as f64
    };
    Ok(CoverageReport {
        truth,
        naive_coverage: pct(&|r| r.naive_ci),
        corrected_coverage: pct(&|r| r.corrected_ci),
        replicates,
    })
}

/// `count` integers approximately equally spaced on the log scale between
/// `lo` and `hi` inclusive.
pub fn log_spaced_grid(lo: usize, hi: usize, count: usize) -> Result<Vec<usize>> {
    if count < 2 || lo < 1 || hi <= lo {
        return Err(Error::Parameter(format!(
            "cannot build {count} log-spaced values in [{lo}, {hi}]"
        )));
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let grid: Vec<usize> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!(
            "[{lo}, {hi}] is too narrow for {count} distinct values"
        )));
    }
    Ok(grid)
}

/// Eight intensities from 25 to 197.
pub fn default_m_grid() -> Vec<usize> {
    log_spaced_grid(25, 197, 8).expect("valid grid")
}

/// Reliability-versus-intensity experiment on simulated connectivity
/// matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SbStudyConfig {
    pub individuals: usize,
    pub replicates: usize,
    pub p: usize,
    /// Wishart degrees of freedom of the covariance population.
    pub df: usize,
    pub m_grid: Vec<usize>,
    pub phi: f64,
    pub matrix: MatrixEstimate,
    pub distance: DistanceKind,
    pub offset: SbOffset,
    pub curves: usize,
    pub seed: u64,
}

impl Default for SbStudyConfig {
    fn default() -> Self {
        SbStudyConfig {
            individuals: 25,
            replicates: 2,
            p: 40,
            df: 100,
            m_grid: default_m_grid(),
            phi: 0.0,
            matrix: MatrixEstimate::Covariance,
            distance: DistanceKind::L2,
            offset: SbOffset::One,
            curves: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbStudyReport {
    pub curves: Vec<SbCurve>,
    pub mean_slope: f64,
    pub slope_sd: f64,
    pub mean_intercept: f64,
}

/// dbICC of one simulated data set at intensity `m`.
fn connectivity_estimate(
    pop: &ConnectivityPopulation,
    cfg: &SbStudyConfig,
    seed: u64,
) -> Result<f64> {
    let individuals = (0..pop.n_individuals())
        .into_par_iter()
        .map(|i| {
            let replicates = (0..cfg.replicates)
                .map(|j| {
                    let mut rng = stream_rng(derive_seed(seed, &[i as u64, j as u64]), 0);
                    cfg.matrix.apply(&pop.series(i, &mut rng)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(IndividualRecord::new((i + 1).to_string(), replicates))
        })
        .collect::<Result<Vec<_>>>()?;
    let sample = GroupedSample::new(PayloadKind::Matrix, individuals)?;
    let d = compute_distance_matrix(&sample, &DistanceSpec::new(cfg.distance))?;
    Ok(dbicc_point(&d)?.rho_hat)
}

/// Covariance population shared by all intensities of one curve.
pub fn sb_population(cfg: &SbStudyConfig, curve: usize) -> Result<Vec<nalgebra::DMatrix<f64>>> {
    let mut rng = stream_rng(derive_seed(cfg.seed, &[curve as u64, TAG_POPULATION]), 0);
    wishart_correlation_population(cfg.p, cfg.individuals, cfg.df, &mut rng)
}

pub fn sb_study(cfg: &SbStudyConfig) -> Result<SbStudyReport> {
    if cfg.curves == 0 {
        return Err(Error::Parameter("need at least one curve".into()));
    }
    let off = cfg.offset.value() as usize;
    if let Some(m) = cfg.m_grid.iter().find(|&&m| m <= off.max(2)) {
        return Err(Error::Parameter(format!("intensity {m} is too small")));
    }
    let curves = (0..cfg.curves)
        .map(|c| {
            let base = ConnectivityPopulation::new(sb_population(cfg, c)?, cfg.m_grid[0], cfg.phi)?;
            let estimates = cfg
                .m_grid
                .par_iter()
                .enumerate()
                .map(|(k, &m)| {
                    let seed = derive_seed(cfg.seed, &[c as u64, TAG_DATA, k as u64]);
                    Ok((m as u32, connectivity_estimate(&base.with_intensity(m), cfg, seed)?))
                })
                .collect::<Result<Vec<_>>>()?;
            build_sb_curve(&estimates, cfg.offset)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = curves.len() as f64;
    let mean_slope = curves.iter().map(|c| c.fit.slope).sum::<f64>() / n;
    let mean_intercept = curves.iter().map(|c| c.fit.intercept).sum::<f64>() / n;
    let slope_sd = if curves.len() > 1 {
        (curves.iter().map(|c| (c.fit.slope - mean_slope).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SbStudyReport {
        curves,
        mean_slope,
        slope_sd,
        mean_intercept,
    })
}
