//! Individual-level bootstrap for the dbICC.
//!
//! Each replicate resamples individuals with replacement and re-reads their
//! blocks of the original distance matrix; distances are never recomputed.
//! When the same individual is drawn twice, the block pairing the two copies
//! is nominally "between" individuals but really holds within-individual
//! distances and a zero diagonal. The corrected estimator leaves such blocks
//! out of the between-individual sum.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::dbicc_point;
use crate::model::DistanceMatrix;
use crate::rng::stream_rng;

/// Below this many replicates a warning is logged.
pub const MIN_RECOMMENDED_REPLICATES: usize = 100;

/// Draws `n_individuals` indices uniformly with replacement from `0..n_individuals`.
pub fn resample_individuals<R: Rng + ?Sized>(n_individuals: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_individuals < 2 {
        return Err(Error::InsufficientGroups {
            found: n_individuals,
        });
    }
    Ok((0..n_individuals)
        .map(|_| rng.random_range(0..n_individuals))
        .collect())
}

/// Squared-distance sums per block of a distance matrix.
#[derive(Debug, Clone)]
pub struct BlockSums {
    sizes: Vec<usize>,
    /// Unordered within-individual pairs.
    within: Vec<f64>,
    /// Row-major I x I; the diagonal holds all ordered pairs of one block.
    cross: Vec<f64>,
}

impl BlockSums {
    pub fn new(d: &DistanceMatrix) -> Self {
        let n_ind = d.n_individuals();
        let sizes = d.replicate_counts();
        let mut within = vec![0.0; n_ind];
        let mut cross = vec![0.0; n_ind * n_ind];
        for a in 0..n_ind {
            let ra = d.members(a);
            for (k, &r) in ra.iter().enumerate() {
                for &s in &ra[k + 1..] {
                    let v = d.get(r, s);
                    within[a] += v * v;
                }
            }
            for b in a..n_ind {
                let mut sum = 0.0;
                for &r in ra {
                    for &s in d.members(b) {
                        let v = d.get(r, s);
                        sum += v * v;
                    }
                }
                cross[a * n_ind + b] = sum;
                cross[b * n_ind + a] = sum;
            }
        }
        BlockSums {
            sizes,
            within,
            cross,
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.sizes.len()
    }

    /// Naive and corrected estimates for one resampling `pi`.
    ///
    /// `None` marks a degenerate replicate: no within pairs, no between pairs,
    /// or a zero between-individual mean.
    pub fn replicate(&self, pi: &[usize]) -> (Option<f64>, Option<f64>) {
        let n_ind = self.n_individuals();
        let mut w_sum = 0.0;
        let mut w_n = 0u64;
        for &a in pi {
            let j = self.sizes[a] as u64;
            w_sum += self.within[a];
            w_n += j * j.saturating_sub(1) / 2;
        }
        let (mut naive_sum, mut naive_n) = (0.0, 0u64);
        let (mut corr_sum, mut corr_n) = (0.0, 0u64);
        for (k, &a) in pi.iter().enumerate() {
            for &b in &pi[k + 1..] {
                let v = self.cross[a * n_ind + b];
                let count = (self.sizes[a] * self.sizes[b]) as u64;
                naive_sum += v;
                naive_n += count;
                if a != b {
                    corr_sum += v;
                    corr_n += count;
                }
            }
        }
        let rho = |b_sum: f64, b_n: u64| {
            if w_n == 0 || b_n == 0 || b_sum == 0.0 {
                None
            } else {
                Some(1.0 - (w_sum / w_n as f64) / (b_sum / b_n as f64))
            }
        };
        (rho(naive_sum, naive_n), rho(corr_sum, corr_n))
    }
}

/// One bootstrap replicate with both estimators evaluated on the same draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateDraw {
    pub index: usize,
    pub pi: Vec<usize>,
    pub naive: Option<f64>,
    pub corrected: Option<f64>,
}

impl ReplicateDraw {
    /// True when no individual was drawn twice.
    pub fn all_distinct(&self) -> bool {
        let mut seen = vec![false; self.pi.len()];
        self.pi.iter().all(|&a| !std::mem::replace(&mut seen[a], true))
    }
}

/// Runs `b` replicates. Replicate `r` draws from stream `r` of `seed`.
pub fn bootstrap_draws(d: &DistanceMatrix, b: usize, seed: u64) -> Result<Vec<ReplicateDraw>> {
    let blocks = BlockSums::new(d);
    let n_ind = blocks.n_individuals();
    (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let pi = resample_individuals(n_ind, &mut rng)?;
            let (naive, corrected) = blocks.replicate(&pi);
            Ok(ReplicateDraw {
                index: r,
                pi,
                naive,
                corrected,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub corrected: bool,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1200,
            corrected: true,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Non-degenerate replicate estimates in replicate order.
    pub replicate_estimates: Vec<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub corrected: bool,
    pub seed: u64,
    pub replicates: usize,
    pub n_degenerate: usize,
}

impl BootstrapResult {
    pub fn from_draws(draws: &[ReplicateDraw], corrected: bool, level: f64, seed: u64) -> Result<Self> {
        let picked: Vec<Option<f64>> = draws
            .iter()
            .map(|d| if corrected { d.corrected } else { d.naive })
            .collect();
        let replicate_estimates: Vec<f64> = picked.iter().flatten().copied().collect();
        let n_degenerate = picked.len() - replicate_estimates.len();
        let (ci_low, ci_high) = percentile_ci(&replicate_estimates, level)?;
        Ok(BootstrapResult {
            replicate_estimates,
            ci_low,
            ci_high,
            level,
            corrected,
            seed,
            replicates: draws.len(),
            n_degenerate,
        })
    }

    pub fn median(&self) -> f64 {
        let mut v = self.replicate_estimates.clone();
        v.sort_by(f64::total_cmp);
        quantile_sorted(&v, 0.5)
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Bootstrap percentile interval for the dbICC.
pub fn bootstrap_dbicc(d: &DistanceMatrix, config: &BootstrapConfig) -> Result<BootstrapResult> {
    dbicc_point(d)?;
    check_level(config.level)?;
    if config.replicates == 0 {
        return Err(Error::Parameter("number of bootstrap replicates must be positive".into()));
    }
    if config.replicates < MIN_RECOMMENDED_REPLICATES {
        log::warn!(
            "only {} bootstrap replicates; percentile intervals will be unstable",
            config.replicates
        );
    }
    let draws = bootstrap_draws(d, config.replicates, config.seed)?;
    BootstrapResult::from_draws(&draws, config.corrected, config.level, config.seed)
}

/// Linear interpolation between order statistics at `h = (n - 1) q`
/// (the "type 7" convention). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central percentile interval covering `level` of the estimates.
pub fn percentile_ci(estimates: &[f64], level: f64) -> Result<(f64, f64)> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "percentile interval needs at least 2 estimates, got {}",
            estimates.len()
        )));
    }
    check_level(level)?;
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok((
        quantile_sorted(&sorted, alpha / 2.0),
        quantile_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}
