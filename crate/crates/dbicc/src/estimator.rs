//! Plug-in estimation of the distance-based ICC.
//!
//! With `MSD_b` the mean squared distance between observations of different
//! individuals and `MSD_w` the mean squared distance between replicates of the
//! same individual, the estimate is `1 - MSD_w / MSD_b`. Every unordered pair
//! of observations is counted once.

use crate::error::{Error, Result};
use crate::model::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbiccEstimate {
    pub rho_hat: f64,
    pub msd_within: f64,
    pub msd_between: f64,
    pub n_within_pairs: u64,
    pub n_between_pairs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PairSums {
    pub within_sum: f64,
    pub within_pairs: u64,
    pub between_sum: f64,
    pub between_pairs: u64,
}

/// One pass over the upper triangle, row-major. The fixed order makes the
/// sums bit-reproducible.
pub(crate) fn pair_sums(d: &DistanceMatrix) -> PairSums {
    let groups = d.groups();
    let mut s = PairSums {
        within_sum: 0.0,
        within_pairs: 0,
        between_sum: 0.0,
        between_pairs: 0,
    };
    for (a, &(ga, _)) in groups.iter().enumerate() {
        for (b, &(gb, _)) in groups.iter().enumerate().skip(a + 1) {
            let v = d.get(a, b);
            if gb == ga {
                s.within_sum += v * v;
                s.within_pairs += 1;
            } else {
                s.between_sum += v * v;
                s.between_pairs += 1;
            }
        }
    }
    s
}

fn check_groups(d: &DistanceMatrix) -> Result<()> {
    if d.n_individuals() < 2 {
        return Err(Error::InsufficientGroups {
            found: d.n_individuals(),
        });
    }
    Ok(())
}

fn check_replicates(d: &DistanceMatrix) -> Result<()> {
    if d.replicate_counts().iter().all(|&j| j < 2) {
        return Err(Error::InsufficientReplicates);
    }
    Ok(())
}

pub fn msd_between(d: &DistanceMatrix) -> Result<f64> {
    check_groups(d)?;
    let s = pair_sums(d);
    Ok(s.between_sum / s.between_pairs as f64)
}

/// Individuals with a single replicate contribute nothing here.
pub fn msd_within(d: &DistanceMatrix) -> Result<f64> {
    check_replicates(d)?;
    let s = pair_sums(d);
    Ok(s.within_sum / s.within_pairs as f64)
}

pub fn dbicc_point(d: &DistanceMatrix) -> Result<DbiccEstimate> {
    check_groups(d)?;
    check_replicates(d)?;
    let s = pair_sums(d);
    let msd_between = s.between_sum / s.between_pairs as f64;
    let msd_within = s.within_sum / s.within_pairs as f64;
    if msd_between == 0.0 {
        return Err(Error::DegenerateDistances);
    }
    Ok(DbiccEstimate {
        rho_hat: 1.0 - msd_within / msd_between,
        msd_within,
        msd_between,
        n_within_pairs: s.within_pairs,
        n_between_pairs: s.between_pairs,
    })
}

/// Population dbICC `tr(S_T) / (tr(S_T) + tr(S_eps))` for Gaussian true
/// scores and errors under Euclidean distance.
pub fn population_dbicc_gaussian(trace_sigma_t: f64, trace_sigma_eps: f64) -> Result<f64> {
    if !(trace_sigma_t >= 0.0 && trace_sigma_eps >= 0.0) || trace_sigma_t + trace_sigma_eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "traces must be nonnegative with a positive sum, got {trace_sigma_t} and {trace_sigma_eps}"
        )));
    }
    Ok(trace_sigma_t / (trace_sigma_t + trace_sigma_eps))
}
