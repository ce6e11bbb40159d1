//! dbICC across a grid of soft-thresholds applied to connectivity matrices.

use rayon::prelude::*;

use crate::distances::{soft_threshold, DistanceKind, DistanceSpec};
use crate::error::{Error, Result};
use crate::estimator::{dbicc_point, DbiccEstimate};
use crate::model::{compute_distance_matrix, GroupedSample, PayloadKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub distance: DistanceKind,
    pub lambda: f64,
    /// Fraction of off-diagonal correlations set to zero, averaged over all
    /// matrices in the sample.
    pub avg_fraction_zeroed: f64,
    pub estimate: DbiccEstimate,
}

/// Parses `a:b:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Parameter(format!("grid must look like start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || step.is_nan() || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

/// One row per (distance, lambda), distances outermost.
pub fn threshold_sweep(
    sample: &GroupedSample,
    distances: &[DistanceKind],
    lambdas: &[f64],
) -> Result<Vec<SweepRow>> {
    if sample.payload_kind() == PayloadKind::Vector {
        return Err(Error::MetricMismatch(
            "threshold sweeps need matrix or time-series payloads".into(),
        ));
    }
    let corr = sample.to_correlation()?;
    let per_lambda = lambdas
        .iter()
        .map(|&lambda| {
            let fractions: Vec<f64> = corr
                .payloads()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|p| soft_threshold(p, lambda).map(|r| r.1))
                .collect::<Result<Vec<_>>>()?;
            let avg = fractions.iter().sum::<f64>() / fractions.len() as f64;
            let thresholded = corr.try_map_payloads(PayloadKind::Matrix, |p| Ok(soft_threshold(p, lambda)?.0))?;
            Ok((lambda, avg, thresholded))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(distances.len() * lambdas.len());
    for &kind in distances {
        for (lambda, avg, sample) in &per_lambda {
            let d = compute_distance_matrix(sample, &DistanceSpec::new(kind))?;
            rows.push(SweepRow {
                distance: kind,
                lambda: *lambda,
                avg_fraction_zeroed: *avg,
                estimate: dbicc_point(&d)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:0.2:0.1").unwrap().len(), 3);
        let g = parse_grid("0:1:0.25").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }
}
