//! Distances between observations and the correlation-matrix utilities used
//! for connectivity data.
//!
//! `l2` and `l1` act entry-wise on the flattened payload, so for matrices they
//! are the Frobenius and entry-wise absolute distances rather than operator
//! norms.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Payload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    L2,
    L1,
    /// `sqrt(1 - r)` with `r` the Pearson correlation of the strictly lower
    /// triangles of two correlation matrices.
    CorrOfCorr,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::L2, DistanceKind::L1, DistanceKind::CorrOfCorr];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::L2 => "l2",
            DistanceKind::L1 => "l1",
            DistanceKind::CorrOfCorr => "corr",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(DistanceKind::L2),
            "l1" => Ok(DistanceKind::L1),
            "corr" => Ok(DistanceKind::CorrOfCorr),
            other => Err(Error::Parameter(format!("unknown distance {other:?}"))),
        }
    }
}

/// A distance plus an optional soft-threshold applied to matrix payloads first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    pub threshold: Option<f64>,
}

impl DistanceSpec {
    pub fn new(kind: DistanceKind) -> Self {
        DistanceSpec {
            kind,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        self.threshold = Some(lambda);
        Ok(self)
    }

    /// Distance between two already-prepared payloads. The threshold is not
    /// applied here.
    pub fn distance(&self, a: &Payload, b: &Payload) -> Result<f64> {
        if a.shape() != b.shape() {
            return Err(Error::InputShape(format!(
                "cannot compare {:?} with {:?}",
                a.shape(),
                b.shape()
            )));
        }
        match self.kind {
            DistanceKind::L2 => l2_distance(a.as_slice(), b.as_slice()),
            DistanceKind::L1 => l1_distance(a.as_slice(), b.as_slice()),
            DistanceKind::CorrOfCorr => corr_of_corr_distance(a, b),
        }
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InputShape(format!(
            "vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!(
            "soft-threshold must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

fn check_square(r: &Payload) -> Result<usize> {
    if !r.is_square() {
        return Err(Error::MetricMismatch(format!(
            "expected a square matrix, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    Ok(r.rows())
}

fn lower_triangle(r: &Payload) -> Vec<f64> {
    let p = r.rows();
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for i in 1..p {
        for j in 0..i {
            out.push(r.get(i, j));
        }
    }
    out
}

/// Correlation-of-correlations distance `sqrt(1 - r)`.
pub fn corr_of_corr_distance(r1: &Payload, r2: &Payload) -> Result<f64> {
    let p = check_square(r1)?;
    if check_square(r2)? != p {
        return Err(Error::InputShape(format!(
            "matrices are {p}x{p} and {0}x{0}",
            r2.rows()
        )));
    }
    if p < 3 {
        return Err(Error::DegenerateInput(format!(
            "correlation of correlations needs p >= 3, got {p}"
        )));
    }
    let x = lower_triangle(r1);
    let y = lower_triangle(r2);
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(&y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    // a constant triangle leaves only rounding noise in the sums of squares
    let flat = |v: &[f64], ss: f64| {
        let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        ss <= k * (64.0 * f64::EPSILON * scale).powi(2)
    };
    if flat(&x, sxx) || flat(&y, syy) {
        return Err(Error::DegenerateInput(
            "lower triangle has zero variance".into(),
        ));
    }
    let r = sxy / (sxx * syy).sqrt();
    // r can exceed 1 by rounding
    Ok((1.0 - r).max(0.0).sqrt())
}

/// Pearson correlation matrix of the columns of an m x p time series.
pub fn correlation_from_timeseries(x: &Payload) -> Result<Payload> {
    let (m, p) = x.shape();
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 time points, got {m}"
        )));
    }
    for c in 0..p {
        let first = x.get(0, c);
        if (1..m).all(|t| x.get(t, c) == first) {
            return Err(Error::DegenerateInput(format!("column {c} is constant")));
        }
    }
    let cov = centered_crossproduct(x);
    let sd: Vec<f64> = (0..p).map(|k| cov[(k, k)].sqrt()).collect();
    let mut data = vec![0.0; p * p];
    for k in 0..p {
        data[k * p + k] = 1.0;
        for l in (k + 1)..p {
            let r = (cov[(k, l)] / (sd[k] * sd[l])).clamp(-1.0, 1.0);
            data[k * p + l] = r;
            data[l * p + k] = r;
        }
    }
    Payload::matrix(p, p, data)
}

/// `Xc^T Xc` for the column-centered data matrix.
pub(crate) fn centered_crossproduct(x: &Payload) -> nalgebra::DMatrix<f64> {
    let mut xm = x.to_dmatrix();
    let m = xm.nrows() as f64;
    for mut col in xm.column_iter_mut() {
        let mean = col.sum() / m;
        col.add_scalar_mut(-mean);
    }
    xm.tr_mul(&xm)
}

/// Shrinks every off-diagonal entry toward zero by `lambda`.
///
/// Returns the thresholded matrix and the fraction of off-diagonal entries
/// that are exactly zero afterwards.
pub fn soft_threshold(r: &Payload, lambda: f64) -> Result<(Payload, f64)> {
    check_lambda(lambda)?;
    let p = check_square(r)?;
    let mut data = r.as_slice().to_vec();
    let mut zeros = 0usize;
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let v = data[i * p + j];
            let shrunk = v.signum() * (v.abs() - lambda).max(0.0);
            let shrunk = if shrunk == 0.0 { 0.0 } else { shrunk };
            if shrunk == 0.0 {
                zeros += 1;
            }
            data[i * p + j] = shrunk;
        }
    }
    let off = p * (p - 1);
    let fraction = if off == 0 { 0.0 } else { zeros as f64 / off as f64 };
    Ok((Payload::matrix(p, p, data)?, fraction))
}

/// Connectivity score `-log det R` via a Cholesky factorization.
pub fn connectivity_score(r: &Payload) -> Result<f64> {
    check_square(r)?;
    let chol = r.to_dmatrix().cholesky().ok_or(Error::SingularMatrix)?;
    let l = chol.l_dirty();
    let log_det: f64 = (0..l.nrows()).map(|k| 2.0 * l[(k, k)].ln()).sum();
    if !log_det.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(-log_det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat(p: usize, v: &[f64]) -> Payload {
        Payload::matrix(p, p, v.to_vec()).unwrap()
    }

    fn corr3(a: f64, b: f64, c: f64) -> Payload {
        mat(3, &[1.0, a, b, a, 1.0, c, b, c, 1.0])
    }

    /// Textbook Pearson: sum of products of deviations over the root of the
    /// product of sums of squares.
    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let mut num = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for i in 0..x.len() {
            num += (x[i] - mx) * (y[i] - my);
            dx += (x[i] - mx).powi(2);
            dy += (y[i] - my).powi(2);
        }
        num / (dx.sqrt() * dy.sqrt())
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    fn random_corr(p: usize, rng: &mut Lcg) -> Payload {
        let x = Payload::from_rows(
            &(0..30)
                .map(|_| (0..p).map(|_| rng.next()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        correlation_from_timeseries(&x).unwrap()
    }

    #[test]
    fn vector_distance_examples() {
        assert_eq!(l2_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l2_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(l1_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l1_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 7.0);
        assert_eq!(
            l2_distance(&[0.0], &[1.0, 2.0]).unwrap_err().kind_name(),
            "InputShapeError"
        );
        assert_eq!(
            l1_distance(&[0.0], &[1.0, 2.0]).unwrap_err().kind_name(),
            "InputShapeError"
        );
    }

    #[test]
    fn vector_distances_match_direct_summation() {
        let mut rng = Lcg(7);
        let a: Vec<f64> = (0..10).map(|_| rng.next() * 5.0).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.next() * 5.0).collect();
        let mut sq = 0.0;
        let mut abs = 0.0;
        for k in 0..10 {
            sq += (a[k] - b[k]) * (a[k] - b[k]);
            abs += (a[k] - b[k]).abs();
        }
        assert_relative_eq!(l2_distance(&a, &b).unwrap(), sq.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(l1_distance(&a, &b).unwrap(), abs, max_relative = 1e-14);
    }

    #[test]
    fn corr_of_corr_examples() {
        let r = corr3(0.2, 0.5, -0.3);
        assert_eq!(corr_of_corr_distance(&r, &r).unwrap(), 0.0);
        let neg = corr3(-0.2, -0.5, 0.3);
        assert_relative_eq!(corr_of_corr_distance(&r, &neg).unwrap(), 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn corr_of_corr_matches_pearson_oracle() {
        let mut rng = Lcg(99);
        let r1 = random_corr(4, &mut rng);
        let r2 = random_corr(4, &mut rng);
        let lt = |r: &Payload| vec![r.get(1, 0), r.get(2, 0), r.get(2, 1), r.get(3, 0), r.get(3, 1), r.get(3, 2)];
        let r = pearson(&lt(&r1), &lt(&r2));
        assert_relative_eq!(
            corr_of_corr_distance(&r1, &r2).unwrap(),
            (1.0 - r).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn corr_of_corr_degenerate_cases() {
        let two = mat(2, &[1.0, 0.3, 0.3, 1.0]);
        assert_eq!(
            corr_of_corr_distance(&two, &two).unwrap_err().kind_name(),
            "DegenerateInputError"
        );
        let flat = corr3(0.4, 0.4, 0.4);
        let other = corr3(0.1, 0.2, 0.3);
        assert_eq!(
            corr_of_corr_distance(&flat, &other).unwrap_err().kind_name(),
            "DegenerateInputError"
        );
        let rect = Payload::matrix(2, 3, vec![0.0; 6]).unwrap();
        assert_eq!(
            corr_of_corr_distance(&rect, &rect).unwrap_err().kind_name(),
            "MetricMismatchError"
        );
    }

    #[test]
    fn correlation_examples() {
        let x = Payload::from_rows(&[[1.0, 1.0, 3.0], [2.0, 2.0, 1.0], [4.0, 4.0, 0.0], [3.0, 3.0, 5.0]]).unwrap();
        let r = correlation_from_timeseries(&x).unwrap();
        assert_relative_eq!(r.get(0, 1), 1.0, max_relative = 1e-15);
        let y = Payload::from_rows(&[[1.0, -1.0], [2.0, -2.0], [4.0, -4.0]]).unwrap();
        let r = correlation_from_timeseries(&y).unwrap();
        assert_relative_eq!(r.get(0, 1), -1.0, max_relative = 1e-15);
        assert_eq!(r.get(0, 0), 1.0);
    }

    #[test]
    fn correlation_matches_pairwise_pearson() {
        let mut rng = Lcg(3);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.next()).collect()).collect();
        let x = Payload::from_rows(&rows).unwrap();
        let r = correlation_from_timeseries(&x).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let ck: Vec<f64> = rows.iter().map(|row| row[k]).collect();
                let cl: Vec<f64> = rows.iter().map(|row| row[l]).collect();
                assert_relative_eq!(r.get(k, l), pearson(&ck, &cl), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn correlation_errors() {
        let short = Payload::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(
            correlation_from_timeseries(&short).unwrap_err().kind_name(),
            "InsufficientDataError"
        );
        let constant = Payload::from_rows(&[[0.1, 2.0], [0.1, 1.0], [0.1, 5.0]]).unwrap();
        assert_eq!(
            correlation_from_timeseries(&constant).unwrap_err().kind_name(),
            "DegenerateInputError"
        );
    }

    #[test]
    fn soft_threshold_examples() {
        let r = corr3(0.5, 0.0, -0.1);
        let (same, frac) = soft_threshold(&r, 0.0).unwrap();
        assert_eq!(same, r);
        assert_relative_eq!(frac, 2.0 / 6.0);

        let (t, _) = soft_threshold(&r, 0.2).unwrap();
        assert_relative_eq!(t.get(0, 1), 0.3, epsilon = 1e-15);
        assert_eq!(t.get(1, 2), 0.0);
        assert_eq!(t.get(0, 0), 1.0);

        let (z, frac) = soft_threshold(&r, 0.5).unwrap();
        assert!(z.get(0, 1) == 0.0 && z.get(2, 1) == 0.0);
        assert_eq!(frac, 1.0);

        assert_eq!(soft_threshold(&r, 1.5).unwrap_err().kind_name(), "ParameterError");
        assert_eq!(soft_threshold(&r, -0.1).unwrap_err().kind_name(), "ParameterError");
    }

    #[test]
    fn connectivity_score_examples() {
        let id = mat(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(connectivity_score(&id).unwrap(), 0.0);
        let r = mat(2, &[1.0, 0.6, 0.6, 1.0]);
        assert_relative_eq!(connectivity_score(&r).unwrap(), -(0.64f64).ln(), max_relative = 1e-14);
        assert_relative_eq!(connectivity_score(&r).unwrap(), 0.4463, epsilon = 1e-4);
        let singular = mat(2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(connectivity_score(&singular).unwrap_err(), Error::SingularMatrix);
    }

    #[test]
    fn connectivity_score_matches_eigenvalue_sum() {
        let mut rng = Lcg(11);
        let r = random_corr(6, &mut rng);
        let eig = nalgebra::SymmetricEigen::new(r.to_dmatrix());
        let oracle: f64 = -eig.eigenvalues.iter().map(|v| v.ln()).sum::<f64>();
        assert_relative_eq!(connectivity_score(&r).unwrap(), oracle, max_relative = 1e-10);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0..10.0f64, n)
    }

    fn corr_strategy(p: usize) -> impl Strategy<Value = Payload> {
        proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, p), 12)
            .prop_filter_map("non-constant columns", |rows| {
                correlation_from_timeseries(&Payload::from_rows(&rows).ok()?).ok()
            })
    }

    proptest! {
        #[test]
        fn vector_metrics_are_metrics(a in vec_strategy(6), b in vec_strategy(6), c in vec_strategy(6)) {
            for f in [l2_distance, l1_distance] {
                let ab = f(&a, &b).unwrap();
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab, f(&b, &a).unwrap());
                prop_assert_eq!(f(&a, &a).unwrap(), 0.0);
                let ac = f(&a, &c).unwrap();
                let cb = f(&c, &b).unwrap();
                prop_assert!(ab <= ac + cb + 1e-9);
            }
        }

        #[test]
        fn corr_of_corr_is_symmetric_and_bounded(r1 in corr_strategy(4), r2 in corr_strategy(4)) {
            let d = corr_of_corr_distance(&r1, &r2).unwrap();
            prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&d));
            prop_assert_eq!(d, corr_of_corr_distance(&r2, &r1).unwrap());
            prop_assert!(corr_of_corr_distance(&r1, &r1).unwrap() < 1e-7);
        }

        #[test]
        fn soft_threshold_semigroup(r in corr_strategy(5), l1 in 0.0..0.5f64, l2 in 0.0..0.5f64) {
            let (once, _) = soft_threshold(&r, l1 + l2).unwrap();
            let (a, _) = soft_threshold(&r, l1).unwrap();
            let (twice, _) = soft_threshold(&a, l2).unwrap();
            for (x, y) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn soft_threshold_shrinks_monotonically(r in corr_strategy(5), l1 in 0.0..1.0f64, l2 in 0.0..1.0f64) {
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let (a, fa) = soft_threshold(&r, lo).unwrap();
            let (_, fb) = soft_threshold(&r, hi).unwrap();
            prop_assert!(fa <= fb);
            for (x, y) in a.as_slice().iter().zip(r.as_slice()) {
                prop_assert!(x.abs() <= y.abs());
            }
        }

        #[test]
        fn correlation_output_is_valid(r in corr_strategy(4)) {
            for k in 0..4 {
                prop_assert_eq!(r.get(k, k), 1.0);
                for l in 0..4 {
                    prop_assert_eq!(r.get(k, l), r.get(l, k));
                    prop_assert!(r.get(k, l).abs() <= 1.0);
                }
            }
        }
    }
}
