//! Grouped repeated-measures data and grouped distance matrices.
//!
//! Observations are indexed by (individual, replicate). The layout fixed here,
//! individuals in order of first appearance and replicates ordered within each
//! individual, is the block structure every estimator relies on.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::distances::{correlation_from_timeseries, soft_threshold, DistanceKind, DistanceSpec};
use crate::error::{Error, Result};

/// A dense real array stored row-major.
///
/// Vectors are stored as a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Payload {
    pub fn vector(data: Vec<f64>) -> Self {
        Payload {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::InputShape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Payload { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (k, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InputShape(format!(
                    "row {k} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Payload {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m[(r, c)]);
            }
        }
        Payload { rows, cols, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    /// One feature vector per observation.
    Vector,
    /// A square matrix per observation (covariance, correlation).
    Matrix,
    /// An m x p time series per observation; rows are time points.
    TimeSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualRecord {
    pub id: String,
    pub replicates: Vec<Payload>,
}

impl IndividualRecord {
    pub fn new(id: impl Into<String>, replicates: Vec<Payload>) -> Self {
        IndividualRecord {
            id: id.into(),
            replicates,
        }
    }
}

/// Repeated observations of several individuals.
///
/// Construction checks that there are at least two individuals, that at least
/// one of them was observed twice, and that every payload has the same shape
/// and only finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    individuals: Vec<IndividualRecord>,
    kind: PayloadKind,
    shape: (usize, usize),
}

impl GroupedSample {
    pub fn new(kind: PayloadKind, individuals: Vec<IndividualRecord>) -> Result<Self> {
        let mut shape = None;
        for ind in &individuals {
            if ind.replicates.is_empty() {
                return Err(Error::InputShape(format!(
                    "individual {:?} has no replicates",
                    ind.id
                )));
            }
            for p in &ind.replicates {
                if !p.is_finite() {
                    return Err(Error::NonFinite {
                        individual: ind.id.clone(),
                    });
                }
                match shape {
                    None => shape = Some(p.shape()),
                    Some(s) if s != p.shape() => {
                        return Err(Error::InputShape(format!(
                            "payload of individual {:?} is {}x{}, expected {}x{}",
                            ind.id,
                            p.rows(),
                            p.cols(),
                            s.0,
                            s.1
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        if individuals.len() < 2 {
            return Err(Error::InsufficientGroups {
                found: individuals.len(),
            });
        }
        let shape = shape.expect("at least two non-empty individuals");
        match kind {
            PayloadKind::Vector if shape.0 != 1 => {
                return Err(Error::InputShape(format!(
                    "vector payloads must have one row, got {}",
                    shape.0
                )))
            }
            PayloadKind::Matrix if shape.0 != shape.1 => {
                return Err(Error::InputShape(format!(
                    "matrix payloads must be square, got {}x{}",
                    shape.0, shape.1
                )))
            }
            _ => {}
        }
        if shape.0 * shape.1 == 0 {
            return Err(Error::InputShape("payloads are empty".into()));
        }
        if individuals.iter().all(|ind| ind.replicates.len() < 2) {
            return Err(Error::InsufficientReplicates);
        }
        Ok(GroupedSample {
            individuals,
            kind,
            shape,
        })
    }

    pub fn individuals(&self) -> &[IndividualRecord] {
        &self.individuals
    }

    pub fn payload_kind(&self) -> PayloadKind {
        self.kind
    }

    /// Shape shared by all payloads.
    pub fn payload_shape(&self) -> (usize, usize) {
        self.shape
    }

    /// `p` for vectors and matrices, the number of columns for time series.
    pub fn feature_dim(&self) -> usize {
        self.shape.1
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn replicate_counts(&self) -> Vec<usize> {
        self.individuals.iter().map(|i| i.replicates.len()).collect()
    }

    /// Total number of observations.
    pub fn n_observations(&self) -> usize {
        self.individuals.iter().map(|i| i.replicates.len()).sum()
    }

    /// Payloads in group order.
    pub fn payloads(&self) -> impl Iterator<Item = &Payload> {
        self.individuals.iter().flat_map(|i| i.replicates.iter())
    }

    /// (individual, replicate) for every payload in group order.
    pub fn group_layout(&self) -> Vec<(usize, usize)> {
        self.individuals
            .iter()
            .enumerate()
            .flat_map(|(i, ind)| (0..ind.replicates.len()).map(move |j| (i, j)))
            .collect()
    }

    /// Applies `f` to every payload, keeping ids and layout.
    pub fn try_map_payloads<F>(&self, kind: PayloadKind, f: F) -> Result<GroupedSample>
    where
        F: Fn(&Payload) -> Result<Payload> + Sync,
    {
        let individuals = self
            .individuals
            .par_iter()
            .map(|ind| {
                let replicates = ind.replicates.iter().map(&f).collect::<Result<Vec<_>>>()?;
                Ok(IndividualRecord {
                    id: ind.id.clone(),
                    replicates,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GroupedSample::new(kind, individuals)
    }

    /// Replaces every time series by its Pearson correlation matrix.
    ///
    /// Vector and matrix samples are returned unchanged.
    pub fn to_correlation(&self) -> Result<GroupedSample> {
        match self.kind {
            PayloadKind::TimeSeries => {
                self.try_map_payloads(PayloadKind::Matrix, correlation_from_timeseries)
            }
            _ => Ok(self.clone()),
        }
    }
}

/// One input row: an observation of one individual.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub individual: String,
    pub replicate: String,
    pub payload: Payload,
}

fn compare_replicate_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Groups tabular observations by individual.
///
/// Individuals keep the order in which they first appear. Replicates are sorted
/// by id, numerically when both ids are integers.
pub fn build_grouped_sample(
    kind: PayloadKind,
    rows: impl IntoIterator<Item = Observation>,
) -> Result<GroupedSample> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<(String, Payload)>> = HashMap::new();
    for obs in rows {
        let entry = by_id.entry(obs.individual.clone()).or_insert_with(|| {
            order.push(obs.individual.clone());
            Vec::new()
        });
        if entry.iter().any(|(r, _)| *r == obs.replicate) {
            return Err(Error::DuplicateObservation {
                individual: obs.individual,
                replicate: obs.replicate,
            });
        }
        entry.push((obs.replicate, obs.payload));
    }
    let individuals = order
        .into_iter()
        .map(|id| {
            let mut reps = by_id.remove(&id).unwrap_or_default();
            reps.sort_by(|a, b| compare_replicate_ids(&a.0, &b.0));
            IndividualRecord {
                id,
                replicates: reps.into_iter().map(|(_, p)| p).collect(),
            }
        })
        .collect();
    GroupedSample::new(kind, individuals)
}

/// Symmetric dissimilarity matrix whose rows are labelled by
/// (individual, replicate).
///
/// Rows of one individual need not be contiguous. The triangle inequality is
/// not required.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    groups: Vec<(usize, usize)>,
    members: Vec<Vec<usize>>,
}

const SYMMETRY_TOL: f64 = 1e-9;

impl DistanceMatrix {
    /// `values` is the full n x n matrix in row-major order.
    pub fn new(values: Vec<f64>, groups: Vec<(usize, usize)>) -> Result<Self> {
        let n = groups.len();
        if values.len() != n * n {
            return Err(Error::InvalidDistanceMatrix(format!(
                "{} group labels need {} entries, got {}",
                n,
                n * n,
                values.len()
            )));
        }
        for a in 0..n {
            let d = values[a * n + a];
            if d != 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!(
                    "diagonal entry {a} is {d}, expected 0"
                )));
            }
            for b in (a + 1)..n {
                let x = values[a * n + b];
                let y = values[b * n + a];
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "entry ({a}, {b}) is not finite"
                    )));
                }
                if x < 0.0 || y < 0.0 {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "entry ({a}, {b}) is negative"
                    )));
                }
                if (x - y).abs() > SYMMETRY_TOL * (1.0 + x.abs().max(y.abs())) {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "not symmetric at ({a}, {b}): {x} vs {y}"
                    )));
                }
            }
        }
        let n_individuals = groups.iter().map(|g| g.0 + 1).max().unwrap_or(0);
        let mut slots: Vec<Vec<Option<usize>>> = vec![Vec::new(); n_individuals];
        for (row, &(i, j)) in groups.iter().enumerate() {
            let s = &mut slots[i];
            if s.len() <= j {
                s.resize(j + 1, None);
            }
            if s[j].replace(row).is_some() {
                return Err(Error::InvalidDistanceMatrix(format!(
                    "individual {i} replicate {j} appears twice"
                )));
            }
        }
        let mut members = Vec::with_capacity(n_individuals);
        for (i, s) in slots.into_iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidDistanceMatrix(format!(
                    "individual index {i} has no rows"
                )));
            }
            let rows = s
                .into_iter()
                .enumerate()
                .map(|(j, r)| {
                    r.ok_or_else(|| {
                        Error::InvalidDistanceMatrix(format!(
                            "individual {i} is missing replicate {j}"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            members.push(rows);
        }
        Ok(DistanceMatrix {
            n,
            values,
            groups,
            members,
        })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn groups(&self) -> &[(usize, usize)] {
        &self.groups
    }

    pub fn n_individuals(&self) -> usize {
        self.members.len()
    }

    /// Rows belonging to individual `i`, ordered by replicate.
    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    pub fn replicate_counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// The same matrix with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        DistanceMatrix::new(
            self.values.iter().map(|v| v * factor).collect(),
            self.groups.clone(),
        )
    }
}

/// Computes all pairwise distances of a sample, rows in group order.
///
/// Time-series payloads are first converted to correlation matrices. A
/// threshold in `spec` is applied to matrix payloads before distancing.
pub fn compute_distance_matrix(sample: &GroupedSample, spec: &DistanceSpec) -> Result<DistanceMatrix> {
    let kind = sample.payload_kind();
    let is_matrix = matches!(kind, PayloadKind::Matrix | PayloadKind::TimeSeries);
    if spec.kind == DistanceKind::CorrOfCorr && !is_matrix {
        return Err(Error::MetricMismatch(
            "correlation of correlations needs matrix or time-series payloads".into(),
        ));
    }
    if spec.threshold.is_some() && !is_matrix {
        return Err(Error::MetricMismatch(
            "soft-thresholding applies to correlation matrices, not vectors".into(),
        ));
    }

    let raw: Vec<&Payload> = sample.payloads().collect();
    let prepared: Vec<Cow<'_, Payload>> = raw
        .par_iter()
        .map(|p| {
            let mut q = match kind {
                PayloadKind::TimeSeries => Cow::Owned(correlation_from_timeseries(p)?),
                _ => Cow::Borrowed(*p),
            };
            if let Some(lambda) = spec.threshold {
                q = Cow::Owned(soft_threshold(&q, lambda)?.0);
            }
            Ok(q)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = prepared.len();
    let upper = (0..n)
        .into_par_iter()
        .map(|a| {
            ((a + 1)..n)
                .map(|b| spec.distance(&prepared[a], &prepared[b]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0.0; n * n];
    for (a, row) in upper.into_iter().enumerate() {
        for (k, d) in row.into_iter().enumerate() {
            let b = a + 1 + k;
            values[a * n + b] = d;
            values[b * n + a] = d;
        }
    }
    DistanceMatrix::new(values, sample.group_layout())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(id: &str, rep: &str, v: Vec<f64>) -> Observation {
        Observation {
            individual: id.into(),
            replicate: rep.into(),
            payload: Payload::vector(v),
        }
    }

    #[test]
    fn builds_two_by_two() {
        let s = build_grouped_sample(
            PayloadKind::Vector,
            vec![
                obs("A", "1", vec![0.0, 1.0]),
                obs("A", "2", vec![2.0, 1.0]),
                obs("B", "1", vec![0.0, 3.0]),
                obs("B", "2", vec![1.0, 1.0]),
            ],
        )
        .unwrap();
        assert_eq!(s.n_individuals(), 2);
        assert_eq!(s.replicate_counts(), vec![2, 2]);
        assert_eq!(s.feature_dim(), 2);
    }

    #[test]
    fn individuals_in_first_appearance_order_and_replicates_sorted() {
        let s = build_grouped_sample(
            PayloadKind::Vector,
            vec![
                obs("z", "10", vec![10.0]),
                obs("a", "1", vec![1.0]),
                obs("z", "2", vec![2.0]),
                obs("a", "0", vec![0.0]),
            ],
        )
        .unwrap();
        let ids: Vec<_> = s.individuals().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["z", "a"]);
        // numeric, not lexicographic: 2 before 10
        assert_eq!(s.individuals()[0].replicates[0].as_slice(), &[2.0]);
        assert_eq!(s.individuals()[1].replicates[0].as_slice(), &[0.0]);
    }

    #[test]
    fn single_individual_rejected() {
        let err = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![0.0]), obs("A", "2", vec![1.0])],
        )
        .unwrap_err();
        assert_eq!(err, Error::InsufficientGroups { found: 1 });
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let err = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![0.0, 1.0]), obs("B", "1", vec![1.0, 2.0, 3.0])],
        )
        .unwrap_err();
        assert_eq!(err.kind_name(), "InputShapeError");
    }

    #[test]
    fn nan_rejected() {
        let err = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![f64::NAN]), obs("B", "1", vec![1.0])],
        )
        .unwrap_err();
        assert_eq!(err.kind_name(), "NonFiniteError");
    }

    #[test]
    fn needs_some_replication() {
        let err = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![0.0]), obs("B", "1", vec![1.0])],
        )
        .unwrap_err();
        assert_eq!(err, Error::InsufficientReplicates);
    }

    #[test]
    fn duplicate_observation_rejected() {
        let err = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![0.0]), obs("A", "1", vec![1.0]), obs("B", "1", vec![1.0])],
        )
        .unwrap_err();
        assert_eq!(err.kind_name(), "DuplicateObservationError");
    }

    #[test]
    fn identical_payloads_have_zero_distance() {
        let s = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![1.5, 2.0]), obs("A", "2", vec![1.5, 2.0]), obs("B", "1", vec![0.0, 0.0])],
        )
        .unwrap();
        let d = compute_distance_matrix(&s, &DistanceSpec::new(DistanceKind::L2)).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(1, 0), 0.0);
    }

    #[test]
    fn scalar_l2_distance() {
        let s = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![0.0]), obs("A", "2", vec![2.0]), obs("B", "1", vec![0.0])],
        )
        .unwrap();
        let d = compute_distance_matrix(&s, &DistanceSpec::new(DistanceKind::L2)).unwrap();
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.groups(), &[(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn corr_metric_on_vectors_is_a_mismatch() {
        let s = build_grouped_sample(
            PayloadKind::Vector,
            vec![obs("A", "1", vec![0.0, 1.0, 2.0]), obs("A", "2", vec![2.0, 1.0, 0.0]), obs("B", "1", vec![0.0, 0.0, 1.0])],
        )
        .unwrap();
        let err = compute_distance_matrix(&s, &DistanceSpec::new(DistanceKind::CorrOfCorr)).unwrap_err();
        assert_eq!(err.kind_name(), "MetricMismatchError");
        let thresholded = DistanceSpec::new(DistanceKind::L2).with_threshold(0.1).unwrap();
        let err = compute_distance_matrix(&s, &thresholded).unwrap_err();
        assert_eq!(err.kind_name(), "MetricMismatchError");
    }

    #[test]
    fn distance_matrix_validation() {
        let groups = vec![(0, 0), (1, 0)];
        assert!(DistanceMatrix::new(vec![0.0, 1.0, 1.0, 0.0], groups.clone()).is_ok());
        assert!(DistanceMatrix::new(vec![0.0, 1.0, 2.0, 0.0], groups.clone()).is_err());
        assert!(DistanceMatrix::new(vec![0.0, -1.0, -1.0, 0.0], groups.clone()).is_err());
        assert!(DistanceMatrix::new(vec![1.0, 1.0, 1.0, 0.0], groups.clone()).is_err());
        assert!(DistanceMatrix::new(vec![0.0, 1.0, 1.0, 0.0], vec![(0, 0), (0, 0)]).is_err());
        assert!(DistanceMatrix::new(vec![0.0, 1.0, 1.0, 0.0], vec![(0, 0), (2, 0)]).is_err());
        assert!(DistanceMatrix::new(vec![0.0, 1.0, 1.0, 0.0], vec![(0, 0), (0, 2)]).is_err());
    }

    #[test]
    fn non_contiguous_groups_are_accepted() {
        let d = DistanceMatrix::new(
            vec![0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 2.0, 3.0, 0.0],
            vec![(1, 0), (0, 0), (1, 1)],
        )
        .unwrap();
        assert_eq!(d.members(0), &[1]);
        assert_eq!(d.members(1), &[0, 2]);
        assert_eq!(d.replicate_counts(), vec![1, 2]);
    }
}
