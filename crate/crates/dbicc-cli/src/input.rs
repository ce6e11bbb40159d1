//! Readers for the three input formats.
//!
//! * vector CSV with header `individual,replicate,f1,...,fp`
//! * `distances.csv` (n x n, no header) plus `groups.csv` with header
//!   `row,individual,replicate`
//! * time-series manifest with header `individual,replicate,path`, each path a
//!   headerless m x p CSV

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use dbicc::{build_grouped_sample, DistanceMatrix, GroupedSample, Observation, Payload, PayloadKind};
use rayon::prelude::*;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Vector,
    Distance,
    Timeseries,
}

/// Parsed input: either raw observations or a precomputed distance matrix.
#[derive(Debug, Clone)]
pub enum Input {
    Sample(GroupedSample),
    Distances(DistanceMatrix),
}

fn parse_error(path: &Path, line: u64, column: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{}:{line}:{column}: {msg}", path.display()))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    parse_error(path, line, 1, e)
}

/// Header sentinel on the first line.
pub fn detect_format(path: &Path) -> Result<InputFormat, CliError> {
    let mut first = String::new();
    BufReader::new(open(path)?)
        .read_line(&mut first)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cols: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    match cols.as_slice() {
        ["individual", "replicate", "path"] => Ok(InputFormat::Timeseries),
        ["individual", "replicate", rest @ ..] if !rest.is_empty() => Ok(InputFormat::Vector),
        _ => Err(CliError::Config(format!(
            "cannot detect the format of {}; pass --groups for distance input or --format",
            path.display()
        ))),
    }
}

fn parse_number(path: &Path, line: u64, column: usize, field: &str) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, column, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, column, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<(), CliError> {
    for (k, want) in expected.iter().enumerate() {
        if headers.get(k).map(str::trim) != Some(*want) {
            return Err(parse_error(path, 1, k + 1, format!("expected header column {want:?}")));
        }
    }
    Ok(())
}

pub fn read_vector_csv(path: &Path) -> Result<GroupedSample, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &headers, &["individual", "replicate"])?;
    if headers.len() < 3 {
        return Err(parse_error(path, 1, 3, "no feature columns"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = (2..rec.len())
            .map(|k| parse_number(path, line, k + 1, &rec[k]))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Observation {
            individual: rec[0].trim().to_string(),
            replicate: rec[1].trim().to_string(),
            payload: Payload::vector(values),
        });
    }
    Ok(build_grouped_sample(PayloadKind::Vector, rows)?)
}

/// Headerless numeric CSV as a row-major matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Payload, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(k, f)| parse_number(path, line, k + 1, f))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, 1, "empty matrix"));
    }
    Ok(Payload::from_rows(&rows)?)
}

fn compare_labels(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

pub fn read_distance_input(distances: &Path, groups: &Path) -> Result<DistanceMatrix, CliError> {
    let values = read_matrix_csv(distances)?;
    let n = values.rows();
    if !values.is_square() {
        return Err(CliError::Parse(format!(
            "{}: distance matrix is {}x{}",
            distances.display(),
            values.rows(),
            values.cols()
        )));
    }

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(groups)?);
    let headers = rdr.headers().map_err(|e| csv_error(groups, e))?.clone();
    check_header(groups, &headers, &["row", "individual", "replicate"])?;
    let mut labels: Vec<Option<(String, String)>> = vec![None; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(groups, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_error(groups, line, rec.len().min(3) + 1, "expected 3 fields"));
        }
        let row: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_error(groups, line, 1, format!("bad row index {:?}", &rec[0])))?;
        if row >= n {
            return Err(parse_error(groups, line, 1, format!("row {row} out of range 0..{n}")));
        }
        if labels[row].is_some() {
            return Err(parse_error(groups, line, 1, format!("row {row} listed twice")));
        }
        labels[row] = Some((rec[1].trim().to_string(), rec[2].trim().to_string()));
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(row, l)| {
            l.ok_or_else(|| CliError::Parse(format!("{}: row {row} has no group", groups.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;

    // individuals by first appearance in row order, replicates sorted by label
    let mut ind_index: HashMap<&str, usize> = HashMap::new();
    let mut reps: Vec<Vec<&str>> = Vec::new();
    for (ind, rep) in &labels {
        let next = ind_index.len();
        let i = *ind_index.entry(ind.as_str()).or_insert(next);
        if i == reps.len() {
            reps.push(Vec::new());
        }
        reps[i].push(rep.as_str());
    }
    for r in &mut reps {
        r.sort_by(|a, b| compare_labels(a, b));
    }
    let groups_idx = labels
        .iter()
        .map(|(ind, rep)| {
            let i = ind_index[ind.as_str()];
            let j = reps[i].iter().position(|r| r == rep).expect("label was inserted");
            (i, j)
        })
        .collect();
    Ok(DistanceMatrix::new(values.into_vec(), groups_idx)?)
}

pub fn read_timeseries_manifest(path: &Path) -> Result<GroupedSample, CliError> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &headers, &["individual", "replicate", "path"])?;
    let mut entries: Vec<(String, String, PathBuf)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_error(path, line, rec.len().min(3) + 1, "expected 3 fields"));
        }
        let p = PathBuf::from(rec[2].trim());
        let p = if p.is_absolute() { p } else { base.join(p) };
        entries.push((rec[0].trim().to_string(), rec[1].trim().to_string(), p));
    }
    let rows = entries
        .into_par_iter()
        .map(|(individual, replicate, p)| {
            Ok(Observation {
                individual,
                replicate,
                payload: read_matrix_csv(&p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(build_grouped_sample(PayloadKind::TimeSeries, rows)?)
}

pub fn read_input(path: &Path, groups: Option<&Path>, format: InputFormat) -> Result<Input, CliError> {
    let format = match (format, groups) {
        (InputFormat::Auto, Some(_)) => InputFormat::Distance,
        (InputFormat::Auto, None) => detect_format(path)?,
        (f, _) => f,
    };
    match format {
        InputFormat::Vector => Ok(Input::Sample(read_vector_csv(path)?)),
        InputFormat::Timeseries => Ok(Input::Sample(read_timeseries_manifest(path)?)),
        InputFormat::Distance => {
            let groups = groups
                .ok_or_else(|| CliError::Config("distance input needs --groups".into()))?;
            Ok(Input::Distances(read_distance_input(path, groups)?))
        }
        InputFormat::Auto => unreachable!("format resolved above"),
    }
}
