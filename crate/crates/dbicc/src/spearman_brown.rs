//! Signal-to-noise transforms and log-log reliability curves.
//!
//! The SNR of a reliability `rho` is `rho / (1 - rho)`. Classically the SNR is
//! proportional to the number of averaged measurements `m`; for sample
//! covariance matrices it is proportional to `m - 1`; more generally it scales
//! like `m^beta`. Fitting a line to `(log(m - offset), log SNR)` recovers the
//! exponent as the slope.

use crate::error::{Error, Result};
use crate::estimator::DbiccEstimate;

pub fn snr(rho: f64) -> Result<f64> {
    if rho >= 1.0 || rho.is_nan() {
        return Err(Error::Parameter(format!("SNR needs rho < 1, got {rho}")));
    }
    Ok(rho / (1.0 - rho))
}

/// Inverse of [`snr`]: `s / (1 + s)`.
pub fn snr_inverse(s: f64) -> f64 {
    s / (1.0 + s)
}

/// `(MSD_b - MSD_w) / MSD_w`, which equals `snr(rho_hat)` algebraically.
pub fn snr_from_msd(est: &DbiccEstimate) -> f64 {
    (est.msd_between - est.msd_within) / est.msd_within
}

/// Reliability of the average of `m` parallel measurements each with
/// reliability `rho1`.
pub fn classical_sb(rho1: f64, m: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho1) {
        return Err(Error::Parameter(format!("rho1 must lie in [0, 1], got {rho1}")));
    }
    if m == 0 {
        return Err(Error::Parameter("m must be positive".into()));
    }
    let m = f64::from(m);
    Ok(m * rho1 / (1.0 + (m - 1.0) * rho1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Set when there are only two points: the line interpolates them and the
    /// standard errors are reported as 0.
    pub saturated: bool,
}

/// Ordinary least squares of `y` on `x`, standard errors from the residual
/// variance on `n - 2` degrees of freedom.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "a line needs at least 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all x values are identical".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if n == 2 {
        return Ok(LineFit {
            slope,
            intercept,
            slope_se: 0.0,
            intercept_se: 0.0,
            saturated: true,
        });
    }
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let sigma2 = rss / (nf - 2.0);
    Ok(LineFit {
        slope,
        intercept,
        slope_se: (sigma2 / sxx).sqrt(),
        intercept_se: (sigma2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        saturated: false,
    })
}

/// Abscissa convention: `log m` or `log(m - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbOffset {
    Zero,
    One,
}

impl SbOffset {
    pub fn value(self) -> u32 {
        match self {
            SbOffset::Zero => 0,
            SbOffset::One => 1,
        }
    }

    pub fn from_value(v: u32) -> Result<Self> {
        match v {
            0 => Ok(SbOffset::Zero),
            1 => Ok(SbOffset::One),
            other => Err(Error::Parameter(format!("offset must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbPoint {
    pub m: u32,
    pub rho_hat: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbCurve {
    pub points: Vec<SbPoint>,
    /// Inputs dropped because `rho_hat` was outside (0, 1).
    pub excluded: Vec<(u32, f64)>,
    pub offset: SbOffset,
    pub fit: LineFit,
}

/// Builds the log-log SNR curve from `(m, rho_hat)` pairs and fits a line.
pub fn build_sb_curve(estimates: &[(u32, f64)], offset: SbOffset) -> Result<SbCurve> {
    let off = offset.value();
    if let Some(&(m, _)) = estimates.iter().find(|(m, _)| *m <= off) {
        return Err(Error::Parameter(format!(
            "intensity {m} must exceed the offset {off}"
        )));
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by_key(|e| e.0);
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Parameter("duplicate intensity values".into()));
    }
    let (usable, excluded): (Vec<_>, Vec<_>) = sorted
        .into_iter()
        .partition(|&(_, rho)| rho > 0.0 && rho < 1.0);
    if !excluded.is_empty() {
        log::warn!("{} curve points with rho outside (0, 1) excluded", excluded.len());
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points with 0 < rho < 1, got {}",
            usable.len()
        )));
    }
    let points: Vec<SbPoint> = usable
        .into_iter()
        .map(|(m, rho_hat)| SbPoint {
            m,
            rho_hat,
            x: f64::from(m - off).ln(),
            y: (rho_hat / (1.0 - rho_hat)).ln(),
        })
        .collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let fit = fit_loglog(&xy)?;
    Ok(SbCurve {
        points,
        excluded,
        offset,
        fit,
    })
}
