//! Data generators for the simulation experiments.
//!
//! Gaussian draws go through a Cholesky factor of the covariance. A covariance
//! that does not factor is an error; no jitter is added.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::distances::centered_crossproduct;
use crate::error::{Error, Result};
use crate::estimator::population_dbicc_gaussian;
use crate::model::{GroupedSample, IndividualRecord, Payload, PayloadKind};

/// Sampler for `N(0, sigma)`.
#[derive(Debug, Clone)]
pub struct Mvn {
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl Mvn {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::Factorization(format!(
                "covariance is {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let p = sigma.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (sigma[(i, j)], sigma[(j, i)]);
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Factorization(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Factorization("covariance is not positive definite".into()))?
            .unpack();
        Ok(Mvn { sigma, chol })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.chol * z
    }

    /// VAR(1) series `x_t = phi x_{t-1} + u_t`, `u_t ~ N(0, sigma)`, started
    /// from the stationary law `N(0, sigma / (1 - phi^2))`. Rows are time
    /// points.
    pub fn sample_series<R: Rng + ?Sized>(&self, m: usize, phi: f64, rng: &mut R) -> Result<Payload> {
        check_phi(phi)?;
        if m < 2 {
            return Err(Error::InsufficientData(format!(
                "series needs at least 2 time points, got {m}"
            )));
        }
        let p = self.dim();
        let mut data = Vec::with_capacity(m * p);
        let mut x = self.sample(rng) / (1.0 - phi * phi).sqrt();
        data.extend(x.iter());
        for _ in 1..m {
            x = phi * x + self.sample(rng);
            data.extend(x.iter());
        }
        Payload::matrix(m, p, data)
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::Parameter(format!(
            "lag-1 coefficient must lie in [0, 1), got {phi}"
        )));
    }
    Ok(())
}

/// Vector true-score model `X_ij = T_i + eps_ij`.
#[derive(Debug, Clone)]
pub struct TrueScorePopulation {
    pub sigma_t: Mvn,
    pub sigma_eps: Mvn,
    pub individuals: usize,
    pub replicates: usize,
}

impl TrueScorePopulation {
    pub fn new(
        sigma_t: DMatrix<f64>,
        sigma_eps: DMatrix<f64>,
        individuals: usize,
        replicates: usize,
    ) -> Result<Self> {
        if sigma_t.shape() != sigma_eps.shape() {
            return Err(Error::InputShape("true-score and error covariances differ in size".into()));
        }
        if individuals < 2 {
            return Err(Error::InsufficientGroups { found: individuals });
        }
        if replicates < 2 {
            return Err(Error::InsufficientReplicates);
        }
        Ok(TrueScorePopulation {
            sigma_t: Mvn::new(sigma_t)?,
            sigma_eps: Mvn::new(sigma_eps)?,
            individuals,
            replicates,
        })
    }

    /// `Sigma_T = I_p`, `Sigma_eps = c I_p`.
    pub fn isotropic(p: usize, c: f64, individuals: usize, replicates: usize) -> Result<Self> {
        Self::new(
            DMatrix::identity(p, p),
            DMatrix::identity(p, p) * c,
            individuals,
            replicates,
        )
    }

    /// Isotropic population in `R^p` with population dbICC `rho`.
    pub fn with_reliability(p: usize, rho: f64, individuals: usize, replicates: usize) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Parameter(format!("rho must lie in (0, 1), got {rho}")));
        }
        Self::isotropic(p, (1.0 - rho) / rho, individuals, replicates)
    }

    pub fn population_rho(&self) -> f64 {
        population_dbicc_gaussian(self.sigma_t.sigma().trace(), self.sigma_eps.sigma().trace())
            .expect("covariances are positive definite")
    }
}

pub fn gen_gaussian_sample<R: Rng + ?Sized>(pop: &TrueScorePopulation, rng: &mut R) -> Result<GroupedSample> {
    let individuals = (0..pop.individuals)
        .map(|i| {
            let t = pop.sigma_t.sample(rng);
            let replicates = (0..pop.replicates)
                .map(|_| Payload::vector((&t + pop.sigma_eps.sample(rng)).iter().copied().collect()))
                .collect();
            IndividualRecord::new((i + 1).to_string(), replicates)
        })
        .collect();
    GroupedSample::new(PayloadKind::Vector, individuals)
}

/// An `m x p` VAR(1) series; `phi = 0` gives IID rows.
pub fn gen_mvn_timeseries<R: Rng + ?Sized>(
    sigma: &DMatrix<f64>,
    m: usize,
    phi: f64,
    rng: &mut R,
) -> Result<Payload> {
    check_phi(phi)?;
    Mvn::new(sigma.clone())?.sample_series(m, phi, rng)
}

/// Unbiased sample covariance (divisor `m - 1`) of an `m x p` data matrix.
pub fn gen_sample_cov(x: &Payload) -> Result<Payload> {
    let m = x.rows();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "sample covariance needs at least 2 rows, got {m}"
        )));
    }
    let s = centered_crossproduct(x) / (m as f64 - 1.0);
    Ok(Payload::from_dmatrix(&s))
}

/// Which matrix summarizes a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixEstimate {
    Covariance,
    Correlation,
}

impl MatrixEstimate {
    pub fn name(self) -> &'static str {
        match self {
            MatrixEstimate::Covariance => "cov",
            MatrixEstimate::Correlation => "corr",
        }
    }

    pub fn apply(self, x: &Payload) -> Result<Payload> {
        match self {
            MatrixEstimate::Covariance => gen_sample_cov(x),
            MatrixEstimate::Correlation => crate::distances::correlation_from_timeseries(x),
        }
    }
}

/// Per-individual covariances from which connectivity series are generated.
#[derive(Debug, Clone)]
pub struct ConnectivityPopulation {
    samplers: Vec<Mvn>,
    pub m: usize,
    pub phi: f64,
}

impl ConnectivityPopulation {
    pub fn new(sigmas: Vec<DMatrix<f64>>, m: usize, phi: f64) -> Result<Self> {
        check_phi(phi)?;
        if sigmas.len() < 2 {
            return Err(Error::InsufficientGroups { found: sigmas.len() });
        }
        let p = sigmas[0].nrows();
        if sigmas.iter().any(|s| s.shape() != (p, p)) {
            return Err(Error::InputShape("covariances differ in size".into()));
        }
        let samplers = sigmas.into_iter().map(Mvn::new).collect::<Result<Vec<_>>>()?;
        Ok(ConnectivityPopulation { samplers, m, phi })
    }

    pub fn with_intensity(&self, m: usize) -> Self {
        ConnectivityPopulation {
            samplers: self.samplers.clone(),
            m,
            phi: self.phi,
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.samplers.len()
    }

    pub fn sigma(&self, i: usize) -> &DMatrix<f64> {
        self.samplers[i].sigma()
    }

    pub fn sampler(&self, i: usize) -> &Mvn {
        &self.samplers[i]
    }

    /// One series for individual `i`.
    pub fn series<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<Payload> {
        self.samplers[i].sample_series(self.m, self.phi, rng)
    }
}

/// `individuals` correlation matrices obtained by scaling Wishart(df, I_p)
/// draws to unit diagonal. Off-diagonal entries have variance about `1 / df`.
pub fn wishart_correlation_population<R: Rng + ?Sized>(
    p: usize,
    individuals: usize,
    df: usize,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    if df < p {
        return Err(Error::Parameter(format!(
            "degrees of freedom {df} must be at least the dimension {p}"
        )));
    }
    Ok((0..individuals)
        .map(|_| {
            let z = DMatrix::from_fn(df, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = z.tr_mul(&z);
            let d: Vec<f64> = (0..p).map(|k| w[(k, k)].sqrt()).collect();
            DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { w[(i, j)] / (d[i] * d[j]) })
        })
        .collect())
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn from_values(v: &[f64]) -> Self {
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        MeanSe {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEpsCheck {
    pub monte_carlo: f64,
    pub std_error: f64,
    pub analytic: f64,
}

/// Expected squared Frobenius distance between two independent sample
/// covariance errors: `2 [(tr S)^2 + tr(S^2)] / (m - 1)`.
pub fn delta_eps_analytic(sigma: &DMatrix<f64>, m: usize) -> f64 {
    let tr = sigma.trace();
    let tr_sq = sigma.component_mul(&sigma.transpose()).sum();
    2.0 * (tr * tr + tr_sq) / (m as f64 - 1.0)
}

fn sample_cov_from(mvn: &Mvn, m: usize, rng: &mut (impl Rng + ?Sized)) -> Result<DMatrix<f64>> {
    let x = mvn.sample_series(m, 0.0, rng)?;
    Ok(centered_crossproduct(&x) / (m as f64 - 1.0))
}

/// Monte Carlo estimate of the error distance next to its closed form, each
/// draw being `||S_1 - S_2||_F^2` for two independent sample covariances of
/// `m` IID observations.
pub fn verify_delta_eps<R: Rng + ?Sized>(
    sigma: &DMatrix<f64>,
    m: usize,
    n_rep: usize,
    rng: &mut R,
) -> Result<DeltaEpsCheck> {
    let mvn = Mvn::new(sigma.clone())?;
    if m < mvn.dim() + 2 {
        return Err(Error::Parameter(format!(
            "m = {m} is below p + 2 = {}",
            mvn.dim() + 2
        )));
    }
    if n_rep < 1000 {
        return Err(Error::Parameter(format!("n_rep must be at least 1000, got {n_rep}")));
    }
    let draws = (0..n_rep)
        .map(|_| {
            let s1 = sample_cov_from(&mvn, m, rng)?;
            let s2 = sample_cov_from(&mvn, m, rng)?;
            Ok((s1 - s2).norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;
    let est = MeanSe::from_values(&draws);
    Ok(DeltaEpsCheck {
        monte_carlo: est.mean,
        std_error: est.std_error,
        analytic: delta_eps_analytic(sigma, m),
    })
}

/// Error distances for pairs from the same individual and from different
/// individuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SameVsDifferent {
    pub same: MeanSe,
    pub different: MeanSe,
}

fn pick_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Mean squared Frobenius distance between sample covariance errors
/// `S_ij - Sigma_i`, for errors sharing an individual versus errors of two
/// different individuals.
pub fn check_error_distance_invariance<R: Rng + ?Sized>(
    pop: &ConnectivityPopulation,
    n_rep: usize,
    rng: &mut R,
) -> Result<SameVsDifferent> {
    let err = |i: usize, rng: &mut R| -> Result<DMatrix<f64>> {
        Ok(sample_cov_from(pop.sampler(i), pop.m, rng)? - pop.sigma(i))
    };
    let mut same = Vec::with_capacity(n_rep);
    let mut different = Vec::with_capacity(n_rep);
    for _ in 0..n_rep {
        let (a, b) = pick_pair(pop.n_individuals(), rng);
        let e1 = err(a, rng)?;
        let e2 = err(a, rng)?;
        same.push((e1 - e2).norm_squared());
        let e1 = err(a, rng)?;
        let e2 = err(b, rng)?;
        different.push((e1 - e2).norm_squared());
    }
    Ok(SameVsDifferent {
        same: MeanSe::from_values(&same),
        different: MeanSe::from_values(&different),
    })
}

/// Mean of `<Sigma_a - Sigma_b, eps_a - eps_b>` over random pairs of distinct
/// individuals.
pub fn check_score_error_orthogonality<R: Rng + ?Sized>(
    pop: &ConnectivityPopulation,
    n_rep: usize,
    rng: &mut R,
) -> Result<MeanSe> {
    let mut v = Vec::with_capacity(n_rep);
    for _ in 0..n_rep {
        let (a, b) = pick_pair(pop.n_individuals(), rng);
        let ea = sample_cov_from(pop.sampler(a), pop.m, rng)? - pop.sigma(a);
        let eb = sample_cov_from(pop.sampler(b), pop.m, rng)? - pop.sigma(b);
        let dt = pop.sigma(a) - pop.sigma(b);
        v.push(dt.dot(&(ea - eb)));
    }
    Ok(MeanSe::from_values(&v))
}
