//! Distance-based intraclass correlation (dbICC).
//!
//! The dbICC measures test-retest reliability of any kind of data object for
//! which a distance is defined: `1 - MSD_w / MSD_b`, the complement of the
//! ratio of the mean squared within-individual distance to the mean squared
//! between-individual distance.
//!
//! ```
//! use dbicc::{compute_distance_matrix, dbicc_point, build_grouped_sample};
//! use dbicc::{DistanceKind, DistanceSpec, Observation, Payload, PayloadKind};
//!
//! let rows = [("a", 1, 0.9), ("a", 2, 1.1), ("b", 1, -1.0), ("b", 2, -0.8)]
//!     .into_iter()
//!     .map(|(id, rep, v)| Observation {
//!         individual: id.into(),
//!         replicate: rep.to_string(),
//!         payload: Payload::vector(vec![v]),
//!     });
//! let sample = build_grouped_sample(PayloadKind::Vector, rows)?;
//! let d = compute_distance_matrix(&sample, &DistanceSpec::new(DistanceKind::L2))?;
//! let est = dbicc_point(&d)?;
//! assert!(est.rho_hat > 0.9);
//! # Ok::<(), dbicc::Error>(())
//! ```
//!
//! The guide in `book/` walks through the estimator, the bootstrap, the
//! distances for connectivity matrices, and the Spearman-Brown analysis.

pub mod bootstrap;
pub mod distances;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod model;
pub mod rng;
pub mod simulation;
pub mod spearman_brown;
pub mod sweep;

pub use bootstrap::{bootstrap_dbicc, percentile_ci, resample_individuals, BootstrapConfig, BootstrapResult};
pub use distances::{
    connectivity_score, corr_of_corr_distance, correlation_from_timeseries, l1_distance, l2_distance,
    soft_threshold, DistanceKind, DistanceSpec,
};
pub use error::{Error, Result};
pub use estimator::{dbicc_point, msd_between, msd_within, population_dbicc_gaussian, DbiccEstimate};
pub use model::{
    build_grouped_sample, compute_distance_matrix, DistanceMatrix, GroupedSample, IndividualRecord,
    Observation, Payload, PayloadKind,
};
pub use spearman_brown::{build_sb_curve, classical_sb, fit_loglog, snr, LineFit, SbCurve, SbOffset};

// Chapters of the guide, compiled so their listings run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/connectivity.md")]
    mod connectivity {}
    #[doc = include_str!("../../../book/src/bootstrap.md")]
    mod bootstrap {}
    #[doc = include_str!("../../../book/src/spearman-brown.md")]
    mod spearman_brown {}
    #[doc = include_str!("../../../book/src/simulations.md")]
    mod simulations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/scan-recipe.md")]
    mod scan_recipe {}
}
