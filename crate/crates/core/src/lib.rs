//! Fairness-aware preprocessing and modelling toolkit: Gaussian-copula
//! simulation, covariance decorrelation of features from sensitive
//! attributes, exposure-weighted logistic regression, survival pseudo
//! tables, group fairness metrics and replicate confidence intervals.

pub mod decorrelate;
pub mod experiment;
pub mod fairness;
pub mod glm;
pub mod metric;
pub mod numerics;
pub mod simulate;
pub mod stats;
pub mod survival;
pub mod tabular;

pub use metric::Metric;

use thiserror::Error;

/// Process exit codes used by the command-line front end.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Simulate(#[from] simulate::SimulateError),
    #[error(transparent)]
    Tabular(#[from] tabular::TabularError),
    #[error(transparent)]
    Fairness(#[from] fairness::FairnessError),
    #[error(transparent)]
    Decorrelate(#[from] decorrelate::DecorrelateError),
    #[error(transparent)]
    Survival(#[from] survival::SurvivalError),
    #[error(transparent)]
    Glm(#[from] glm::GlmError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use exit_code::{CONFIG, DATA, NUMERIC};
        match self {
            Error::Config(_) => CONFIG,
            Error::Io { .. } => DATA,
            Error::Numerics(_) => NUMERIC,
            Error::Simulate(e) => match e {
                simulate::SimulateError::Numerics(_) => NUMERIC,
                simulate::SimulateError::Tabular(_) => DATA,
                _ => CONFIG,
            },
            Error::Tabular(e) => match e {
                tabular::TabularError::Schema(_)
                | tabular::TabularError::UnknownColumn(_)
                | tabular::TabularError::InvalidArgument(_) => CONFIG,
                tabular::TabularError::DegenerateVariance(_) => NUMERIC,
                _ => DATA,
            },
            Error::Fairness(e) => match e {
                fairness::FairnessError::InvalidArgument(_) => CONFIG,
                _ => DATA,
            },
            Error::Decorrelate(e) => match e {
                decorrelate::DecorrelateError::RankDeficient { .. }
                | decorrelate::DecorrelateError::Numerics(_) => NUMERIC,
                decorrelate::DecorrelateError::InvalidArgument(_) => CONFIG,
                _ => DATA,
            },
            Error::Survival(e) => match e {
                survival::SurvivalError::Schema(_) | survival::SurvivalError::InvalidArgument(_) => CONFIG,
                survival::SurvivalError::DegenerateExposure(_)
                | survival::SurvivalError::InternalConsistency(_) => NUMERIC,
                _ => DATA,
            },
            Error::Glm(e) => match e {
                glm::GlmError::SingularInformation => NUMERIC,
                glm::GlmError::InvalidArgument(_) => CONFIG,
                _ => DATA,
            },
            Error::Stats(e) => match e {
                stats::StatsError::InvalidArgument(_) => CONFIG,
                _ => DATA,
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
