//! Word balls of finitely generated matrix groups: breadth-first enumeration
//! with matrix deduplication, divergence and limit-set diagnostics, and the
//! metric on the group compactified by its limit set.

mod ball;
mod cache;
mod diagnostics;
mod exact;
mod preset;

pub use ball::{enumerate_ball, enumerate_ball_with, DedupReport, WordBall};
pub use cache::{ball_cache_key, cached_ball, load_ball, save_ball, write_sphere_csv, CACHE_ENV};
pub use diagnostics::{
    compactification_distance, divergence_diagnostic, limit_set_sample, CompactPoint, ConditioningSummary,
    DivergenceTable, LimitSample, SphereGap,
};
pub use exact::{enumerate_ball_exact, RationalMatrix};
pub use preset::{DomainTag, GroupPreset};

use thiserror::Error;

use crate::cartan::CartanError;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum OrbitError<T: Real = f64> {
    #[error("element budget of {budget} reached at word length {reached}")]
    BudgetExceeded {
        budget: usize,
        reached: usize,
        partial: Box<WordBall<T>>,
    },
    #[error("words {first} and {second} give the same matrix in a free preset")]
    NonDiscreteSuspect { first: String, second: String },
    #[error("generator {index} has finite order {order}")]
    FiniteOrderGenerator { index: usize, order: usize },
    #[error("preset has no exact rational generators")]
    NoExactGenerators,
    #[error("unknown preset {0}")]
    UnknownPreset(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Cartan(#[from] CartanError),
}

impl<T: Real> OrbitError<T> {
    /// The partial ball of a budget overrun, if any.
    pub fn into_partial(self) -> Option<WordBall<T>> {
        match self {
            OrbitError::BudgetExceeded { partial, .. } => Some(*partial),
            _ => None,
        }
    }
}
