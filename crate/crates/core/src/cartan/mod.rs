//! Linear algebra of `SL(d, R)`: Cartan projection, weight coordinates, flags,
//! the partial Iwasawa cocycle, the Gromov product, lengths and the
//! flag-convergence checker.

mod convergence;
mod element;
mod flag;
mod length;
mod vector;
mod word;

pub use convergence::{check_flag_convergence, ConditionVerdict, ConvergenceReport, ConvergenceTolerances};
pub use element::{cartan_project, GroupElement};
pub use flag::{
    flag_distance, gromov_product, is_transverse, is_transverse_with, iwasawa_cocycle, u_theta, u_theta_unchecked,
    u_theta_with, PartialFlag,
};
pub use length::{
    jordan_projection, phi_length, phi_power_estimate, phi_power_increment, quint_gap_check,
};
pub use vector::{dual_functional, opposition, weight_coords, CartanVector, LinearFunctional, RootSubset, WeightVector};
pub use word::{Letter, Word};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CartanError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("negative determinant cannot be normalized in even dimension")]
    NegativeDeterminant,
    #[error("determinant deviates from 1 by {0:e} after normalization")]
    DeterminantDrift(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("root subset {indices:?} is invalid for d = {d}")]
    InvalidRootSubset { indices: Vec<usize>, d: usize },
    #[error("root subset is not symmetric")]
    NonSymmetricTheta,
    #[error("singular value gap alpha_{index} = {gap:e} is below the threshold")]
    DegenerateGap { index: usize, gap: f64 },
    #[error("flags are not transverse (conditioning {0:e})")]
    NotTransverse(f64),
    #[error("eigenvalue solver did not converge")]
    EigenFailure,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("cannot parse {0}")]
    Parse(String),
}

/// Numerical thresholds used throughout the geometric core.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub det: f64,
    pub word: f64,
    pub gap_min: f64,
    pub transverse: f64,
    pub dedup: f64,
    pub dedup_quantum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            det: 1e-9,
            word: 1e-8,
            gap_min: 1e-8,
            transverse: 1e-10,
            dedup: 1e-7,
            dedup_quantum: 1e-6,
        }
    }
}
