use alloc::boxed::Box;
use alloc::string::String;

use crate::CVector;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("scene draw infeasible after {attempts} attempts")]
    Infeasible { attempts: usize },

    #[error("degenerate arc geometry: {0}")]
    Geometry(String),

    #[error("no admissible atom outside the exclusion band after {selected} selections")]
    SelectionExhausted { selected: usize },

    #[error("least squares is rank deficient (rank {rank} of {atoms} atoms)")]
    RankDeficient { rank: usize, atoms: usize },

    /// The ℓ1 solver hit its iteration cap; `best` is the last feasible iterate.
    #[error("l1 solver did not converge in {iterations} iterations (relative change {change:.3e})")]
    NotConverged {
        iterations: usize,
        change: f64,
        best: Box<CVector>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
