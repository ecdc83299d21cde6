use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("degenerate input: singular value {sigma:e} below rank tolerance {tol:e}")]
    Degenerate { sigma: f64, tol: f64 },

    #[error("point {point:?} is outside the domain of chart `{chart}`")]
    Domain { chart: String, point: Vec<f64> },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("reduction degeneracy: expected rank {expected}, found {found}")]
    ReductionDegeneracy { expected: usize, found: usize },

    #[error("deformation degeneracy: smallest singular value {sigma:e} of L + conj(L)")]
    DeformationDegeneracy { sigma: f64 },

    #[error("action not locally free: rank {rank} < {expected}, deficient combination {combination:?}")]
    NotLocallyFree { rank: usize, expected: usize, combination: Vec<f64> },

    #[error("point is not on the zero level set: |mu| = {norm:e}")]
    NotOnLevelSet { norm: f64 },

    #[error("indeterminate numerical rank, singular spectrum {spectrum:?}")]
    IndeterminateRank { spectrum: Vec<f64> },

    #[error("orbit frame degenerate: smallest singular value {sigma:e}")]
    OrbitDegeneracy { sigma: f64 },

    #[error("model construction failed: {0}")]
    ModelConstruction(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
