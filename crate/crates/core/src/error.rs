use thiserror::Error;

/// Errors raised across the embedding, optimization and geometry pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Every off-diagonal kernel weight underflowed at this bandwidth.
    #[error("kernel is numerically zero at sigma = {sigma:e}")]
    DegenerateKernel { sigma: f64 },

    /// More than one eigenvalue fell under the relative floor, i.e. the
    /// kernel graph is numerically disconnected.
    #[error("laplacian rank collapsed at sigma = {sigma:e}: {floored} eigenvalues under the floor")]
    RankCollapse { sigma: f64, floored: usize },

    #[error("normalizing trace vanished at sigma = {sigma:e}")]
    DegenerateDenominator { sigma: f64 },

    #[error("input embedding is flagged degenerate")]
    DegenerateInput,

    #[error("could not draw an anchor matrix with distinct rows after {attempts} attempts")]
    DuplicateAnchors { attempts: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("sigma grid is empty")]
    EmptyGrid,

    #[error("every sigma on the search grid is degenerate")]
    AllDegenerate,

    #[error("objective is degenerate at every probed point")]
    DegenerateObjective,

    #[error("polygon needs at least 3 vertices, got {n}")]
    TooFewPoints { n: usize },

    #[error("target dimension {target} is smaller than source dimension {source_dim}")]
    DimensionError { source_dim: usize, target: usize },

    #[error("smoothing window holds {window} points but degree {degree} needs at least {needed}")]
    WindowTooSmall {
        window: usize,
        degree: usize,
        needed: usize,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("ragged rows: row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric cell at row {row}, column {column}: {value:?}")]
    NonNumericCell {
        row: usize,
        column: usize,
        value: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
