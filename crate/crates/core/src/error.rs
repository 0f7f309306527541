use thiserror::Error;

/// Errors produced by the tensor, decomposition and projection routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid rank: {0}")]
    InvalidRank(String),

    /// A stored core has numerically smaller rank than its nominal size; the
    /// tensor should be re-decomposed at its true TT-rank.
    #[error("rank-deficient core ({which}): singular value ratio {ratio:e} below {tol:e}")]
    RankDeficient {
        which: &'static str,
        ratio: f64,
        tol: f64,
    },

    #[error("matrix is not orthonormal: Gram deviation {deviation:e} exceeds {tol:e}")]
    NotOrthonormal { deviation: f64, tol: f64 },

    #[error("inadmissible tangent parameters: {0}")]
    Inadmissible(String),

    #[error("SVD of a {rows}x{cols} matrix failed to converge or to reproduce its input")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("angle undefined for a zero tensor")]
    ZeroInput,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
