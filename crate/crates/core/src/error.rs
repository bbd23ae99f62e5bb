use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    Dimension {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid vector field: {0}")]
    InvalidField(String),

    #[error(
        "conjugate gradient diverged after {iterations} iterations \
         (residual grew from {initial_residual:.3e} to {last_residual:.3e})"
    )]
    CgDivergence {
        iterations: usize,
        initial_residual: f64,
        last_residual: f64,
    },

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate problem: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
