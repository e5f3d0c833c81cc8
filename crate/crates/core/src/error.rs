use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(
        "CFL condition violated: sigma*sqrt(2) = {value:.6} > 1 (sigma = dt/dx = {courant:.6})"
    )]
    Cfl { courant: f64, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected length {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "a dense {rows}x{cols} assembly needs {bytes} bytes, over the {budget}-byte budget; \
         use the lsqr solver instead"
    )]
    BudgetExceeded {
        rows: usize,
        cols: usize,
        bytes: usize,
        budget: usize,
    },

    #[error("operator is not symmetric: |<Ax,y> - <x,Ay>| = {0:e}")]
    NotSymmetric(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}
