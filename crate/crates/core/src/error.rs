use crate::exponent::Regime;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("kernel is singular at t = 0")]
    SingularAtZero,
    #[error("derivative has a logarithmic singularity at 0")]
    LogSingularity,
    #[error("not available in the {0:?} regime")]
    UnsupportedRegime(Regime),
    #[error("exponent is not a time exponent in [0, 1]")]
    NotTimeExponent,
    #[error("f(0) = {value} but the {regime:?} regime requires f(0) = 0 (the non-singular kernel limit leaves no room for a t^(alpha0-1) term)")]
    ConstraintViolation { value: f64, regime: Regime },
    #[error("quadrature did not converge: estimated error {achieved:e} exceeds {target:e}")]
    Quadrature { achieved: f64, target: f64 },
    #[error("solver stopped after {iterations} iterations with relative residual {residual:e}")]
    Solver { iterations: usize, residual: f64 },
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
    #[error("degenerate diagonal at step {0}")]
    DegenerateDiagonal(usize),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("kernel table covers [0, {table}] but the grid needs [0, {grid}]")]
    HorizonMismatch { table: f64, grid: f64 },
    #[error("system is singular; the bilinear form is likely not coercive: {0}")]
    NonCoercive(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
