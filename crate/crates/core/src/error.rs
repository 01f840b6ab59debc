use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The operation is not defined in the current state (e.g. an empty regressor).
    #[error("invalid state: {0}")]
    State(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("observer diverged at t = {time} s: z_hat = {state:?}")]
    Divergence { time: f64, state: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "{what}: expected dimension {expected}, got {got}"
        )))
    }
}
