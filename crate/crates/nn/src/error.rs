use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {layer}: {dim} expected {expected}, found {found}")]
    ShapeMismatch {
        layer: &'static str,
        dim: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),
    #[error("malformed parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn check_dim(
    layer: &'static str,
    dim: &'static str,
    expected: usize,
    found: usize,
) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch {
            layer,
            dim,
            expected,
            found,
        })
    }
}
