use thiserror::Error;

use crate::eval::EvalError;
use crate::logs::LogError;
use crate::magmodel::MagError;
use crate::pipeline::PipelineError;
use crate::simgait::SimError;

/// Any failure raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mag(#[from] MagError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nn(#[from] gaitnet::NnError),
}

pub type Result<T> = std::result::Result<T, Error>;
