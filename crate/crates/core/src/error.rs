use thiserror::Error;

use crate::expr::ExprError;
use crate::fm::FmError;
use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fm(#[from] FmError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
