use std::fmt;

use crate::expr::ExprError;
use crate::jet::{InvolutionCertificate, TransversalityReport};

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid context: {0}")]
    Context(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported form: {0}")]
    UnsupportedForm(String),
    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),
    #[error("precondition violated: {0}")]
    Precondition(Box<PreconditionViolation>),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Failed involution or transversality check, with both certificates.
#[derive(Debug, Clone)]
pub struct PreconditionViolation {
    pub involution: InvolutionCertificate,
    pub transversality: TransversalityReport,
}

impl fmt::Display for PreconditionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.involution.involutive {
            parts.push("family is not involutive");
        }
        if !self.transversality.transversal {
            parts.push("family is not transversal");
        }
        write!(f, "{}", parts.join("; "))
    }
}
