//! Symbolic jet calculus for point symmetries of differential equations.
//!
//! The crate covers canonical expressions on jet space, prolongation of
//! point vector fields, reduction modulo solved differential systems,
//! classical and conditional invariance criteria, and ansatz reductions.

pub mod context;
pub mod error;
pub mod expr;
pub mod invariance;
pub mod jet;
pub mod linalg;
pub mod manifold;
pub mod reduction;

pub use context::VariableContext;
pub use error::{Error, Result};
pub use expr::{Expr, ExprError, JetVar, MultiIndex, Symbol};
