//! Parser, command-line driver and JSON reports for `jetred`.

pub mod app;
pub mod lower;
pub mod syntax;

pub use app::{execute, Cli, Outcome};
pub use lower::Model;
pub use syntax::{parse, Diagnostic, Document};
