//! Graph documents, run reports and the command implementations behind the
//! `qgraph` binary.

pub mod commands;
pub mod document;
pub mod report;

pub use commands::CliError;
pub use document::{load_graph, parse_graph, Document, DocumentError, Format};
pub use report::{OutputFormat, RunReport};
