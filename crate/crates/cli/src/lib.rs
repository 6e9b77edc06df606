//! Command-line front end of `mgig-core`: a rayon trial runner, quadrature
//! reference values, matrix argument parsing and report files.

pub mod args;
pub mod commands;
pub mod oracle;
pub mod report;
pub mod runner;

pub use commands::{execute, run, Cli, Output};
pub use runner::PoolRunner;
