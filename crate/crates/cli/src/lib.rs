//! Command-line front end for the Keller–Segel solver.
//!
//! Each file-format module documents a public contract.

pub mod commands;
pub mod config;
pub mod diag_csv;
pub mod snapshot;

pub use commands::{main_with_args, ExitCode};
