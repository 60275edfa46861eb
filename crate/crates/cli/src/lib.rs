//! Library side of the benchmark CLI; the binary in `main.rs` is a thin
//! dispatcher over these modules so the commands stay testable.

pub mod commands;
pub mod config;
pub mod runner;
