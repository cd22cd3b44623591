//! Command-line orchestration of the value-injection pipeline.

pub mod app;
pub mod commands;
pub mod config;

pub use app::{exit_code, run_cli};
