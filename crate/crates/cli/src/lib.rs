//! Configuration parsing and experiment dispatch for the `bellkit` binary.

pub mod config;
pub mod run;
