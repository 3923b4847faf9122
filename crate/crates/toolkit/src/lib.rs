//! Experiment runner and file formats for `mchaos-core`.
//!
//! A run reads an [`config::ExperimentConfig`], draws the ensemble in
//! parallel ([`ensemble`]), applies the configured dimension estimators
//! and records them next to the theory predictions ([`run`]). [`compare`]
//! turns a record into pass/fail verdicts.

pub mod compare;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod models;
pub mod run;

pub use error::{Result, ToolError};
