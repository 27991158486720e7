//! Pipeline, configuration and report writer behind the `panelcause` binary.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
