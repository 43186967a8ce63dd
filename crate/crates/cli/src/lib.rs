//! Experiment harness for the `smote-privacy` command-line tool.

pub mod assumptions;
pub mod config;
pub mod experiment;
