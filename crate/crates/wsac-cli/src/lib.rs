//! Experiment harness for the `wsac` library.
//!
//! The binary front-end (`wsac-cli`) is a thin wrapper over this library so
//! that integration tests can drive the same code paths directly.

pub mod gen;
pub mod report;
pub mod spec;
pub mod studies;
