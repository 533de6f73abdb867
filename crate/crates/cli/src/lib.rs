//! Stage orchestration for the `qpwave` command-line driver.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;
