//! Dataset files, checkpoints, reports and the command-line interface for
//! [`quatde_core`].

pub mod checkpoint;
pub mod cli;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod report;

pub use quatde_core as core;
