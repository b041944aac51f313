//! File formats, experiments and the command-line driver for
//! [`uniqrand_core`].

pub mod cli;
pub mod experiments;
pub mod formats;
pub mod report;
pub mod stats;
