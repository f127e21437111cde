//! IO companion for the `sda-core` simulator: trace files, configuration
//! files, the sweep harness, result CSVs and plot data.

pub mod configfile;
pub mod output;
pub mod sweep;
pub mod tracefile;

pub use sda_core;
