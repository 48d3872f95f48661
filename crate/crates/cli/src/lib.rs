//! Experiment runner: configuration, bundled data, parallel pair training
//! and the analysis stages behind the `numsig` binary.

pub mod config;
pub mod data;
pub mod human;
pub mod plot;
pub mod run;
pub mod seed;
pub mod stats;
pub mod tables;
