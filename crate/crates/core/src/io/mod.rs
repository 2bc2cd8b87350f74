//! Configuration, data files and run reports.

pub mod config;
pub mod report;
pub mod spectrum;
