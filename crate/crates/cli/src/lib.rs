//! Scenario runner behind the `timelens-sim` binary.

pub mod config;
pub mod output;
pub mod quantity;
pub mod run;
