pub mod chains;
pub mod cli;
pub mod clique;
pub mod config;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod model;
pub mod pointwise;
pub mod report;
pub mod zoo;
