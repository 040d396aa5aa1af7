//! Batch toolkit around `phantomrun-core`: forge mining, containerized
//! build replay, the content-addressed artifact store, and the CLI.

pub mod cli;
pub mod config;
pub mod miner;
pub mod reconstructor;
pub mod store;
