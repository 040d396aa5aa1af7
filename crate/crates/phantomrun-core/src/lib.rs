//! Core types and pure computation for mining, replaying, and comparing
//! CI build failures.
//!
//! This crate has no IO: it defines the shared domain model, the build-log
//! parsing and normalization pipeline, and the fidelity evaluation that
//! compares an original CI execution against its containerized replay.
//! Everything that touches the network, the filesystem, or a container
//! runtime lives in the `phantomrun` companion crate.

pub mod fidelity;
pub mod logparse;
pub mod model;
pub mod synth;

pub use model::*;
