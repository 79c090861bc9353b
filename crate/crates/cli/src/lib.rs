//! Batch front-end for the mood-state classification pipeline: manifests,
//! configuration, model persistence, synthetic data, and the subcommands
//! wiring the library end to end.

pub mod commands;
pub mod config;
pub mod container;
pub mod manifest;
pub mod synth;
pub mod table;
