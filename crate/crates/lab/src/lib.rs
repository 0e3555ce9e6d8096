//! Experiment driver for branching Lévy processes with heavy-tailed motion.
//!
//! The core algorithms live in [`bralev_core`]. This crate adds TOML
//! configuration, a deterministic worker pool, statistical checks, CSV
//! output and the `bralev` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod output;
pub mod pipelines;
pub mod runner;
pub mod verify;
