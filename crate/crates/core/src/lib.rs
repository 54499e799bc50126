//! Verifier-in-the-loop chess puzzle harness.

pub mod chess;
pub mod cli;
pub mod datasets;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod response;
pub mod runner;
pub mod verify;
