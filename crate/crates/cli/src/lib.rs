//! HTTP gateway, real-time node runtime and command-line client.

pub mod api;
pub mod cli;
pub mod client;
pub mod plot;
pub mod runtime;

pub use cli::{run, Cli, Output};
pub use client::{Client, Rejected};
pub use runtime::{NodeHandle, PeerEnvelope};
