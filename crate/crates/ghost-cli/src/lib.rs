//! Replay server and command-line front end for ghost service models.

pub mod cli;
pub mod server;
