//! Command-line tool and HTTP service around the `bop2te` design engine.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod protocol;
pub mod report;
pub mod server;
pub mod store;
