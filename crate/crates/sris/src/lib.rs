//! File formats, sweep orchestration, reports and the command-line front end built on
//! [`sris_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod report;
pub mod spec;
pub mod sweep;
pub mod touchstone;
pub mod verify;
pub mod zcache;

pub use error::{Result, SrisError};
