#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod em;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod qcqp;
pub mod quadrature;
pub mod scenario;
pub mod sdp;
pub mod sdr;

pub use error::{Error, Result};
