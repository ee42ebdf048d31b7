pub mod bench;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod rca;
pub mod reldisc;
pub mod synth;
pub mod telemetry;

pub use error::{Error, Result};
