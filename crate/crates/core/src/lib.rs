pub mod error;
pub mod harness;
pub mod hfgcn;
pub mod metrics;
pub mod io;
pub mod connstats;
pub mod dsp;
pub mod nn;
pub mod satae;
pub mod synth;

pub use error::{Error, Result};
