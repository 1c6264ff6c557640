//! Desk-scale simulation and analysis of fermion antibunching in a split
//! beam: antibunched event generation, coincidence counting versus detector
//! path difference, drift correction and fitting of the coincidence dip.

pub mod cli;
pub mod coincidence;
pub mod error;
pub mod events;
pub mod exec;
pub mod fit;
pub mod io;
pub mod physics;
pub mod synth;
pub mod validate;

pub use error::{Error, Result};
pub use events::{Channel, EventStream, SourceEvent, Spin};
pub use exec::Execution;
