//! Monte Carlo generation of detector event streams and full position scans.

mod detector;
mod drift;
mod scan;
mod source;

pub use detector::{detect, detect_with, split_beam, DetectorResponse, JITTER_CLIP};
pub use drift::{Drift, DriftKind, DriftProfile, MAX_DRIFT_AMPLITUDE, MIN_TIMESCALE_RATIO};
pub use scan::{simulate_scan, PositionEvents, ScanConfig, ScanSimulator};
pub use source::{
    check_density, generate_source, generate_source_drifting, GeneratorMode, CORRELATION_REACH,
    MAX_DENSITY,
};
