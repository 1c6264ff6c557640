//! Coincidence counting between the two detector arms.

mod correction;
mod count;
mod histogram;

pub use correction::{
    drift_correct, drift_denominator, drift_forward, CorrectedRow, DriftReference, RowStatus,
    DENOMINATOR_FLOOR,
};
pub use count::{
    accidental_estimate, brute_force_count, count_coincidences, count_coincidences_with,
};
pub use histogram::{lag_histogram, lag_histogram_with, LagHistogram};

/// Raw observables recorded at one scan position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub x_mm: f64,
    pub n_c: u64,
    pub n_t: u64,
    pub n_d: u64,
    pub duration_s: f64,
}
