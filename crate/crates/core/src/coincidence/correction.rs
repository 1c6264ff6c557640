//! Removal of slow source-intensity drift from scan counts.
//!
//! To first order in small fluctuations the raw coincidence count relates to
//! the constant-rate count by
//! `N_c = N̄_c [1 + (N_t - N̄_t)/N̄_t + (N_d - N̄_d)/N̄_d]`; this module inverts it.

use crate::error::{Error, Result};

use super::ScanRow;

/// Denominators below this are outside the small-fluctuation regime and get clamped.
pub const DENOMINATOR_FLOOR: f64 = 0.5;

/// Source of the reference singles counts `N̄_t`, `N̄_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftReference {
    #[default]
    GlobalMean,
    /// Means over consecutive blocks of this many rows, in row order.
    BlockMean(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Denominator was in (0, floor) and was clamped to the floor.
    Clamped,
    /// Denominator was not positive; the row must not be used.
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedRow {
    pub x_mm: f64,
    pub raw: u64,
    pub corrected: f64,
    pub denominator: f64,
    pub status: RowStatus,
}

/// Forward relation: raw count produced by drifting singles from a
/// constant-rate count `n_c_bar`.
pub fn drift_forward(n_c_bar: f64, n_t: f64, n_t_bar: f64, n_d: f64, n_d_bar: f64) -> f64 {
    n_c_bar * drift_denominator(n_t, n_t_bar, n_d, n_d_bar)
}

#[inline]
pub fn drift_denominator(n_t: f64, n_t_bar: f64, n_d: f64, n_d_bar: f64) -> f64 {
    1.0 + (n_t - n_t_bar) / n_t_bar + (n_d - n_d_bar) / n_d_bar
}

pub fn drift_correct(rows: &[ScanRow], reference: DriftReference) -> Result<Vec<CorrectedRow>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no scan rows to correct".into()));
    }
    let block = match reference {
        DriftReference::GlobalMean => rows.len(),
        DriftReference::BlockMean(0) => {
            return Err(Error::param("block size", 0.0, "must be >= 1"));
        }
        DriftReference::BlockMean(k) => k,
    };
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(block) {
        let n = chunk.len() as f64;
        let t_bar = chunk.iter().map(|r| r.n_t as f64).sum::<f64>() / n;
        let d_bar = chunk.iter().map(|r| r.n_d as f64).sum::<f64>() / n;
        if !(t_bar > 0.0) {
            return Err(Error::param("mean N_t", t_bar, "must be > 0"));
        }
        if !(d_bar > 0.0) {
            return Err(Error::param("mean N_d", d_bar, "must be > 0"));
        }
        for r in chunk {
            let denominator = drift_denominator(r.n_t as f64, t_bar, r.n_d as f64, d_bar);
            let (used, status) = if denominator <= 0.0 {
                (DENOMINATOR_FLOOR, RowStatus::Invalid)
            } else if denominator < DENOMINATOR_FLOOR {
                (DENOMINATOR_FLOOR, RowStatus::Clamped)
            } else {
                (denominator, RowStatus::Ok)
            };
            out.push(CorrectedRow {
                x_mm: r.x_mm,
                raw: r.n_c,
                corrected: r.n_c as f64 / used,
                denominator,
                status,
            });
        }
    }
    Ok(out)
}
