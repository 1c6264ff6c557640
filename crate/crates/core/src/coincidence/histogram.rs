use crate::error::{require_positive, Error, Result};
use crate::exec::Execution;

use super::count::{check_sorted, sweep};

/// Histogram of pair lags `t_a - t_b` over `[-max_lag, max_lag]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagHistogram {
    pub max_lag: f64,
    pub counts: Vec<u64>,
    /// Number of pairs that fell in the range; equals the closed-window count.
    pub total: u64,
    pub events_a: usize,
    pub events_b: usize,
}

impl LagHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.max_lag / self.counts.len() as f64
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.bins())
            .map(|i| -self.max_lag + i as f64 * w)
            .collect()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bins())
            .map(|i| -self.max_lag + (i as f64 + 0.5) * w)
            .collect()
    }

    /// Expected count per bin for uncorrelated arms observed over `duration`.
    pub fn flat_expectation(&self, duration: f64) -> f64 {
        self.events_a as f64 * self.events_b as f64 * self.bin_width() / duration
    }

    /// Estimate of g(lag): counts over the flat expectation.
    pub fn normalized(&self, duration: f64) -> Vec<f64> {
        let flat = self.flat_expectation(duration);
        self.counts.iter().map(|&c| c as f64 / flat).collect()
    }

    /// One-sigma Poisson error of each normalized bin.
    pub fn normalized_errors(&self, duration: f64) -> Vec<f64> {
        let flat = self.flat_expectation(duration);
        self.counts
            .iter()
            .map(|&c| (c.max(1) as f64).sqrt() / flat)
            .collect()
    }
}

pub fn lag_histogram(a: &[f64], b: &[f64], max_lag: f64, bins: usize) -> Result<LagHistogram> {
    lag_histogram_with(a, b, max_lag, bins, Execution::default())
}

pub fn lag_histogram_with(
    a: &[f64],
    b: &[f64],
    max_lag: f64,
    bins: usize,
    exec: Execution,
) -> Result<LagHistogram> {
    require_positive("max_lag", max_lag)?;
    if bins == 0 {
        return Err(Error::param("bins", 0.0, "must be >= 1"));
    }
    check_sorted(a, "a")?;
    check_sorted(b, "b")?;

    let fill = |chunk: &[f64]| {
        let mut counts = vec![0u64; bins];
        let scale = bins as f64 / (2.0 * max_lag);
        sweep(chunk, b, max_lag, 0.0, |ta, lo, hi| {
            for &tb in &b[lo..hi] {
                let lag = ta - tb;
                let k = (((lag + max_lag) * scale) as usize).min(bins - 1);
                counts[k] += 1;
            }
            (hi - lo) as u64
        });
        counts
    };
    let counts = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let add = |mut x: Vec<u64>, y: Vec<u64>| {
                for (a, b) in x.iter_mut().zip(y) {
                    *a += b;
                }
                x
            };
            a.par_chunks(1 << 14)
                .map(fill)
                .reduce(|| vec![0u64; bins], add)
        }
        _ => fill(a),
    };
    let total = counts.iter().sum();
    Ok(LagHistogram {
        max_lag,
        counts,
        total,
        events_a: a.len(),
        events_b: b.len(),
    })
}
