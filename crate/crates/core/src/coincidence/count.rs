use crate::error::{require_positive, Error, Result};
use crate::events::first_unsorted;
use crate::exec::Execution;

/// Arms longer than this are split into chunks for the parallel sweep.
#[cfg(feature = "parallel")]
const CHUNK: usize = 1 << 15;

/// Signed distance of a pair from the window centre. Every counting routine
/// uses exactly this expression so that all of them agree to the last pair.
#[inline(always)]
fn lag(ta: f64, tb: f64, offset: f64) -> f64 {
    (ta - tb) - offset
}

pub(crate) fn check_sorted(ts: &[f64], stream: &'static str) -> Result<()> {
    match first_unsorted(ts) {
        Some(index) => Err(Error::Unsorted { stream, index }),
        None => Ok(()),
    }
}

fn check_window(half_window: f64, offset: f64) -> Result<()> {
    require_positive("half_window", half_window)?;
    if !offset.is_finite() {
        return Err(Error::param("offset", offset, "must be finite"));
    }
    Ok(())
}

/// Number of pairs `(ta, tb)` with `|ta - tb - offset| <= half_window`.
///
/// Both arms must be sorted. Every in-window pair is counted, so one event
/// may take part in several coincidences.
pub fn count_coincidences(a: &[f64], b: &[f64], half_window: f64, offset: f64) -> Result<u64> {
    count_coincidences_with(a, b, half_window, offset, Execution::default())
}

pub fn count_coincidences_with(
    a: &[f64],
    b: &[f64],
    half_window: f64,
    offset: f64,
    exec: Execution,
) -> Result<u64> {
    check_window(half_window, offset)?;
    check_sorted(a, "a")?;
    check_sorted(b, "b")?;
    Ok(match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel if a.len() > CHUNK => {
            use rayon::prelude::*;
            a.par_chunks(CHUNK)
                .map(|chunk| sweep(chunk, b, half_window, offset, |_, lo, hi| (hi - lo) as u64))
                .sum()
        }
        _ => sweep(a, b, half_window, offset, |_, lo, hi| (hi - lo) as u64),
    })
}

/// Two-pointer sweep over sorted arms. For each `ta` the in-window partners
/// are `b[lo..hi]`; `visit` receives `(ta, lo, hi)` and returns a count.
#[inline]
pub(crate) fn sweep<F>(a: &[f64], b: &[f64], half_window: f64, offset: f64, mut visit: F) -> u64
where
    F: FnMut(f64, usize, usize) -> u64,
{
    let Some(&first) = a.first() else {
        return 0;
    };
    let mut lo = b.partition_point(|&tb| lag(first, tb, offset) > half_window);
    let mut hi = b.partition_point(|&tb| lag(first, tb, offset) >= -half_window);
    let mut total = 0;
    for &ta in a {
        while lo < b.len() && lag(ta, b[lo], offset) > half_window {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < b.len() && lag(ta, b[hi], offset) >= -half_window {
            hi += 1;
        }
        total += visit(ta, lo, hi);
    }
    total
}

/// Quadratic reference count with the same closed-window predicate.
pub fn brute_force_count(a: &[f64], b: &[f64], half_window: f64, offset: f64) -> u64 {
    let mut n = 0;
    for &ta in a {
        for &tb in b {
            if lag(ta, tb, offset).abs() <= half_window {
                n += 1;
            }
        }
    }
    n
}

/// Accidental-coincidence estimate from windows placed far from zero lag,
/// averaged over `+far_offset` and `-far_offset`.
///
/// `correlation_time` is the longest correlation scale in the data,
/// normally `max(tau_D, tau_c)`.
pub fn accidental_estimate(
    a: &[f64],
    b: &[f64],
    half_window: f64,
    far_offset: f64,
    correlation_time: f64,
) -> Result<f64> {
    require_positive("correlation_time", correlation_time)?;
    let required = 10.0 * correlation_time + half_window;
    if !(far_offset.abs() > required) {
        return Err(Error::OffsetInsideCorrelation {
            offset: far_offset,
            required,
        });
    }
    let far = far_offset.abs();
    let plus = count_coincidences(a, b, half_window, far)?;
    let minus = count_coincidences(a, b, half_window, -far)?;
    Ok(0.5 * (plus + minus) as f64)
}
