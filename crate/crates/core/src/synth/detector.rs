use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::events::{Channel, EventStream, SourceEvent};
use crate::physics::ApparatusParams;

/// Jitter draws are truncated at this many response times.
pub const JITTER_CLIP: f64 = 4.0;

/// Sends each event to the transmitted arm with probability `transmission`.
/// Spin is dropped: the detectors do not see it.
pub fn split_beam<R: Rng + ?Sized>(
    events: &[SourceEvent],
    transmission: f64,
    rng: &mut R,
) -> Result<(EventStream, EventStream)> {
    if !(0.0..=1.0).contains(&transmission) {
        return Err(Error::param(
            "transmission",
            transmission,
            "must lie in [0, 1]",
        ));
    }
    let mut d1 = Vec::with_capacity((events.len() as f64 * transmission) as usize + 8);
    let mut d2 = Vec::with_capacity((events.len() as f64 * (1.0 - transmission)) as usize + 8);
    for e in events {
        if rng.random::<f64>() < transmission {
            d1.push(e.time);
        } else {
            d2.push(e.time);
        }
    }
    Ok((
        EventStream::new(Channel::Transmitted, d1),
        EventStream::new(Channel::Reflected, d2),
    ))
}

/// Single-detector response derived from the apparatus.
///
/// Each detector gets Gaussian jitter of `tau_D / √2`, so the difference of
/// two detections spreads by `tau_D`. A fixed latency of
/// `JITTER_CLIP * tau_D` keeps jittered times non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorResponse {
    pub efficiency: f64,
    pub jitter_sigma: f64,
    pub jitter_clip: f64,
    pub latency: f64,
    pub dead_time: f64,
}

impl DetectorResponse {
    pub fn from_apparatus(apparatus: &ApparatusParams) -> Self {
        let tau_d = apparatus.response_time_s;
        DetectorResponse {
            efficiency: apparatus.efficiency,
            jitter_sigma: tau_d / std::f64::consts::SQRT_2,
            jitter_clip: JITTER_CLIP * tau_d,
            latency: JITTER_CLIP * tau_d,
            dead_time: apparatus.dead_time_s,
        }
    }
}

pub fn detect<R: Rng + ?Sized>(
    stream: &EventStream,
    apparatus: &ApparatusParams,
    rng: &mut R,
) -> Result<EventStream> {
    detect_with(stream, &DetectorResponse::from_apparatus(apparatus), rng)
}

pub fn detect_with<R: Rng + ?Sized>(
    stream: &EventStream,
    response: &DetectorResponse,
    rng: &mut R,
) -> Result<EventStream> {
    let jitter = Normal::new(0.0, response.jitter_sigma)
        .map_err(|_| Error::param("jitter_sigma", response.jitter_sigma, "must be >= 0"))?;
    let mut out = Vec::with_capacity((stream.len() as f64 * response.efficiency) as usize + 8);
    for &t in stream.iter() {
        if response.efficiency < 1.0 && rng.random::<f64>() >= response.efficiency {
            continue;
        }
        let dt = if response.jitter_sigma > 0.0 {
            jitter
                .sample(rng)
                .clamp(-response.jitter_clip, response.jitter_clip)
        } else {
            0.0
        };
        out.push(t + response.latency + dt);
    }
    out.sort_unstable_by(f64::total_cmp);
    if response.dead_time > 0.0 {
        let mut last = f64::NEG_INFINITY;
        out.retain(|&t| {
            if t - last >= response.dead_time {
                last = t;
                true
            } else {
                false
            }
        });
    }
    Ok(EventStream::new(stream.channel, out))
}
