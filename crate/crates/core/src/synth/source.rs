//! Source emission: Poisson arrivals, optionally antibunched by sequential thinning.
//!
//! A candidate at time `t` is accepted with probability equal to the product
//! of pair-correlation factors against every already accepted event within
//! [`CORRELATION_REACH`] coherence times. At low phase-space density
//! (`rate * tau_c` well below one) this yields a pair correlation equal to
//! the target `C(t)` up to corrections of order `rate * tau_c`.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::events::{SourceEvent, Spin};
use crate::physics::{pair_correlation_unchecked, BeamParams, SpinMode};

use super::drift::Drift;

/// Largest `rate * tau_c` for which thinning is allowed.
pub const MAX_DENSITY: f64 = 0.2;
/// Predecessors further than this many coherence times are ignored.
pub const CORRELATION_REACH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorMode {
    /// Homogeneous Poisson, no antibunching.
    Independent,
    /// Two spin populations, each thinned with the same-spin correlation.
    #[default]
    SpinResolved,
    /// One stream thinned with the net unpolarized correlation.
    NetThinning,
}

impl GeneratorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorMode::Independent => "independent",
            GeneratorMode::SpinResolved => "spin_resolved",
            GeneratorMode::NetThinning => "net_thinning",
        }
    }

    pub fn is_antibunched(self) -> bool {
        self != GeneratorMode::Independent
    }
}

impl std::str::FromStr for GeneratorMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "independent" => Ok(GeneratorMode::Independent),
            "spin_resolved" => Ok(GeneratorMode::SpinResolved),
            "net_thinning" => Ok(GeneratorMode::NetThinning),
            other => Err(format!(
                "unknown generator mode `{other}` (expected independent, spin_resolved or net_thinning)"
            )),
        }
    }
}

/// Errors unless thinning is valid for this beam.
pub fn check_density(beam: &BeamParams, mode: GeneratorMode) -> Result<()> {
    let density = beam.rate_hz * beam.coherence_time_s;
    if mode.is_antibunched() && density > MAX_DENSITY {
        return Err(Error::DensityTooHigh {
            density,
            limit: MAX_DENSITY,
        });
    }
    Ok(())
}

/// Emits source events over `[0, duration)` at the constant rate of `beam`.
pub fn generate_source<R: Rng + ?Sized>(
    beam: &BeamParams,
    duration: f64,
    mode: GeneratorMode,
    rng: &mut R,
) -> Result<Vec<SourceEvent>> {
    generate_source_drifting(beam, duration, mode, &Drift::none(), 0.0, rng)
}

/// As [`generate_source`], with the rate modulated by `drift` evaluated at
/// absolute time `start + t`.
pub fn generate_source_drifting<R: Rng + ?Sized>(
    beam: &BeamParams,
    duration: f64,
    mode: GeneratorMode,
    drift: &Drift,
    start: f64,
    rng: &mut R,
) -> Result<Vec<SourceEvent>> {
    beam.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::param("duration", duration, "must be finite and > 0"));
    }
    check_density(beam, mode)?;
    let n = beam.rate_hz;
    let tc = beam.coherence_time_s;
    let process = Candidates {
        duration,
        drift,
        start,
    };
    Ok(match mode {
        GeneratorMode::Independent => process
            .run(n, rng, |_, _| true)
            .into_iter()
            .map(|time| SourceEvent {
                time,
                spin: random_spin(rng),
            })
            .collect(),
        GeneratorMode::NetThinning => {
            let times = process.thinned(n, tc, SpinMode::Unpolarized, rng);
            times
                .into_iter()
                .map(|time| SourceEvent {
                    time,
                    spin: random_spin(rng),
                })
                .collect()
        }
        GeneratorMode::SpinResolved => {
            let up = process.thinned(0.5 * n, tc, SpinMode::SameSpin, rng);
            let down = process.thinned(0.5 * n, tc, SpinMode::SameSpin, rng);
            merge_spins(&up, &down)
        }
    })
}

fn random_spin<R: Rng + ?Sized>(rng: &mut R) -> Spin {
    if rng.random::<bool>() {
        Spin::Up
    } else {
        Spin::Down
    }
}

fn merge_spins(up: &[f64], down: &[f64]) -> Vec<SourceEvent> {
    let mut out = Vec::with_capacity(up.len() + down.len());
    let (mut i, mut j) = (0, 0);
    while i < up.len() || j < down.len() {
        let take_up = j == down.len() || (i < up.len() && up[i] <= down[j]);
        if take_up {
            out.push(SourceEvent {
                time: up[i],
                spin: Spin::Up,
            });
            i += 1;
        } else {
            out.push(SourceEvent {
                time: down[j],
                spin: Spin::Down,
            });
            j += 1;
        }
    }
    out
}

struct Candidates<'a> {
    duration: f64,
    drift: &'a Drift,
    start: f64,
}

impl Candidates<'_> {
    /// Poisson candidates at `rate` (times the drift ceiling), kept when the
    /// drift thinning and `accept(t, rng_draw)` both pass.
    fn run<R, F>(&self, rate: f64, rng: &mut R, mut accept: F) -> Vec<f64>
    where
        R: Rng + ?Sized,
        F: FnMut(f64, &mut R) -> bool,
    {
        let ceiling = self.drift.max_multiplier();
        let gap = Exp::new(rate * ceiling).expect("positive rate");
        let drifting = ceiling > 1.0;
        let mut out = Vec::with_capacity((rate * self.duration * 1.05) as usize + 16);
        let mut t = 0.0;
        loop {
            t += gap.sample(rng);
            if t >= self.duration {
                break;
            }
            if drifting {
                let keep = self.drift.multiplier(self.start + t) / ceiling;
                if rng.random::<f64>() >= keep {
                    continue;
                }
            }
            if accept(t, rng) {
                out.push(t);
            }
        }
        out
    }

    fn thinned<R: Rng + ?Sized>(
        &self,
        rate: f64,
        tau_c: f64,
        mode: SpinMode,
        rng: &mut R,
    ) -> Vec<f64> {
        let reach = CORRELATION_REACH * tau_c;
        let mut accepted: Vec<f64> = Vec::new();
        let mut first = 0;
        let times = self.run(rate, rng, |t, rng| {
            while first < accepted.len() && t - accepted[first] > reach {
                first += 1;
            }
            let p: f64 = accepted[first..]
                .iter()
                .map(|&s| pair_correlation_unchecked(t - s, tau_c, mode))
                .product();
            let keep = p >= 1.0 || rng.random::<f64>() < p;
            if keep {
                accepted.push(t);
            }
            keep
        });
        debug_assert_eq!(times, accepted);
        times
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn beam(rate: f64, tc: f64) -> BeamParams {
        BeamParams {
            rate_hz: rate,
            speed_m_s: 1.0,
            energy_mev: None,
            energy_spread_ev: None,
            coherence_time_s: tc,
        }
    }

    #[test]
    fn independent_count_and_exponential_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = generate_source(&beam(1000.0, 1e-9), 100.0, GeneratorMode::Independent, &mut rng)
            .unwrap();
        let n = ev.len() as f64;
        assert!((n - 1e5).abs() < 5.0 * 1e5f64.sqrt());
        assert!(ev.windows(2).all(|w| w[0].time < w[1].time));
        // exponential gaps: mean 1e-3 s, and P(gap > mean) = 1/e
        let gaps: Vec<f64> = ev.windows(2).map(|w| w[1].time - w[0].time).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean - 1e-3).abs() < 5.0 * 1e-3 / (gaps.len() as f64).sqrt());
        let above = gaps.iter().filter(|&&g| g > 1e-3).count() as f64 / gaps.len() as f64;
        let p = (-1.0f64).exp();
        assert!((above - p).abs() < 5.0 * (p * (1.0 - p) / gaps.len() as f64).sqrt());
        // Kolmogorov–Smirnov against Exp(1000)
        let mut sorted = gaps.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len() as f64;
        let d = sorted
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let cdf = 1.0 - (-1000.0 * g).exp();
                (cdf - i as f64 / m).abs().max(((i + 1) as f64 / m - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / m.sqrt(), "KS D = {d}");
    }

    #[test]
    fn refuses_dense_antibunched_beam() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = beam(500.0, 1e-3);
        let err = generate_source(&b, 1.0, GeneratorMode::SpinResolved, &mut rng).unwrap_err();
        assert!(matches!(err, Error::DensityTooHigh { .. }));
        assert!(generate_source(&b, 1.0, GeneratorMode::Independent, &mut rng).is_ok());
    }

    #[test]
    fn same_spin_pairs_never_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ev = generate_source(&beam(50.0, 1e-3), 2000.0, GeneratorMode::SpinResolved, &mut rng)
            .unwrap();
        assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
        let mut last_up = f64::NEG_INFINITY;
        let mut last_down = f64::NEG_INFINITY;
        let mut close_same = 0usize;
        for e in &ev {
            let last = match e.spin {
                Spin::Up => &mut last_up,
                Spin::Down => &mut last_down,
            };
            if e.time - *last < 1e-5 {
                close_same += 1;
            }
            *last = e.time;
        }
        // expected ~ N * (rate/2) * ∫_0^1e-5 (t²/2tc²) dt, essentially zero
        assert_eq!(close_same, 0);
        let ups = ev.iter().filter(|e| e.spin == Spin::Up).count() as f64;
        let n = ev.len() as f64;
        assert!((ups / n - 0.5).abs() < 5.0 * 0.5 / n.sqrt());
    }

    #[test]
    fn deterministic_for_seed() {
        let b = beam(50.0, 1e-3);
        for mode in [
            GeneratorMode::Independent,
            GeneratorMode::SpinResolved,
            GeneratorMode::NetThinning,
        ] {
            let a = generate_source(&b, 100.0, mode, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            let c = generate_source(&b, 100.0, mode, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            assert_eq!(a, c);
        }
    }
}
