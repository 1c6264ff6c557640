use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest relative drift amplitude accepted.
pub const MAX_DRIFT_AMPLITUDE: f64 = 0.2;
/// Drift must be slower than the coincidence window by at least this factor.
pub const MIN_TIMESCALE_RATIO: f64 = 1e4;

const RANDOM_WALK_STREAM: u64 = u64::MAX;
const STEPS_PER_TIMESCALE: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftKind {
    #[default]
    None,
    /// `1 + a sin(2π t / timescale)`.
    Sinusoidal,
    /// Mean-reverting walk with correlation time `timescale`, clamped to `1 ± a`.
    RandomWalk,
}

impl std::str::FromStr for DriftKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(DriftKind::None),
            "sinusoidal" => Ok(DriftKind::Sinusoidal),
            "random_walk" => Ok(DriftKind::RandomWalk),
            other => Err(format!(
                "unknown drift kind `{other}` (expected none, sinusoidal or random_walk)"
            )),
        }
    }
}

impl DriftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::None => "none",
            DriftKind::Sinusoidal => "sinusoidal",
            DriftKind::RandomWalk => "random_walk",
        }
    }
}

/// Slow modulation of the source rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftProfile {
    pub kind: DriftKind,
    pub relative_amplitude: f64,
    pub timescale_s: f64,
}

impl Default for DriftProfile {
    fn default() -> Self {
        DriftProfile::none()
    }
}

impl DriftProfile {
    pub fn none() -> Self {
        DriftProfile {
            kind: DriftKind::None,
            relative_amplitude: 0.0,
            timescale_s: 1.0,
        }
    }

    pub fn sinusoidal(amplitude: f64, period_s: f64) -> Self {
        DriftProfile {
            kind: DriftKind::Sinusoidal,
            relative_amplitude: amplitude,
            timescale_s: period_s,
        }
    }

    pub fn random_walk(amplitude: f64, timescale_s: f64) -> Self {
        DriftProfile {
            kind: DriftKind::RandomWalk,
            relative_amplitude: amplitude,
            timescale_s,
        }
    }

    pub fn validate(&self, coincidence_window_s: f64) -> Result<()> {
        if self.kind == DriftKind::None {
            return Ok(());
        }
        let a = self.relative_amplitude;
        if !(0.0..=MAX_DRIFT_AMPLITUDE).contains(&a) {
            return Err(Error::param(
                "drift.amplitude",
                a,
                "must lie in [0, 0.2]",
            ));
        }
        if !(self.timescale_s.is_finite()
            && self.timescale_s >= MIN_TIMESCALE_RATIO * coincidence_window_s)
        {
            return Err(Error::param(
                "drift.timescale_s",
                self.timescale_s,
                "must be at least 1e4 coincidence windows",
            ));
        }
        Ok(())
    }
}

/// A realized drift: the multiplier as a deterministic function of time.
#[derive(Debug, Clone)]
pub struct Drift {
    profile: DriftProfile,
    path: Vec<f64>,
    step: f64,
}

impl Drift {
    /// Realizes `profile` over `[0, horizon_s]`. Only the random walk uses `seed`.
    pub fn new(profile: DriftProfile, seed: u64, horizon_s: f64) -> Drift {
        let mut drift = Drift {
            profile,
            path: Vec::new(),
            step: profile.timescale_s / STEPS_PER_TIMESCALE,
        };
        if profile.kind == DriftKind::RandomWalk && profile.relative_amplitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(RANDOM_WALK_STREAM);
            let sd = profile.relative_amplitude / 3.0;
            let decay = (-1.0 / STEPS_PER_TIMESCALE).exp();
            let kick = sd * (1.0 - decay * decay).sqrt();
            let n = (horizon_s.max(0.0) / drift.step).ceil() as usize + 2;
            let first: f64 = StandardNormal.sample(&mut rng);
            let mut dev = sd * first;
            drift.path.reserve(n);
            for _ in 0..n {
                drift.path.push(dev);
                let xi: f64 = StandardNormal.sample(&mut rng);
                dev = dev * decay + kick * xi;
            }
        }
        drift
    }

    pub fn none() -> Drift {
        Drift::new(DriftProfile::none(), 0, 0.0)
    }

    pub fn profile(&self) -> &DriftProfile {
        &self.profile
    }

    /// Upper bound of [`Drift::multiplier`].
    pub fn max_multiplier(&self) -> f64 {
        match self.profile.kind {
            DriftKind::None => 1.0,
            _ => 1.0 + self.profile.relative_amplitude,
        }
    }

    /// Instantaneous rate multiplier at absolute time `t`.
    pub fn multiplier(&self, t: f64) -> f64 {
        let a = self.profile.relative_amplitude;
        match self.profile.kind {
            DriftKind::None => 1.0,
            DriftKind::Sinusoidal => 1.0 + a * (2.0 * PI * t / self.profile.timescale_s).sin(),
            DriftKind::RandomWalk => {
                if self.path.is_empty() {
                    return 1.0;
                }
                let u = (t / self.step).max(0.0);
                let k = (u as usize).min(self.path.len() - 1);
                let next = (k + 1).min(self.path.len() - 1);
                let frac = (u - k as f64).clamp(0.0, 1.0);
                let dev = self.path[k] + frac * (self.path[next] - self.path[k]);
                1.0 + dev.clamp(-a, a)
            }
        }
    }

    /// Instantaneous source rate for base rate `rate_hz`.
    pub fn apply(&self, rate_hz: f64, t: f64) -> f64 {
        rate_hz * self.multiplier(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(d: &Drift, horizon: f64) -> f64 {
        let n = 200_000;
        (0..n)
            .map(|i| d.multiplier((i as f64 + 0.5) * horizon / n as f64))
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn none_is_unity() {
        let d = Drift::none();
        for t in [0.0, 1.0, 1e9] {
            assert_eq!(d.multiplier(t), 1.0);
        }
    }

    #[test]
    fn sinusoid_bounded_with_unit_mean() {
        let d = Drift::new(DriftProfile::sinusoidal(0.1, 500.0), 0, 0.0);
        let m = mean(&d, 50_000.0);
        assert!((m - 1.0).abs() < 1e-6);
        for i in 0..10_000 {
            let v = d.multiplier(i as f64 * 0.77);
            assert!((0.9..=1.1).contains(&v));
        }
    }

    #[test]
    fn random_walk_clamped_and_reproducible() {
        let profile = DriftProfile::random_walk(0.1, 100.0);
        let d = Drift::new(profile, 42, 1e6);
        let again = Drift::new(profile, 42, 1e6);
        let other = Drift::new(profile, 43, 1e6);
        let mut differs = false;
        for i in 0..20_000 {
            let t = i as f64 * 50.0;
            let v = d.multiplier(t);
            assert!((0.9..=1.1).contains(&v));
            assert_eq!(v, again.multiplier(t));
            differs |= v != other.multiplier(t);
        }
        assert!(differs);
        assert!((mean(&d, 1e6) - 1.0).abs() < 0.01);
    }

    #[test]
    fn validation() {
        assert!(DriftProfile::sinusoidal(0.3, 1e3).validate(1e-3).is_err());
        assert!(DriftProfile::sinusoidal(0.1, 1.0).validate(1e-3).is_err());
        assert!(DriftProfile::sinusoidal(0.1, 10.0).validate(1e-3).is_ok());
        assert!(DriftProfile::none().validate(1.0).is_ok());
    }
}
