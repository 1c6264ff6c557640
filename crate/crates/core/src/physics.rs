//! Closed-form model of the two-detector coincidence experiment.
//!
//! Everything here is a pure function of its arguments. Times are in seconds,
//! rates in events per second, positions in millimetres and energies in eV.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{require_positive, Error, Result};

/// Fixed physical constants.
#[derive(Debug, Clone, Copy)]
pub struct PhysConstants;

impl PhysConstants {
    /// Reduced Planck constant, CODATA 2018, in eV·s.
    pub const HBAR_EV_S: f64 = 6.582119569e-16;
}

/// Two-particle correlation channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinMode {
    /// Spin-unpolarized beam: net suppression of one half at zero lag.
    Unpolarized,
    /// Both particles in the same spin state: full suppression at zero lag.
    SameSpin,
}

/// Analytic form of the coincidence-versus-lag profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileForm {
    /// Large-response-time limit: depth tau_c / (2 tau_D) and width tau_D.
    #[default]
    PaperApprox,
    /// Exact Gaussian-by-Gaussian convolution.
    ExactConvolution,
}

impl ProfileForm {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileForm::PaperApprox => "paper_approx",
            ProfileForm::ExactConvolution => "exact_convolution",
        }
    }
}

impl std::str::FromStr for ProfileForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper_approx" => Ok(ProfileForm::PaperApprox),
            "exact_convolution" => Ok(ProfileForm::ExactConvolution),
            other => Err(format!(
                "unknown profile form `{other}` (expected paper_approx or exact_convolution)"
            )),
        }
    }
}

impl fmt::Display for ProfileForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-fatal findings from parameter validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Coherence time is shorter than hbar / (2 dE).
    CoherenceBelowBound { coherence_time: f64, bound: f64 },
    /// The coincidence half-window is narrower than the response time.
    WindowClipsResponse { half_window: f64, response_time: f64 },
    /// Response time shorter than the coherence time; the large-tau_D profile is unreliable.
    ResponseShorterThanCoherence { response_time: f64, coherence_time: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::CoherenceBelowBound {
                coherence_time,
                bound,
            } => write!(
                f,
                "coherence time {coherence_time:e} s is below the energy-spread bound {bound:e} s"
            ),
            Warning::WindowClipsResponse {
                half_window,
                response_time,
            } => write!(
                f,
                "half window {half_window:e} s is shorter than response time {response_time:e} s"
            ),
            Warning::ResponseShorterThanCoherence {
                response_time,
                coherence_time,
            } => write!(
                f,
                "response time {response_time:e} s is shorter than coherence time {coherence_time:e} s"
            ),
        }
    }
}

/// Source beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamParams {
    pub rate_hz: f64,
    pub speed_m_s: f64,
    /// Mean energy in meV. Informational only.
    pub energy_mev: Option<f64>,
    pub energy_spread_ev: Option<f64>,
    pub coherence_time_s: f64,
}

impl BeamParams {
    /// Backscattering monochromator beam: 2000 /s, 630 m/s, 2.08 meV, 0.13 µeV spread.
    pub fn reactor_reference() -> Self {
        let spread = 0.13e-6;
        BeamParams {
            rate_hz: 2000.0,
            speed_m_s: 630.0,
            energy_mev: Some(2.08),
            energy_spread_ev: Some(spread),
            coherence_time_s: PhysConstants::HBAR_EV_S / (2.0 * spread),
        }
    }

    pub fn validate(&self) -> Result<Vec<Warning>> {
        require_positive("beam.rate_hz", self.rate_hz)?;
        require_positive("beam.speed_m_s", self.speed_m_s)?;
        require_positive("beam.coherence_time_s", self.coherence_time_s)?;
        if let Some(e) = self.energy_mev {
            require_positive("beam.energy_mev", e)?;
        }
        let mut warnings = Vec::new();
        if let Some(de) = self.energy_spread_ev {
            let bound = coherence_time_from_energy_spread(de)?;
            if self.coherence_time_s < bound {
                warnings.push(Warning::CoherenceBelowBound {
                    coherence_time: self.coherence_time_s,
                    bound,
                });
            }
        }
        Ok(warnings)
    }

    pub fn coherence_length_m(&self) -> f64 {
        coherence_length(self.speed_m_s, self.coherence_time_s)
    }
}

/// Splitter, detectors and coincidence electronics.
#[derive(Debug, Clone, PartialEq)]
pub struct ApparatusParams {
    /// Probability that a source event goes to the transmitted arm (D1).
    pub transmission: f64,
    pub efficiency: f64,
    /// Combined two-detector response time tau_D.
    pub response_time_s: f64,
    /// Half of the coincidence window, i.e. the `±` acceptance.
    pub half_window_s: f64,
    pub dead_time_s: f64,
}

impl ApparatusParams {
    pub fn validate(&self, beam: &BeamParams) -> Result<Vec<Warning>> {
        if !(self.transmission > 0.0 && self.transmission < 1.0) {
            return Err(Error::param(
                "apparatus.transmission",
                self.transmission,
                "must lie in (0, 1)",
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::param(
                "apparatus.efficiency",
                self.efficiency,
                "must lie in (0, 1]",
            ));
        }
        require_positive("apparatus.tau_d_s", self.response_time_s)?;
        require_positive("apparatus.half_window_s", self.half_window_s)?;
        if !(self.dead_time_s.is_finite() && self.dead_time_s >= 0.0) {
            return Err(Error::param(
                "apparatus.dead_time_s",
                self.dead_time_s,
                "must be finite and >= 0",
            ));
        }
        let mut warnings = Vec::new();
        if self.half_window_s < self.response_time_s {
            warnings.push(Warning::WindowClipsResponse {
                half_window: self.half_window_s,
                response_time: self.response_time_s,
            });
        }
        if self.response_time_s < beam.coherence_time_s {
            warnings.push(Warning::ResponseShorterThanCoherence {
                response_time: self.response_time_s,
                coherence_time: beam.coherence_time_s,
            });
        }
        Ok(warnings)
    }

    /// Full coincidence window, twice the half-window.
    pub fn coincidence_window_s(&self) -> f64 {
        2.0 * self.half_window_s
    }

    /// Detected singles rates `(n_t, n_d)` in the two arms.
    pub fn arm_rates(&self, beam: &BeamParams) -> (f64, f64) {
        let n = beam.rate_hz * self.efficiency;
        (self.transmission * n, (1.0 - self.transmission) * n)
    }
}

/// One-sigma uncertainties of [`DipModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipUncertainty {
    pub n_inf: f64,
    pub tau_d: f64,
    pub tau_c: f64,
    pub x0_mm: f64,
}

/// Parameters of the coincidence dip: plateau, response time, coherence time, centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipModelParams {
    pub n_inf: f64,
    pub tau_d: f64,
    pub tau_c: f64,
    pub x0_mm: f64,
    pub uncertainty: Option<DipUncertainty>,
}

impl DipModelParams {
    pub fn new(n_inf: f64, tau_d: f64, tau_c: f64, x0_mm: f64) -> Self {
        DipModelParams {
            n_inf,
            tau_d,
            tau_c,
            x0_mm,
            uncertainty: None,
        }
    }

    /// Scintillator detector fit set.
    pub fn scintillator_reference() -> Self {
        DipModelParams::new(993.7, 0.33e-6, 19e-9, 1.93)
    }

    /// Helium-3 gas detector fit set.
    pub fn helium3_reference() -> Self {
        DipModelParams::new(34720.0, 1.3e-6, 20e-9, 2.1)
    }

    /// Relative depth of the dip at zero lag in the large-tau_D form.
    pub fn depth(&self) -> f64 {
        self.tau_c / (2.0 * self.tau_d)
    }

    pub fn validate(&self) -> Result<Vec<Warning>> {
        require_positive("n_inf", self.n_inf)?;
        require_positive("tau_d", self.tau_d)?;
        require_positive("tau_c", self.tau_c)?;
        if !self.x0_mm.is_finite() {
            return Err(Error::param("x0_mm", self.x0_mm, "must be finite"));
        }
        let mut warnings = Vec::new();
        if self.tau_c > self.tau_d {
            warnings.push(Warning::ResponseShorterThanCoherence {
                response_time: self.tau_d,
                coherence_time: self.tau_c,
            });
        }
        Ok(warnings)
    }
}

#[inline]
pub(crate) fn pair_correlation_unchecked(t: f64, tau_c: f64, mode: SpinMode) -> f64 {
    let g = (-t * t / (2.0 * tau_c * tau_c)).exp();
    match mode {
        SpinMode::Unpolarized => 1.0 - 0.5 * g,
        SpinMode::SameSpin => 1.0 - g,
    }
}

/// Normalized pair correlation C(t) at lag `t`.
pub fn pair_correlation(t: f64, tau_c: f64, mode: SpinMode) -> Result<f64> {
    require_positive("tau_c", tau_c)?;
    Ok(pair_correlation_unchecked(t, tau_c, mode))
}

/// Gaussian apparatus response R(t), normalized to unit area.
pub fn response_density(t: f64, tau_d: f64) -> Result<f64> {
    require_positive("tau_d", tau_d)?;
    Ok((-t * t / (2.0 * tau_d * tau_d)).exp() / ((2.0 * PI).sqrt() * tau_d))
}

#[inline]
pub(crate) fn relative_profile(t: f64, tau_d: f64, tau_c: f64, form: ProfileForm) -> f64 {
    match form {
        ProfileForm::PaperApprox => {
            1.0 - tau_c / (2.0 * tau_d) * (-t * t / (2.0 * tau_d * tau_d)).exp()
        }
        ProfileForm::ExactConvolution => {
            let s2 = tau_c * tau_c + tau_d * tau_d;
            1.0 - 0.5 * tau_c / s2.sqrt() * (-t * t / (2.0 * s2)).exp()
        }
    }
}

/// Expected coincidence count at lag `t` for the given dip parameters.
pub fn expected_profile(t: f64, p: &DipModelParams, form: ProfileForm) -> Result<f64> {
    p.validate()?;
    Ok(p.n_inf * relative_profile(t, p.tau_d, p.tau_c, form))
}

/// Numerical value of the convolution `∫ R(s) C(t - s) ds`, by composite
/// 8-point Gauss–Legendre over ±12 tau_D with panels a quarter of the
/// shorter time constant wide.
pub fn convolve_numeric(t: f64, tau_c: f64, tau_d: f64) -> Result<f64> {
    require_positive("tau_c", tau_c)?;
    require_positive("tau_d", tau_d)?;
    const NODES: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const WEIGHTS: [f64; 4] = [
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let lo = -12.0 * tau_d;
    let hi = 12.0 * tau_d;
    let panels = ((hi - lo) / (0.25 * tau_c.min(tau_d))).ceil() as usize;
    let h = (hi - lo) / panels as f64;
    let f = |s: f64| {
        response_density(s, tau_d).unwrap_or(0.0)
            * pair_correlation_unchecked(t - s, tau_c, SpinMode::Unpolarized)
    };
    let mut total = 0.0;
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut panel = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
            panel += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += panel * half;
    }
    Ok(total)
}

/// Coincidences from uncorrelated arrivals in an acceptance of width `tau`.
pub fn accidental_count(tau: f64, n_t: f64, n_d: f64, t0: f64) -> f64 {
    tau * n_t * n_d * t0
}

/// Magnitude of the coincidence reduction caused by antibunching.
pub fn antibunching_deficit(tau_c: f64, n_t: f64, n_d: f64, t0: f64) -> f64 {
    0.5 * tau_c * n_t * n_d * t0
}

/// Ratio of the rms coincidence fluctuation to the antibunching deficit.
pub fn noise_to_signal(tau_d: f64, tau_c: f64, n_t: f64, n_d: f64, t0: f64) -> f64 {
    2.0 * tau_d.sqrt() / (tau_c * (n_t * n_d * t0).sqrt())
}

/// Measurement time at which [`noise_to_signal`] equals `target_ratio`.
pub fn required_measurement_time(
    target_ratio: f64,
    tau_d: f64,
    tau_c: f64,
    n_t: f64,
    n_d: f64,
) -> f64 {
    4.0 * tau_d / (target_ratio * target_ratio * tau_c * tau_c * n_t * n_d)
}

/// Lower bound on the coherence time set by an energy spread `de_ev` (in eV).
pub fn coherence_time_from_energy_spread(de_ev: f64) -> Result<f64> {
    require_positive("energy_spread_ev", de_ev)?;
    Ok(PhysConstants::HBAR_EV_S / (2.0 * de_ev))
}

pub fn coherence_length(speed_m_s: f64, tau_c: f64) -> f64 {
    speed_m_s * tau_c
}
