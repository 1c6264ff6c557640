use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coincidence::{count_coincidences_with, ScanRow};
use crate::error::{require_positive, Error, Result};
use crate::events::{Channel, EventStream};
use crate::exec::{map_indices, Execution};
use crate::physics::{ApparatusParams, BeamParams, Warning};

use super::detector::{detect, split_beam};
use super::drift::{Drift, DriftProfile};
use super::source::{check_density, generate_source_drifting, GeneratorMode};

/// Movable-detector scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub positions_mm: Vec<f64>,
    pub x0_true_mm: f64,
    /// Acquisition time per position.
    pub dwell_s: f64,
    pub seed: u64,
    pub mode: GeneratorMode,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.positions_mm.is_empty() {
            return Err(Error::InsufficientData("scan has no positions".into()));
        }
        for (i, &x) in self.positions_mm.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::param("scan.positions_mm", x, "must be finite"));
            }
            if self.positions_mm[..i].contains(&x) {
                return Err(Error::param("scan.positions_mm", x, "positions must be distinct"));
            }
        }
        if !self.x0_true_mm.is_finite() {
            return Err(Error::param("scan.x0_mm", self.x0_true_mm, "must be finite"));
        }
        require_positive("scan.dwell_s", self.dwell_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Source = 0,
    Split = 1,
    DetectTransmitted = 2,
    DetectReflected = 3,
}

/// Independent RNG for one stage of one scan position.
fn substream(seed: u64, index: usize, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 * 4 + stage as u64);
    rng
}

/// Detected events at one scan position, with timestamps local to that position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEvents {
    pub index: usize,
    pub x_mm: f64,
    /// Arrival delay of D1 relative to D2 implied by the position.
    pub delay_s: f64,
    pub source_count: usize,
    pub transmitted: EventStream,
    pub reflected: EventStream,
}

impl PositionEvents {
    /// Both arms on a common clock with D1 delayed by [`PositionEvents::delay_s`],
    /// shifted together so that no timestamp is negative.
    pub fn delayed_streams(&self) -> (EventStream, EventStream) {
        let lead = (-self.delay_s).max(0.0);
        let d1: Vec<f64> = self
            .transmitted
            .iter()
            .map(|t| t + self.delay_s + lead)
            .collect();
        let d2: Vec<f64> = self.reflected.iter().map(|t| t + lead).collect();
        (
            EventStream::new(Channel::Transmitted, d1),
            EventStream::new(Channel::Reflected, d2),
        )
    }
}

/// Validated scan set-up; rows can be produced in any order.
#[derive(Debug, Clone)]
pub struct ScanSimulator {
    scan: ScanConfig,
    beam: BeamParams,
    apparatus: ApparatusParams,
    drift: Drift,
    warnings: Vec<Warning>,
}

impl ScanSimulator {
    pub fn new(
        scan: ScanConfig,
        beam: BeamParams,
        apparatus: ApparatusParams,
        drift: DriftProfile,
    ) -> Result<Self> {
        let mut warnings = beam.validate()?;
        warnings.extend(apparatus.validate(&beam)?);
        scan.validate()?;
        drift.validate(apparatus.coincidence_window_s())?;
        check_density(&beam, scan.mode)?;
        let horizon = scan.positions_mm.len() as f64 * scan.dwell_s;
        let drift = Drift::new(drift, scan.seed, horizon);
        Ok(ScanSimulator {
            scan,
            beam,
            apparatus,
            drift,
            warnings,
        })
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn scan(&self) -> &ScanConfig {
        &self.scan
    }

    pub fn beam(&self) -> &BeamParams {
        &self.beam
    }

    pub fn apparatus(&self) -> &ApparatusParams {
        &self.apparatus
    }

    pub fn len(&self) -> usize {
        self.scan.positions_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scan.positions_mm.is_empty()
    }

    /// D1 delay for scan position `x_mm`: `(x - x0) / v`.
    pub fn delay_for(&self, x_mm: f64) -> f64 {
        (x_mm - self.scan.x0_true_mm) * 1e-3 / self.beam.speed_m_s
    }

    /// Source, split and both detectors for position `index`. Position `i`
    /// is acquired during `[i * dwell, (i + 1) * dwell)` of the drift clock.
    pub fn position_events(&self, index: usize) -> Result<PositionEvents> {
        let x_mm = *self.scan.positions_mm.get(index).ok_or_else(|| {
            Error::param("position index", index as f64, "out of range")
        })?;
        let dwell = self.scan.dwell_s;
        let source = generate_source_drifting(
            &self.beam,
            dwell,
            self.scan.mode,
            &self.drift,
            index as f64 * dwell,
            &mut substream(self.scan.seed, index, Stage::Source),
        )?;
        let (t, r) = split_beam(
            &source,
            self.apparatus.transmission,
            &mut substream(self.scan.seed, index, Stage::Split),
        )?;
        let transmitted = detect(
            &t,
            &self.apparatus,
            &mut substream(self.scan.seed, index, Stage::DetectTransmitted),
        )?;
        let reflected = detect(
            &r,
            &self.apparatus,
            &mut substream(self.scan.seed, index, Stage::DetectReflected),
        )?;
        Ok(PositionEvents {
            index,
            x_mm,
            delay_s: self.delay_for(x_mm),
            source_count: source.len(),
            transmitted,
            reflected,
        })
    }

    pub fn row(&self, index: usize) -> Result<ScanRow> {
        let ev = self.position_events(index)?;
        // delaying D1 by d is a window offset of -d
        let n_c = count_coincidences_with(
            &ev.transmitted,
            &ev.reflected,
            self.apparatus.half_window_s,
            -ev.delay_s,
            Execution::Sequential,
        )?;
        Ok(ScanRow {
            x_mm: ev.x_mm,
            n_c,
            n_t: ev.transmitted.len() as u64,
            n_d: ev.reflected.len() as u64,
            duration_s: self.scan.dwell_s,
        })
    }

    pub fn run(&self, exec: Execution) -> Result<Vec<ScanRow>> {
        map_indices(self.len(), exec, |i| self.row(i))
            .into_iter()
            .collect()
    }
}

/// Simulates every position of `scan` and returns one row per position.
pub fn simulate_scan(
    scan: &ScanConfig,
    beam: &BeamParams,
    apparatus: &ApparatusParams,
    drift: &DriftProfile,
) -> Result<Vec<ScanRow>> {
    ScanSimulator::new(scan.clone(), beam.clone(), apparatus.clone(), *drift)?
        .run(Execution::default())
}
