//! Run configuration: `key = value` lines under bracketed section headers.
//!
//! ```text
//! [beam]
//! rate_hz = 5
//! speed_m_s = 1
//! coherence_time_s = 1e-3     # or energy_spread_ev = 0.13 ueV
//!
//! [scan]
//! positions_mm = -2, -1, 0, 1, 2
//! seed = 7
//! ```
//!
//! `#` starts a comment. Energies accept an `eV`, `meV`, `ueV`/`µeV` or `neV`
//! suffix; every other value is in the unit named by its key.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::physics::{
    coherence_time_from_energy_spread, ApparatusParams, BeamParams, ProfileForm,
};
use crate::synth::{DriftKind, DriftProfile, GeneratorMode, ScanConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beam: BeamParams,
    pub apparatus: ApparatusParams,
    pub scan: ScanConfig,
    pub drift: DriftProfile,
    pub form: ProfileForm,
}

const SECTIONS: [&str; 5] = ["beam", "apparatus", "scan", "drift", "fit"];

const KEYS: [&str; 18] = [
    "beam.rate_hz",
    "beam.speed_m_s",
    "beam.energy_spread_ev",
    "beam.coherence_time_s",
    "apparatus.transmission",
    "apparatus.efficiency",
    "apparatus.tau_d_s",
    "apparatus.half_window_s",
    "apparatus.dead_time_s",
    "scan.positions_mm",
    "scan.x0_mm",
    "scan.dwell_s",
    "scan.seed",
    "scan.mode",
    "drift.kind",
    "drift.amplitude",
    "drift.timescale_s",
    "fit.form",
];

struct Entry<'a> {
    value: &'a str,
    line: usize,
    column: usize,
}

struct Parser<'a> {
    path: &'a str,
    entries: HashMap<&'static str, Entry<'a>>,
    end_line: usize,
}

fn err(path: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn column_of(line: &str, sub: &str) -> usize {
    let offset = sub.as_ptr() as usize - line.as_ptr() as usize;
    line[..offset].chars().count() + 1
}

impl<'a> Parser<'a> {
    fn scan(text: &'a str, path: &'a str) -> Result<Self> {
        let mut entries: HashMap<&'static str, Entry<'a>> = HashMap::new();
        let mut section: Option<&str> = None;
        let mut end_line = 1;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            end_line = n + 1;
            let body = line.split('#').next().unwrap_or("");
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            let start = column_of(line, trimmed);
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    err(path, n, start + trimmed.chars().count(), "expected `]`")
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(
                        path,
                        n,
                        start + 1,
                        format!("unknown section `[{name}]`"),
                    ));
                }
                section = Some(name);
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(err(path, n, start, "expected `key = value` or `[section]`"));
            };
            let key = key.trim();
            let value = value.trim();
            let Some(sec) = section else {
                return Err(err(path, n, start, format!("key `{key}` outside any section")));
            };
            let full = format!("{sec}.{key}");
            let Some(&canonical) = KEYS.iter().find(|k| **k == full) else {
                return Err(err(path, n, start, format!("unknown key `{full}`")));
            };
            let column = if value.is_empty() {
                column_of(line, trimmed) + trimmed.chars().count()
            } else {
                column_of(line, value)
            };
            if value.is_empty() {
                return Err(err(path, n, column, format!("`{full}` has no value")));
            }
            if let Some(prev) = entries.get(canonical) {
                return Err(err(
                    path,
                    n,
                    start,
                    format!("duplicate key `{full}` (first set on line {})", prev.line),
                ));
            }
            entries.insert(canonical, Entry { value, line: n, column });
        }
        Ok(Parser {
            path,
            entries,
            end_line,
        })
    }

    fn missing(&self, key: &str) -> Error {
        err(
            self.path,
            self.end_line,
            1,
            format!("missing required key `{key}`"),
        )
    }

    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.get(key)
    }

    fn real_opt(&self, key: &str) -> Result<Option<f64>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        parse_real(e.value)
            .map(Some)
            .ok_or_else(|| err(self.path, e.line, e.column, format!("`{key}`: `{}` is not a finite number", e.value)))
    }

    fn real(&self, key: &str) -> Result<f64> {
        self.real_opt(key)?.ok_or_else(|| self.missing(key))
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        e.value
            .parse()
            .map(Some)
            .map_err(|m: String| err(self.path, e.line, e.column, m))
    }

    fn energy_opt(&self, key: &str) -> Result<Option<(f64, &Entry<'a>)>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        let (num, scale) = [("µeV", 1e-6), ("ueV", 1e-6), ("neV", 1e-9), ("meV", 1e-3), ("eV", 1.0)]
            .iter()
            .find_map(|&(suffix, scale)| e.value.strip_suffix(suffix).map(|n| (n, scale)))
            .unwrap_or((e.value, 1.0));
        let num = num.trim();
        let v = parse_real(num).ok_or_else(|| {
            let bad = num
                .char_indices()
                .find(|&(_, c)| !(c.is_ascii_digit() || "+-.eE".contains(c) || c.is_whitespace()))
                .map_or(0, |(i, _)| num[..i].chars().count());
            err(
                self.path,
                e.line,
                e.column + bad,
                format!("`{key}`: `{}` is not an energy (number with optional eV, meV, ueV or neV)", e.value),
            )
        })?;
        Ok(Some((v * scale, e)))
    }
}

/// Accepts ordinary decimal and exponent notation, rejects inf and nan.
fn parse_real(s: &str) -> Option<f64> {
    let ok = !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'));
    let v: f64 = if ok { s.parse().ok()? } else { return None };
    v.is_finite().then_some(v)
}

pub fn parse_run_config(text: &str, path: &str) -> Result<RunConfig> {
    let p = Parser::scan(text, path)?;

    let spread = p.energy_opt("beam.energy_spread_ev")?;
    let coherence_time_s = match (p.real_opt("beam.coherence_time_s")?, spread) {
        (Some(t), _) => t,
        (None, Some((de, e))) => coherence_time_from_energy_spread(de)
            .map_err(|x| err(path, e.line, e.column, x.to_string()))?,
        (None, None) => {
            return Err(p.missing("beam.coherence_time_s` or `beam.energy_spread_ev"));
        }
    };
    let beam = BeamParams {
        rate_hz: p.real("beam.rate_hz")?,
        speed_m_s: p.real("beam.speed_m_s")?,
        energy_mev: None,
        energy_spread_ev: spread.map(|(v, _)| v),
        coherence_time_s,
    };
    let apparatus = ApparatusParams {
        transmission: p.real("apparatus.transmission")?,
        efficiency: p.real("apparatus.efficiency")?,
        response_time_s: p.real("apparatus.tau_d_s")?,
        half_window_s: p.real("apparatus.half_window_s")?,
        dead_time_s: p.real_opt("apparatus.dead_time_s")?.unwrap_or(0.0),
    };

    let positions = p.get("scan.positions_mm").ok_or_else(|| p.missing("scan.positions_mm"))?;
    let mut positions_mm = Vec::new();
    for item in positions.value.split(',') {
        let t = item.trim();
        let col = positions.column + column_of(positions.value, item) - 1 + (item.len() - item.trim_start().len());
        let v = parse_real(t).ok_or_else(|| {
            err(path, positions.line, col, format!("`scan.positions_mm`: `{t}` is not a finite number"))
        })?;
        positions_mm.push(v);
    }
    let seed_entry = p.get("scan.seed").ok_or_else(|| p.missing("scan.seed"))?;
    let seed: u64 = seed_entry.value.parse().map_err(|_| {
        err(
            path,
            seed_entry.line,
            seed_entry.column,
            format!("`scan.seed`: `{}` is not an unsigned 64-bit integer", seed_entry.value),
        )
    })?;
    let scan = ScanConfig {
        positions_mm,
        x0_true_mm: p.real("scan.x0_mm")?,
        dwell_s: p.real("scan.dwell_s")?,
        seed,
        mode: p.parsed::<GeneratorMode>("scan.mode")?.unwrap_or_default(),
    };

    let kind = p.parsed::<DriftKind>("drift.kind")?.unwrap_or_default();
    let drift = match kind {
        DriftKind::None => {
            for key in ["drift.amplitude", "drift.timescale_s"] {
                if let Some(e) = p.get(key) {
                    return Err(err(path, e.line, e.column, format!("`{key}` set but drift.kind is none")));
                }
            }
            DriftProfile::none()
        }
        _ => DriftProfile {
            kind,
            relative_amplitude: p.real("drift.amplitude")?,
            timescale_s: p.real("drift.timescale_s")?,
        },
    };
    let form = p.parsed::<ProfileForm>("fit.form")?.unwrap_or_default();

    Ok(RunConfig {
        beam,
        apparatus,
        scan,
        drift,
        form,
    })
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let before = &bytes[..e.valid_up_to()];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let column = String::from_utf8_lossy(&before[start..]).chars().count() + 1;
        err(&label, line, column, "invalid UTF-8")
    })?;
    parse_run_config(text, &label)
}

impl RunConfig {
    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let b = &self.beam;
        let a = &self.apparatus;
        let sc = &self.scan;
        let _ = writeln!(s, "[beam]");
        let _ = writeln!(s, "rate_hz = {}", b.rate_hz);
        let _ = writeln!(s, "speed_m_s = {}", b.speed_m_s);
        if let Some(de) = b.energy_spread_ev {
            let _ = writeln!(s, "energy_spread_ev = {de}");
        }
        let _ = writeln!(s, "coherence_time_s = {}", b.coherence_time_s);
        let _ = writeln!(s, "\n[apparatus]");
        let _ = writeln!(s, "transmission = {}", a.transmission);
        let _ = writeln!(s, "efficiency = {}", a.efficiency);
        let _ = writeln!(s, "tau_d_s = {}", a.response_time_s);
        let _ = writeln!(s, "half_window_s = {}", a.half_window_s);
        let _ = writeln!(s, "dead_time_s = {}", a.dead_time_s);
        let _ = writeln!(s, "\n[scan]");
        let pos: Vec<String> = sc.positions_mm.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "positions_mm = {}", pos.join(", "));
        let _ = writeln!(s, "x0_mm = {}", sc.x0_true_mm);
        let _ = writeln!(s, "dwell_s = {}", sc.dwell_s);
        let _ = writeln!(s, "seed = {}", sc.seed);
        let _ = writeln!(s, "mode = {}", sc.mode.as_str());
        let _ = writeln!(s, "\n[drift]");
        let _ = writeln!(s, "kind = {}", self.drift.kind.as_str());
        if self.drift.kind != DriftKind::None {
            let _ = writeln!(s, "amplitude = {}", self.drift.relative_amplitude);
            let _ = writeln!(s, "timescale_s = {}", self.drift.timescale_s);
        }
        let _ = writeln!(s, "\n[fit]");
        let _ = writeln!(s, "form = {}", self.form.as_str());
        s
    }
}
