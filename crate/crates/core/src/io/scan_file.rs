//! Scan CSV: one row per detector position.
//!
//! ```text
//! x_mm,n_c,n_t,n_d,duration_s
//! -2,1034,51211,50877,64000
//! ```

use std::fs;
use std::path::Path;

use crate::coincidence::ScanRow;
use crate::error::{Error, Result};

pub const SCAN_HEADER: &str = "x_mm,n_c,n_t,n_d,duration_s";

const FIELDS: [&str; 5] = ["x_mm", "n_c", "n_t", "n_d", "duration_s"];

/// Renders rows as CSV. Reals use the shortest representation that parses
/// back to the same value.
pub fn format_scan(rows: &[ScanRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let as_csv = |e: csv::Error| Error::EventFormat(e.to_string());
    w.write_record(FIELDS).map_err(as_csv)?;
    for r in rows {
        if !r.x_mm.is_finite() {
            return Err(Error::param("x_mm", r.x_mm, "must be finite"));
        }
        if !(r.duration_s.is_finite() && r.duration_s > 0.0) {
            return Err(Error::param("duration_s", r.duration_s, "must be finite and > 0"));
        }
        w.write_record([
            r.x_mm.to_string(),
            r.n_c.to_string(),
            r.n_t.to_string(),
            r.n_d.to_string(),
            r.duration_s.to_string(),
        ])
        .map_err(as_csv)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::EventFormat(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

fn parse_err(path: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Parses scan CSV text; `path` only labels diagnostics.
pub fn parse_scan(text: &str, path: &str) -> Result<Vec<ScanRow>> {
    if text.is_empty() {
        return Err(parse_err(path, 1, 1, "empty file, expected header"));
    }
    if !text.ends_with('\n') {
        let line = text.lines().count();
        let column = text.lines().last().map_or(0, |l| l.chars().count()) + 1;
        return Err(parse_err(path, line, column, "final row is not newline-terminated"));
    }
    let mut rows = Vec::new();
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line = i + 1;
        let content = raw.strip_suffix('\n').unwrap_or(raw);
        if let Some(pos) = content.find('\r') {
            return Err(parse_err(path, line, pos + 1, "carriage return not allowed"));
        }
        if line == 1 {
            if content != SCAN_HEADER {
                let column = content
                    .chars()
                    .zip(SCAN_HEADER.chars())
                    .take_while(|(a, b)| a == b)
                    .count()
                    + 1;
                return Err(parse_err(
                    path,
                    line,
                    column,
                    format!("header must be exactly `{SCAN_HEADER}`"),
                ));
            }
            continue;
        }
        rows.push(parse_row(content, path, line)?);
    }
    Ok(rows)
}

fn parse_row(content: &str, path: &str, line: usize) -> Result<ScanRow> {
    if content.is_empty() {
        return Err(parse_err(path, line, 1, "empty row"));
    }
    let mut fields = Vec::with_capacity(FIELDS.len());
    let mut column = 1;
    for f in content.split(',') {
        fields.push((f, column));
        column += f.chars().count() + 1;
    }
    if fields.len() != FIELDS.len() {
        let col = if fields.len() > FIELDS.len() {
            fields[FIELDS.len()].1
        } else {
            column - 1
        };
        return Err(parse_err(
            path,
            line,
            col,
            format!("expected {} fields, found {}", FIELDS.len(), fields.len()),
        ));
    }
    let real = |k: usize| -> Result<f64> {
        let (s, col) = fields[k];
        let v: f64 = s
            .parse()
            .map_err(|_| parse_err(path, line, col, format!("{}: `{s}` is not a number", FIELDS[k])))?;
        if !v.is_finite() {
            return Err(parse_err(path, line, col, format!("{}: must be finite", FIELDS[k])));
        }
        Ok(v)
    };
    let count = |k: usize| -> Result<u64> {
        let (s, col) = fields[k];
        if !s.bytes().all(|b| b.is_ascii_digit()) || s.is_empty() {
            return Err(parse_err(
                path,
                line,
                col,
                format!("{}: `{s}` is not a non-negative integer", FIELDS[k]),
            ));
        }
        s.parse()
            .map_err(|_| parse_err(path, line, col, format!("{}: `{s}` out of range", FIELDS[k])))
    };
    let row = ScanRow {
        x_mm: real(0)?,
        n_c: count(1)?,
        n_t: count(2)?,
        n_d: count(3)?,
        duration_s: real(4)?,
    };
    if row.duration_s <= 0.0 {
        return Err(parse_err(path, line, fields[4].1, "duration_s: must be > 0"));
    }
    Ok(row)
}

pub fn write_scan_file(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let text = format_scan(rows)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_scan_file(path: &Path) -> Result<Vec<ScanRow>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let before = &bytes[..e.valid_up_to()];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let column = String::from_utf8_lossy(&before[start..]).chars().count() + 1;
        parse_err(&label, line, column, "invalid UTF-8")
    })?;
    parse_scan(text, &label)
}
