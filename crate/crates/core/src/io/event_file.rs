//! Binary time-tag file.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `NEVT`                            |
//! | 4      | 2    | format version, `1`                     |
//! | 6      | 2    | reserved, zero                          |
//! | 8 + 9k | 1    | channel: 0 = D1 transmitted, 1 = D2      |
//! | 9 + 9k | 8    | timestamp, picoseconds from run start   |
//!
//! Records are sorted by timestamp, ties broken by channel.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{Channel, EventStream};

pub const MAGIC: [u8; 4] = *b"NEVT";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8;
pub const RECORD_LEN: usize = 9;

const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRecord {
    pub timestamp_ps: u64,
    pub channel: Channel,
}

pub fn seconds_to_ps(t: f64) -> Result<u64> {
    let ps = (t * PS_PER_S).round();
    if !(ps >= 0.0 && ps < u64::MAX as f64) {
        return Err(Error::param("timestamp", t, "must be in [0, 2^64) ps"));
    }
    Ok(ps as u64)
}

pub fn ps_to_seconds(ps: u64) -> f64 {
    ps as f64 / PS_PER_S
}

/// Merges two arms into records in file order.
pub fn records_from_streams(d1: &[f64], d2: &[f64]) -> Result<Vec<EventRecord>> {
    let mut out = Vec::with_capacity(d1.len() + d2.len());
    for (ts, channel) in [(d1, Channel::Transmitted), (d2, Channel::Reflected)] {
        for &t in ts {
            out.push(EventRecord {
                timestamp_ps: seconds_to_ps(t)?,
                channel,
            });
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Splits records into the two arms, timestamps in seconds.
pub fn streams_from_records(records: &[EventRecord]) -> (EventStream, EventStream) {
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for r in records {
        match r.channel {
            Channel::Transmitted => d1.push(ps_to_seconds(r.timestamp_ps)),
            Channel::Reflected => d2.push(ps_to_seconds(r.timestamp_ps)),
        }
    }
    (
        EventStream::new(Channel::Transmitted, d1),
        EventStream::new(Channel::Reflected, d2),
    )
}

fn check_order(records: &[EventRecord]) -> Result<()> {
    match records.windows(2).position(|w| w[0] > w[1]) {
        Some(i) => Err(Error::EventFormat(format!(
            "record {} is out of order (timestamp {} ps, channel {})",
            i + 1,
            records[i + 1].timestamp_ps,
            records[i + 1].channel.code()
        ))),
        None => Ok(()),
    }
}

pub fn encode(records: &[EventRecord]) -> Result<Vec<u8>> {
    check_order(records)?;
    let mut buf = Vec::with_capacity(HEADER_LEN + RECORD_LEN * records.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    for r in records {
        buf.push(r.channel.code());
        buf.extend_from_slice(&r.timestamp_ps.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<EventRecord>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::EventFormat(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::EventFormat(format!("bad magic {:02x?}", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::EventFormat(format!("unsupported version {version}")));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::EventFormat("reserved header bytes are not zero".into()));
    }
    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::EventFormat(format!(
            "truncated record: {} trailing bytes",
            body.len() % RECORD_LEN
        )));
    }
    let mut out = Vec::with_capacity(body.len() / RECORD_LEN);
    for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
        let channel = Channel::from_code(rec[0]).ok_or_else(|| {
            Error::EventFormat(format!("record {i}: unknown channel {}", rec[0]))
        })?;
        let timestamp_ps = u64::from_le_bytes(rec[1..].try_into().expect("8 bytes"));
        out.push(EventRecord {
            timestamp_ps,
            channel,
        });
    }
    check_order(&out)?;
    Ok(out)
}

pub fn write_event_file(path: &Path, records: &[EventRecord]) -> Result<()> {
    let bytes = encode(records)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_event_file(path: &Path) -> Result<Vec<EventRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
