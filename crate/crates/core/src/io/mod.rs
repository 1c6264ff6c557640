//! On-disk formats: binary event files, scan CSV and run configuration.

mod config;
mod event_file;
mod scan_file;

pub use config::{parse_run_config, read_run_config, RunConfig};
pub use event_file::{
    decode, encode, ps_to_seconds, read_event_file, records_from_streams, seconds_to_ps,
    streams_from_records, write_event_file, EventRecord, FORMAT_VERSION, HEADER_LEN, MAGIC,
    RECORD_LEN,
};
pub use scan_file::{format_scan, parse_scan, read_scan_file, write_scan_file, SCAN_HEADER};
