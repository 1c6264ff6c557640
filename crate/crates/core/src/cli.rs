//! Command-line front end.
//!
//! Every subcommand prints `key=value` lines on standard output and
//! diagnostics on standard error. Exit codes:
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success                                                   |
//! | 1    | a validation check or `--oracle` comparison failed        |
//! | 2    | invalid config, malformed input file or bad argument      |
//! | 3    | I/O failure                                               |
//! | 4    | physics precondition violated (e.g. density too high)     |
//! | 5    | fit did not converge                                      |
//! | 6    | dip model not identifiable from the data                  |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::coincidence::{
    brute_force_count, count_coincidences, drift_correct, lag_histogram, DriftReference, ScanRow,
};
use crate::error::Error;
use crate::exec::Execution;
use crate::fit::{fit_dip, points_from_corrected, FitConfig, FitResult, ScanPoint};
use crate::io::{
    read_event_file, read_run_config, read_scan_file, records_from_streams, streams_from_records,
    write_event_file, write_scan_file, EventRecord, RunConfig,
};
use crate::physics::{
    accidental_count, antibunching_deficit, coherence_time_from_energy_spread, noise_to_signal,
    required_measurement_time, ApparatusParams, BeamParams, ProfileForm,
};
use crate::synth::ScanSimulator;
use crate::validate::run_checks;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INVALID_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_PHYSICS: u8 = 4;
pub const EXIT_NOT_CONVERGED: u8 = 5;
pub const EXIT_UNIDENTIFIABLE: u8 = 6;

#[derive(Debug, Parser)]
#[command(name = "antibunch", version, about = "Fermion antibunching scan simulator and analyser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a full scan (CSV) or one position (event file) from a config.
    Simulate(SimulateArgs),
    /// Count coincidences in event files.
    Count(CountArgs),
    /// Fit the coincidence dip in a scan CSV.
    Fit(FitArgs),
    /// Measurement time needed for a target noise-to-signal ratio.
    Plan(PlanArgs),
    /// Run the built-in consistency checks.
    Validate,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the scan CSV here.
    #[arg(long, conflicts_with = "events_out", required_unless_present = "events_out")]
    scan_out: Option<PathBuf>,
    /// Write the event file of a single position here.
    #[arg(long)]
    events_out: Option<PathBuf>,
    /// Position index for `--events-out`; defaults to the one nearest x0.
    #[arg(long, requires = "events_out")]
    position: Option<usize>,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct CountArgs {
    /// One two-channel file, or two files whose records are D1 and D2 respectively.
    #[arg(required = true, num_args = 1..=2)]
    files: Vec<PathBuf>,
    /// Pairs with |t1 - t2 - offset| <= half_window count.
    #[arg(long)]
    half_window: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
    /// Recount by brute force and fail unless the counts agree.
    #[arg(long)]
    oracle: bool,
    /// Write a lag histogram CSV of t1 - t2 here.
    #[arg(long, requires = "max_lag")]
    histogram_out: Option<PathBuf>,
    #[arg(long)]
    max_lag: Option<f64>,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Observation time for histogram normalization; default is the span of the data.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    scan: PathBuf,
    /// Neutron speed converting path difference to lag.
    #[arg(long)]
    speed: f64,
    #[arg(long, default_value = "paper_approx")]
    form: ProfileForm,
    /// Write the fit report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Fit raw counts without drift correction.
    #[arg(long)]
    raw: bool,
    /// Reference singles from blocks of this many rows instead of the scan mean.
    #[arg(long, conflicts_with = "raw")]
    block: Option<usize>,
    #[arg(long, default_value_t = FitConfig::default().max_iterations)]
    max_iterations: usize,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Take beam and apparatus parameters from this run config.
    #[arg(long, conflicts_with_all = ["rate_hz", "tau_c", "energy_spread_ev", "tau_d"])]
    config: Option<PathBuf>,
    /// Source rate before splitting.
    #[arg(long, required_unless_present = "config")]
    rate_hz: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    transmission: f64,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
    #[arg(long, required_unless_present_any = ["config", "energy_spread_ev"])]
    tau_c: Option<f64>,
    /// Energy spread in eV; sets tau_c = hbar / (2 dE).
    #[arg(long, conflicts_with = "tau_c")]
    energy_spread_ev: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    tau_d: Option<f64>,
    /// Half coincidence window, for the accidental count in that window.
    #[arg(long)]
    half_window: Option<f64>,
    /// Target ratio of rms fluctuation to antibunching deficit.
    #[arg(long, required_unless_present = "snr", conflicts_with = "snr")]
    noise_to_signal: Option<f64>,
    /// Target signal-to-noise ratio, the inverse of `--noise-to-signal`.
    #[arg(long)]
    snr: Option<f64>,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("write failed: {e}"),
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. }
        | Error::Unsorted { .. }
        | Error::InsufficientData(_)
        | Error::Parse { .. }
        | Error::EventFormat(_) => EXIT_INVALID_INPUT,
        Error::Io { .. } => EXIT_IO,
        Error::DensityTooHigh { .. } | Error::OffsetInsideCorrelation { .. } => EXIT_PHYSICS,
        Error::Degenerate(_) => EXIT_UNIDENTIFIABLE,
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID_INPUT,
        message: message.into(),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Count(a) => count(&a, out),
        Command::Fit(a) => fit(&a, out),
        Command::Plan(a) => plan(&a, out),
        Command::Validate => validate(out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn guard_output(output: &Path, inputs: &[&Path]) -> Result<(), Failure> {
    if inputs.iter().any(|i| same_file(output, i)) {
        return Err(invalid(format!(
            "refusing to overwrite input file {}",
            output.display()
        )));
    }
    Ok(())
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Outcome {
    let config = read_run_config(&a.config)?;
    let RunConfig {
        beam,
        apparatus,
        scan,
        drift,
        ..
    } = config;
    let sim = ScanSimulator::new(scan, beam, apparatus, drift)?;
    let beam = sim.beam();
    let app = sim.apparatus();
    let scan = sim.scan();
    let (n_t, n_d) = app.arm_rates(beam);

    writeln!(out, "seed={}", scan.seed)?;
    writeln!(out, "mode={}", scan.mode.as_str())?;
    writeln!(out, "rate_hz={}", beam.rate_hz)?;
    writeln!(out, "speed_m_s={}", beam.speed_m_s)?;
    writeln!(out, "coherence_time_s={}", beam.coherence_time_s)?;
    writeln!(out, "density={}", beam.rate_hz * beam.coherence_time_s)?;
    writeln!(out, "n_t_hz={n_t}")?;
    writeln!(out, "n_d_hz={n_d}")?;
    writeln!(out, "tau_d_s={}", app.response_time_s)?;
    writeln!(out, "half_window_s={}", app.half_window_s)?;
    writeln!(out, "dead_time_s={}", app.dead_time_s)?;
    writeln!(out, "positions={}", scan.positions_mm.len())?;
    writeln!(out, "x0_mm={}", scan.x0_true_mm)?;
    writeln!(out, "dwell_s={}", scan.dwell_s)?;
    writeln!(out, "drift={}", drift.kind.as_str())?;
    writeln!(
        out,
        "noise_to_signal_per_position={}",
        noise_to_signal(
            app.response_time_s,
            beam.coherence_time_s,
            n_t,
            n_d,
            scan.dwell_s
        )
    )?;
    for w in sim.warnings() {
        writeln!(out, "warning={w}")?;
    }

    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    if let Some(path) = &a.scan_out {
        guard_output(path, &[&a.config])?;
        let rows = sim.run(exec)?;
        write_scan_file(path, &rows)?;
        writeln!(out, "rows={}", rows.len())?;
        writeln!(out, "output={}", path.display())?;
    } else if let Some(path) = &a.events_out {
        guard_output(path, &[&a.config])?;
        let index = match a.position {
            Some(i) => i,
            None => nearest(&scan.positions_mm, scan.x0_true_mm),
        };
        let ev = sim.position_events(index)?;
        let (d1, d2) = ev.delayed_streams();
        let records = records_from_streams(&d1, &d2)?;
        write_event_file(path, &records)?;
        writeln!(out, "position_index={index}")?;
        writeln!(out, "x_mm={}", ev.x_mm)?;
        writeln!(out, "delay_s={}", ev.delay_s)?;
        writeln!(out, "n_t={}", d1.len())?;
        writeln!(out, "n_d={}", d2.len())?;
        writeln!(out, "records={}", records.len())?;
        writeln!(out, "output={}", path.display())?;
    }
    Ok(EXIT_OK)
}

fn nearest(xs: &[f64], x0: f64) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
        .map_or(0, |(i, _)| i)
}

/// All records, then D1 and D2 timestamps in seconds.
type Arms = (Vec<EventRecord>, Vec<f64>, Vec<f64>);

fn load_arms(files: &[PathBuf]) -> Result<Arms, Failure> {
    match files {
        [one] => {
            let recs = read_event_file(one)?;
            let (d1, d2) = streams_from_records(&recs);
            Ok((recs, d1.timestamps, d2.timestamps))
        }
        [first, second] => {
            let r1 = read_event_file(first)?;
            let r2 = read_event_file(second)?;
            let times = |r: &[EventRecord]| {
                r.iter()
                    .map(|x| crate::io::ps_to_seconds(x.timestamp_ps))
                    .collect::<Vec<f64>>()
            };
            let (d1, d2) = (times(&r1), times(&r2));
            let mut all = r1;
            all.extend(r2);
            Ok((all, d1, d2))
        }
        _ => Err(invalid("expected one or two event files")),
    }
}

fn count(a: &CountArgs, out: &mut dyn Write) -> Outcome {
    let (records, d1, d2) = load_arms(&a.files)?;
    let n_c = count_coincidences(&d1, &d2, a.half_window, a.offset)?;
    writeln!(out, "n_c={n_c}")?;
    writeln!(out, "n_t={}", d1.len())?;
    writeln!(out, "n_d={}", d2.len())?;
    writeln!(out, "half_window_s={}", a.half_window)?;
    writeln!(out, "offset_s={}", a.offset)?;

    if let Some(path) = &a.histogram_out {
        let inputs: Vec<&Path> = a.files.iter().map(PathBuf::as_path).collect();
        guard_output(path, &inputs)?;
        let max_lag = a.max_lag.expect("clap requires max_lag");
        let span = match (records.iter().min(), records.iter().max()) {
            (Some(lo), Some(hi)) => (hi.timestamp_ps - lo.timestamp_ps) as f64 * 1e-12,
            _ => 0.0,
        };
        let duration = a.duration.unwrap_or(span);
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid(format!("observation time {duration} s must be > 0")));
        }
        let h = lag_histogram(&d1, &d2, max_lag, a.bins)?;
        let mut text = String::from("lag_lo_s,lag_hi_s,count,normalized,normalized_err\n");
        let edges = h.bin_edges();
        let norm = h.normalized(duration);
        let errs = h.normalized_errors(duration);
        for k in 0..h.bins() {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                edges[k], edges[k + 1], h.counts[k], norm[k], errs[k]
            ));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        writeln!(out, "histogram_bins={}", h.bins())?;
        writeln!(out, "histogram_out={}", path.display())?;
    }

    if a.oracle {
        let brute = brute_force_count(&d1, &d2, a.half_window, a.offset);
        writeln!(out, "oracle_n_c={brute}")?;
        if brute != n_c {
            writeln!(out, "oracle=fail")?;
            return Err(Failure {
                code: EXIT_CHECK_FAILED,
                message: format!("two-pointer count {n_c} differs from brute force {brute}"),
            });
        }
        writeln!(out, "oracle=pass")?;
    }
    Ok(EXIT_OK)
}

fn fit_points(rows: &[ScanRow], a: &FitArgs) -> Result<(Vec<ScanPoint>, usize), Failure> {
    if a.raw {
        return Ok((rows.iter().map(ScanPoint::from).collect(), 0));
    }
    let reference = match a.block {
        Some(n) => DriftReference::BlockMean(n),
        None => DriftReference::GlobalMean,
    };
    let corrected = drift_correct(rows, reference)?;
    let points = points_from_corrected(&corrected);
    let dropped = corrected.len() - points.len();
    Ok((points, dropped))
}

/// Structured text fit report.
pub fn format_report(r: &FitResult, points: usize, corrected: bool) -> String {
    let p = &r.params;
    let s = &r.sigma;
    let mut t = String::new();
    t.push_str("[fit]\n");
    t.push_str(&format!("form = {}\n", r.form));
    t.push_str(&format!("drift_corrected = {corrected}\n"));
    t.push_str(&format!("points = {points}\n"));
    t.push_str(&format!("n_inf = {} ± {}\n", p.n_inf, s[0]));
    t.push_str(&format!("tau_d_s = {:e} ± {:e}\n", p.tau_d, s[1]));
    t.push_str(&format!("tau_c_s = {:e} ± {:e}\n", p.tau_c, s[2]));
    t.push_str(&format!("x0_mm = {} ± {}\n", p.x0_mm, s[3]));
    t.push_str(&format!("depth = {} ± {}\n", r.depth(), r.depth_sigma()));
    t.push_str(&format!("chi2 = {}\n", r.chi2));
    t.push_str(&format!("chi2_reduced = {}\n", r.chi2_reduced));
    t.push_str(&format!("iterations = {}\n", r.iterations));
    t.push_str(&format!("converged = {}\n", r.converged));
    t.push_str(&format!("convergence = {}\n", r.convergence.as_str()));
    t
}

fn fit(a: &FitArgs, out: &mut dyn Write) -> Outcome {
    let rows = read_scan_file(&a.scan)?;
    let (points, dropped) = fit_points(&rows, a)?;
    let config = FitConfig {
        max_iterations: a.max_iterations,
        ..FitConfig::default()
    };
    let r = fit_dip(&points, a.speed, &config, a.form)?;
    let p = &r.params;
    writeln!(out, "form={}", r.form)?;
    writeln!(out, "drift_corrected={}", !a.raw)?;
    writeln!(out, "points={}", points.len())?;
    writeln!(out, "dropped_rows={dropped}")?;
    writeln!(out, "n_inf={}", p.n_inf)?;
    writeln!(out, "n_inf_sigma={}", r.sigma[0])?;
    writeln!(out, "tau_d_s={}", p.tau_d)?;
    writeln!(out, "tau_d_sigma_s={}", r.sigma[1])?;
    writeln!(out, "tau_c_s={}", p.tau_c)?;
    writeln!(out, "tau_c_sigma_s={}", r.sigma[2])?;
    writeln!(out, "x0_mm={}", p.x0_mm)?;
    writeln!(out, "x0_sigma_mm={}", r.sigma[3])?;
    writeln!(out, "depth={}", r.depth())?;
    writeln!(out, "depth_sigma={}", r.depth_sigma())?;
    writeln!(out, "chi2={}", r.chi2)?;
    writeln!(out, "chi2_reduced={}", r.chi2_reduced)?;
    writeln!(out, "iterations={}", r.iterations)?;
    writeln!(out, "converged={}", r.converged)?;
    writeln!(out, "convergence={}", r.convergence.as_str())?;
    if let Some(path) = &a.report {
        guard_output(path, &[&a.scan])?;
        std::fs::write(path, format_report(&r, points.len(), !a.raw))
            .map_err(|e| Error::io(path, e))?;
        writeln!(out, "report={}", path.display())?;
    }
    if !r.converged {
        return Err(Failure {
            code: EXIT_NOT_CONVERGED,
            message: format!("fit did not converge in {} iterations", r.iterations),
        });
    }
    Ok(EXIT_OK)
}

fn plan(a: &PlanArgs, out: &mut dyn Write) -> Outcome {
    let (beam, app) = match &a.config {
        Some(path) => {
            let c = read_run_config(path)?;
            (c.beam, c.apparatus)
        }
        None => {
            let tau_c = match (a.tau_c, a.energy_spread_ev) {
                (Some(t), _) => t,
                (None, Some(de)) => coherence_time_from_energy_spread(de)?,
                (None, None) => return Err(invalid("one of --tau-c or --energy-spread-ev is required")),
            };
            let beam = BeamParams {
                rate_hz: a.rate_hz.expect("clap requires rate_hz"),
                speed_m_s: 1.0,
                energy_mev: None,
                energy_spread_ev: a.energy_spread_ev,
                coherence_time_s: tau_c,
            };
            let tau_d = a.tau_d.expect("clap requires tau_d");
            let app = ApparatusParams {
                transmission: a.transmission,
                efficiency: a.efficiency,
                response_time_s: tau_d,
                half_window_s: a.half_window.unwrap_or(tau_d),
                dead_time_s: 0.0,
            };
            (beam, app)
        }
    };
    beam.validate()?;
    app.validate(&beam)?;
    let ratio = match (a.noise_to_signal, a.snr) {
        (Some(r), _) => r,
        (None, Some(s)) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("--snr {s} must be finite and > 0")));
            }
            1.0 / s
        }
        (None, None) => return Err(invalid("one of --noise-to-signal or --snr is required")),
    };
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(invalid(format!("--noise-to-signal {ratio} must be finite and > 0")));
    }
    let (n_t, n_d) = app.arm_rates(&beam);
    let tau_c = beam.coherence_time_s;
    let tau_d = app.response_time_s;
    let t0 = required_measurement_time(ratio, tau_d, tau_c, n_t, n_d);
    writeln!(out, "n_t_hz={n_t}")?;
    writeln!(out, "n_d_hz={n_d}")?;
    writeln!(out, "tau_c_s={tau_c}")?;
    writeln!(out, "tau_d_s={tau_d}")?;
    writeln!(out, "noise_to_signal={ratio}")?;
    writeln!(out, "snr={}", 1.0 / ratio)?;
    writeln!(out, "required_measurement_time_s={t0}")?;
    writeln!(out, "expected_plateau={}", accidental_count(tau_d, n_t, n_d, t0))?;
    writeln!(out, "expected_deficit={}", antibunching_deficit(tau_c, n_t, n_d, t0))?;
    writeln!(out, "dip_depth={}", tau_c / (2.0 * tau_d))?;
    if a.half_window.is_some() || a.config.is_some() {
        writeln!(
            out,
            "accidentals_in_window={}",
            accidental_count(app.coincidence_window_s(), n_t, n_d, t0)
        )?;
    }
    writeln!(out, "density={}", beam.rate_hz * tau_c)?;
    Ok(EXIT_OK)
}

fn validate(out: &mut dyn Write) -> Outcome {
    let checks = run_checks();
    let mut all = true;
    for c in &checks {
        all &= c.passed;
        writeln!(out, "{}={}", c.name, if c.passed { "pass" } else { "fail" })?;
        writeln!(out, "{}.detail={}", c.name, c.detail)?;
    }
    writeln!(out, "result={}", if all { "pass" } else { "fail" })?;
    Ok(if all { EXIT_OK } else { EXIT_CHECK_FAILED })
}
