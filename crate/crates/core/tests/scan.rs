mod common;

use antibunch::coincidence::ScanRow;
use antibunch::fit::{fit_dip, FitConfig, ScanPoint};
use antibunch::io::RunConfig;
use antibunch::synth::{GeneratorMode, ScanSimulator};
use antibunch::Execution;
use common::desk_config;

fn simulator(c: &RunConfig) -> ScanSimulator {
    ScanSimulator::new(c.scan.clone(), c.beam.clone(), c.apparatus.clone(), c.drift).unwrap()
}

fn independent(dwell: f64) -> RunConfig {
    let mut c = desk_config();
    c.scan.mode = GeneratorMode::Independent;
    c.scan.dwell_s = dwell;
    c
}

#[test]
fn independent_scan_is_flat() {
    let rows = simulator(&independent(8000.0)).run(Execution::default()).unwrap();
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.n_c as f64).sum::<f64>() / n;
    let chi2 = rows.iter().map(|r| (r.n_c as f64 - mean).powi(2) / mean).sum::<f64>() / (n - 1.0);
    assert!((0.5..=1.5).contains(&chi2), "chi2_red {chi2}");
}

#[test]
fn doubling_dwell_doubles_coincidences() {
    let total = |rows: &[ScanRow]| rows.iter().map(|r| r.n_c as f64).sum::<f64>();
    let a = total(&simulator(&independent(4000.0)).run(Execution::default()).unwrap());
    let b = total(&simulator(&independent(8000.0)).run(Execution::default()).unwrap());
    // independent totals: var(b - 2a) = b + 4a
    let z = (b - 2.0 * a) / (b + 4.0 * a).sqrt();
    assert!(z.abs() < 4.0, "a={a} b={b} z={z}");
}

#[test]
fn rows_do_not_depend_on_evaluation_order() {
    let mut c = desk_config();
    c.scan.dwell_s = 2000.0;
    let sim = simulator(&c);
    let seq = sim.run(Execution::Sequential).unwrap();
    let par = sim.run(Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let mut reversed: Vec<ScanRow> = (0..sim.len()).rev().map(|i| sim.row(i).unwrap()).collect();
    reversed.reverse();
    assert_eq!(seq, reversed);
    assert_eq!(sim.row(7).unwrap(), seq[7]);
}

#[test]
fn antibunched_minimum_sits_at_configured_centre() {
    let c = desk_config();
    let rows = simulator(&c).run(Execution::default()).unwrap();
    let points: Vec<ScanPoint> = rows.iter().map(ScanPoint::from).collect();
    let f = fit_dip(&points, c.beam.speed_m_s, &FitConfig::default(), c.form).unwrap();
    let z = (f.params.x0_mm - c.scan.x0_true_mm) / f.sigma[3];
    assert!(z.abs() <= 3.0, "x0={} ± {}", f.params.x0_mm, f.sigma[3]);
}
