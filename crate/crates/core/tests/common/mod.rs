#![allow(dead_code)]

use std::path::PathBuf;

use antibunch::fit::{model, to_theta, ScanPoint};
use antibunch::io::{read_run_config, RunConfig};
use antibunch::physics::{DipModelParams, ProfileForm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn desk_config() -> RunConfig {
    read_run_config(&manifest_path("configs/desk.conf")).expect("desk config parses")
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

pub fn noiseless(p: &DipModelParams, v: f64, xs: &[f64], form: ProfileForm) -> Vec<ScanPoint> {
    let th = to_theta(p);
    xs.iter()
        .map(|&x| ScanPoint {
            x_mm: x,
            counts: model(x, &th, v, form),
        })
        .collect()
}

/// Model counts with independent Poisson noise per point.
pub fn poisson_scan(
    p: &DipModelParams,
    v: f64,
    xs: &[f64],
    form: ProfileForm,
    seed: u64,
) -> Vec<ScanPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    noiseless(p, v, xs, form)
        .into_iter()
        .map(|pt| ScanPoint {
            x_mm: pt.x_mm,
            counts: Poisson::new(pt.counts).unwrap().sample(&mut rng),
        })
        .collect()
}

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Desk-scale dip: 41 positions over ±40 mm at 1 m/s, SNR 5 per position.
pub fn desk_dip() -> (DipModelParams, f64, Vec<f64>) {
    (
        DipModelParams::new(3200.0, 4e-3, 1e-3, 2.0),
        1.0,
        grid(-40.0, 40.0, 41),
    )
}
