//! Built-in consistency suite run by `antibunch validate`.
//!
//! Every check uses fixed seeds and internal defaults, so the suite needs no
//! configuration and gives the same verdict on every run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coincidence::{brute_force_count, count_coincidences};
use crate::error::Result;
use crate::physics::{
    convolve_numeric, expected_profile, pair_correlation, response_density, BeamParams,
    DipModelParams, ProfileForm, SpinMode,
};
use crate::synth::{generate_source, split_beam, GeneratorMode};

/// Signature of a coincidence counter under test.
pub type Counter = fn(&[f64], &[f64], f64, f64) -> Result<u64>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_checks() -> Vec<CheckOutcome> {
    run_checks_with(count_coincidences)
}

/// Runs the suite with `counter` in place of the library two-pointer count.
pub fn run_checks_with(counter: Counter) -> Vec<CheckOutcome> {
    vec![
        closed_form(),
        convolution_identity(),
        oracle_equivalence(counter),
        generator_cross_check(counter),
    ]
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn closed_form() -> CheckOutcome {
    let c0 = pair_correlation(0.0, 1e-3, SpinMode::Unpolarized).unwrap_or(f64::NAN);
    let same = pair_correlation(0.0, 1e-3, SpinMode::SameSpin).unwrap_or(f64::NAN);
    // trapezoid over ±12 sigma
    let tau_d = 4e-3;
    let n = 24_000;
    let h = 24.0 * tau_d / n as f64;
    let area: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * response_density(-12.0 * tau_d + k as f64 * h, tau_d).unwrap_or(f64::NAN)
        })
        .sum::<f64>()
        * h;
    let p = DipModelParams::scintillator_reference();
    let min = expected_profile(0.0, &p, ProfileForm::PaperApprox).unwrap_or(f64::NAN);
    let depth = (p.n_inf - min) / p.n_inf;
    let depth_err = (depth - p.tau_c / (2.0 * p.tau_d)).abs();
    let passed = c0 == 0.5 && same == 0.0 && (area - 1.0).abs() < 1e-9 && depth_err < 1e-12;
    outcome(
        "closed_form",
        passed,
        format!("c0={c0} area_err={:.3e} depth_err={depth_err:.3e}", (area - 1.0).abs()),
    )
}

fn convolution_identity() -> CheckOutcome {
    let tau_d = 1e-3;
    let mut worst: f64 = 0.0;
    for ratio in [0.01, 0.1, 0.5, 1.0] {
        let tau_c = ratio * tau_d;
        let p = DipModelParams::new(1.0, tau_d, tau_c, 0.0);
        for k in 0..=8 {
            let t = 0.5 * k as f64 * tau_d;
            let exact = expected_profile(t, &p, ProfileForm::ExactConvolution).unwrap_or(f64::NAN);
            let numeric = convolve_numeric(t, tau_c, tau_d).unwrap_or(f64::NAN);
            let rel = ((exact - numeric) / exact).abs();
            worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
        }
    }
    outcome(
        "convolution_identity",
        worst <= 1e-9,
        format!("max_rel_err={worst:.3e}"),
    )
}

/// Sorted times on a 1/1024 s grid, so that exact window-edge pairs occur.
fn grid_stream(n: usize, span_ticks: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0..span_ticks) as f64 / 1024.0)
        .collect();
    v.sort_unstable_by(f64::total_cmp);
    v
}

fn oracle_equivalence(counter: Counter) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = 0;
    let instances = 20;
    for _ in 0..instances {
        let a = grid_stream(rng.random_range(0..1500), 200_000, &mut rng);
        let b = grid_stream(rng.random_range(0..1500), 200_000, &mut rng);
        let half = rng.random_range(1..64) as f64 / 1024.0;
        let offset = rng.random_range(-256i64..256) as f64 / 1024.0;
        let expect = brute_force_count(&a, &b, half, offset);
        match counter(&a, &b, half, offset) {
            Ok(n) if n == expect => {}
            _ => mismatches += 1,
        }
    }
    outcome(
        "oracle_equivalence",
        mismatches == 0,
        format!("instances={instances} mismatches={mismatches}"),
    )
}

/// Zero-lag coincidences within ±tau_c relative to the flat expectation,
/// for each generator against the closed-form prediction.
fn generator_cross_check(counter: Counter) -> CheckOutcome {
    let tau_c = 1e-3;
    let beam = BeamParams {
        rate_hz: 10.0,
        speed_m_s: 1.0,
        energy_mev: None,
        energy_spread_ev: None,
        coherence_time_s: tau_c,
    };
    let duration = 20_000.0;
    // (1/2τc) ∫_{-τc}^{τc} C(t) dt for the unpolarized correlation
    let erf_term = libm::erf(std::f64::consts::FRAC_1_SQRT_2);
    let antibunched = 1.0 - 0.25 * (2.0 * std::f64::consts::PI).sqrt() * erf_term;
    let mut details = Vec::new();
    let mut passed = true;
    for (i, (mode, predicted)) in [
        (GeneratorMode::SpinResolved, antibunched),
        (GeneratorMode::NetThinning, antibunched),
        (GeneratorMode::Independent, 1.0),
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        rng.set_stream(i as u64);
        let result = generate_source(&beam, duration, mode, &mut rng)
            .and_then(|src| split_beam(&src, 0.5, &mut rng))
            .and_then(|(t, r)| {
                let n = counter(&t, &r, tau_c, 0.0)?;
                Ok((n, t.len(), r.len()))
            });
        let Ok((n_c, n_t, n_d)) = result else {
            passed = false;
            details.push(format!("{}=error", mode.as_str()));
            continue;
        };
        let flat = 2.0 * tau_c * n_t as f64 * n_d as f64 / duration;
        let expect = predicted * flat;
        let z = (n_c as f64 - expect) / expect.sqrt();
        passed &= z.abs() < 5.0;
        details.push(format!("{}_z={z:.2}", mode.as_str()));
    }
    outcome("generator_cross_check", passed, details.join(" "))
}
