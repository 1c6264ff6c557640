use antibunch::coincidence::lag_histogram;
use antibunch::physics::{ApparatusParams, BeamParams};
use antibunch::synth::{detect, generate_source, split_beam, GeneratorMode};
use antibunch::{Channel, EventStream, SourceEvent, Spin};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TAU_C: f64 = 1e-3;

fn beam(rate: f64, tau_c: f64) -> BeamParams {
    BeamParams {
        rate_hz: rate,
        speed_m_s: 1.0,
        energy_mev: None,
        energy_spread_ev: None,
        coherence_time_s: tau_c,
    }
}

fn source(mode: GeneratorMode, rate: f64, duration: f64, seed: u64) -> Vec<SourceEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_source(&beam(rate, TAU_C), duration, mode, &mut rng).unwrap()
}

/// Normalized cross-arm histogram of a 50/50 split of `events`.
fn split_g(events: &[SourceEvent], duration: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = split_beam(events, 0.5, &mut rng).unwrap();
    let h = lag_histogram(&a, &b, 6.0 * TAU_C, 24).unwrap();
    (h.normalized(duration), h.normalized_errors(duration))
}

#[test]
fn independent_counts_in_disjoint_intervals_are_uncorrelated() {
    let (rate, duration) = (200.0, 20_000.0);
    let ev = source(GeneratorMode::Independent, rate, duration, 3);
    let mut counts = vec![0.0f64; duration as usize];
    for e in &ev {
        counts[e.time as usize] += 1.0;
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / counts.len() as f64;
    let pairs = counts.len() - 1;
    let cov = counts
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>()
        / pairs as f64;
    let corr = cov / var;
    assert!(corr.abs() < 3.0 / (pairs as f64).sqrt(), "corr {corr}");
}

#[test]
fn unpolarized_g_never_below_half() {
    let duration = 20_000.0;
    for (mode, seed) in [(GeneratorMode::SpinResolved, 10), (GeneratorMode::NetThinning, 11)] {
        let ev = source(mode, 50.0, duration, seed);
        let (g, e) = split_g(&ev, duration, seed + 100);
        for (k, (gi, ei)) in g.iter().zip(&e).enumerate() {
            assert!(*gi >= 0.5 - 3.0 * ei, "{mode:?} bin {k}: {gi} ± {ei}");
        }
        // far bins recover the uncorrelated baseline
        for k in [0, 1, 22, 23] {
            assert!((g[k] - 1.0).abs() <= 4.0 * e[k], "{mode:?} bin {k}: {}", g[k]);
        }
    }
}

#[test]
fn same_spin_g_vanishes_at_zero_lag() {
    let duration = 40_000.0;
    let ev = source(GeneratorMode::SpinResolved, 100.0, duration, 12);
    let up: Vec<SourceEvent> = ev.into_iter().filter(|e| e.spin == Spin::Up).collect();
    let (g, e) = split_g(&up, duration, 13);
    for (gi, ei) in g.iter().zip(&e) {
        assert!(*gi >= -3.0 * ei);
    }
    // central bins cover |lag| <= tau_c / 2: 1 - exp(-t^2/2) averages to ~0.02
    assert!(g[11] < 0.1 && g[12] < 0.1, "{} {}", g[11], g[12]);
}

#[test]
fn two_detector_time_difference_spreads_by_tau_d() {
    let tau_d = 4e-3;
    let app = ApparatusParams {
        transmission: 0.5,
        efficiency: 1.0,
        response_time_s: tau_d,
        half_window_s: tau_d,
        dead_time_s: 0.0,
    };
    // sparse enough that jitter never reorders neighbours
    let mut t = 0.0;
    let times: Vec<f64> = (0..200_000)
        .map(|_| {
            t += 1.0;
            t
        })
        .collect();
    let stream = EventStream::new(Channel::Transmitted, times);
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let a = detect(&stream, &app, &mut r1).unwrap();
    let b = detect(&stream, &app, &mut r2).unwrap();
    let d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    assert!(mean.abs() < 5.0 * tau_d / (d.len() as f64).sqrt());
    assert!((sd / tau_d - 1.0).abs() < 0.01, "sd/tau_d = {}", sd / tau_d);
    let kurt = d.iter().map(|x| ((x - mean) / sd).powi(4)).sum::<f64>() / d.len() as f64;
    assert!((kurt - 3.0).abs() < 0.1, "kurtosis {kurt}");
}

#[test]
fn identical_seed_gives_identical_stream() {
    for mode in [GeneratorMode::Independent, GeneratorMode::SpinResolved, GeneratorMode::NetThinning] {
        let a = source(mode, 50.0, 200.0, 99);
        let b = source(mode, 50.0, 200.0, 99);
        let c = source(mode, 50.0, 200.0, 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
