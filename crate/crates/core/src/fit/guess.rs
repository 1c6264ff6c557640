use crate::error::{require_positive, Error, Result};
use crate::physics::DipModelParams;

use super::{ScanPoint, MIN_POINTS};

/// Heuristic start for the fit.
///
/// Plateau from the outer eighth of the scan on each side (the outer
/// quartile overall), centre at the lowest count, width from the half-depth
/// crossings of a 3-point running mean, and `tau_c = 2 tau_D (1 - min / plateau)`.
pub fn initial_guess(points: &[ScanPoint], speed_m_s: f64) -> Result<DipModelParams> {
    require_positive("speed_m_s", speed_m_s)?;
    if points.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} scan points, need at least {MIN_POINTS}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x_mm.total_cmp(&b.x_mm));
    let n = pts.len();
    let y: Vec<f64> = pts.iter().map(|p| p.counts).collect();
    let x: Vec<f64> = pts.iter().map(|p| p.x_mm).collect();
    let span = x[n - 1] - x[0];

    let outer = (n / 8).max(1);
    let plateau_sum: f64 = y[..outer].iter().chain(&y[n - outer..]).sum();
    let n_inf = (plateau_sum / (2 * outer) as f64).max(1.0);

    let (imin, &ymin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let x0 = x[imin];
    let depth = (1.0 - ymin / n_inf).max(0.0);

    let fallback_sigma_mm = (span / 8.0).max(f64::MIN_POSITIVE);
    let sigma_mm = if depth > 0.0 {
        let smooth: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        let level = n_inf * (1.0 - 0.5 * depth);
        let crossing = |from: usize, to: usize| -> Option<f64> {
            // walk outward from the minimum to the first point above half depth
            let dir: isize = if to > from { 1 } else { -1 };
            let mut i = from as isize;
            while (i + dir) >= 0 && ((i + dir) as usize) < n {
                let j = (i + dir) as usize;
                let k = i as usize;
                if smooth[j] >= level {
                    let f = if smooth[j] != smooth[k] {
                        ((level - smooth[k]) / (smooth[j] - smooth[k])).clamp(0.0, 1.0)
                    } else {
                        0.5
                    };
                    return Some(x[k] + f * (x[j] - x[k]));
                }
                i += dir;
            }
            None
        };
        let left = crossing(imin, 0);
        let right = crossing(imin, n - 1);
        let hwhm = match (left, right) {
            (Some(l), Some(r)) => 0.5 * (r - l),
            (Some(l), None) => x0 - l,
            (None, Some(r)) => r - x0,
            (None, None) => 0.0,
        };
        if hwhm > 0.0 {
            hwhm / (2.0 * std::f64::consts::LN_2).sqrt()
        } else {
            fallback_sigma_mm
        }
    } else {
        fallback_sigma_mm
    };

    let tau_d = sigma_mm * 1e-3 / speed_m_s;
    let tau_c = (2.0 * tau_d * depth).max(1e-6 * tau_d);
    Ok(DipModelParams::new(n_inf, tau_d, tau_c, x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{model, to_theta};
    use crate::physics::ProfileForm;

    fn synth(p: &DipModelParams, v: f64, xs: &[f64]) -> Vec<ScanPoint> {
        let th = to_theta(p);
        xs.iter()
            .map(|&x| ScanPoint {
                x_mm: x,
                counts: model(x, &th, v, ProfileForm::PaperApprox),
            })
            .collect()
    }

    #[test]
    fn within_thirty_percent_on_reference_sets() {
        for (truth, xs) in [
            (
                DipModelParams::scintillator_reference(),
                (0..101).map(|i| i as f64 * 0.04).collect::<Vec<_>>(),
            ),
            (
                DipModelParams::helium3_reference(),
                (0..83).map(|i| -2.0 + i as f64 * 0.1).collect(),
            ),
        ] {
            let g = initial_guess(&synth(&truth, 630.0, &xs), 630.0).unwrap();
            assert!((g.n_inf / truth.n_inf - 1.0).abs() < 0.3);
            assert!((g.tau_d / truth.tau_d - 1.0).abs() < 0.3);
            assert!((g.tau_c / truth.tau_c - 1.0).abs() < 0.3);
            assert!((g.x0_mm - truth.x0_mm).abs() < 0.3 * truth.x0_mm);
        }
    }

    #[test]
    fn symmetric_dip_centre_is_exact() {
        let truth = DipModelParams::new(1000.0, 2e-3, 5e-4, 0.0);
        let xs: Vec<f64> = (-10..=10).map(|i| i as f64).collect();
        let g = initial_guess(&synth(&truth, 1.0, &xs), 1.0).unwrap();
        assert_eq!(g.x0_mm, 0.0);
    }

    #[test]
    fn monotone_data_puts_centre_at_boundary() {
        let pts: Vec<ScanPoint> = (0..12)
            .map(|i| ScanPoint {
                x_mm: i as f64,
                counts: 100.0 + 0.1 * i as f64,
            })
            .collect();
        let g = initial_guess(&pts, 1.0).unwrap();
        assert_eq!(g.x0_mm, 0.0);
        assert!(g.depth() < 0.01);
        assert!(g.tau_c > 0.0 && g.tau_d > 0.0);
    }
}
