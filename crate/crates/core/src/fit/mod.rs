//! Weighted least-squares fit of the coincidence dip to scan data.

mod guess;
mod model;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coincidence::{CorrectedRow, RowStatus, ScanRow};
use crate::error::{require_positive, Error, Result};
use crate::exec::{map_indices, Execution};
use crate::physics::{DipModelParams, DipUncertainty, ProfileForm};

pub use guess::initial_guess;
pub use model::{from_theta, model, model_and_jacobian, to_theta, Theta};

use model::N_PARAMS;

/// Smallest number of scan points accepted by the fitter.
pub const MIN_POINTS: usize = 8;

/// Relative uncertainty of tau_c above which the dip counts as unidentifiable.
pub const UNIDENTIFIABLE_REL_SIGMA: f64 = 100.0;

/// One scan position as seen by the fitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub x_mm: f64,
    pub counts: f64,
}

impl From<&ScanRow> for ScanPoint {
    fn from(r: &ScanRow) -> Self {
        ScanPoint {
            x_mm: r.x_mm,
            counts: r.n_c as f64,
        }
    }
}

impl From<&CorrectedRow> for ScanPoint {
    fn from(r: &CorrectedRow) -> Self {
        ScanPoint {
            x_mm: r.x_mm,
            counts: r.corrected,
        }
    }
}

/// Fit input from drift-corrected rows, dropping rows flagged invalid.
pub fn points_from_corrected(rows: &[CorrectedRow]) -> Vec<ScanPoint> {
    rows.iter()
        .filter(|r| r.status != RowStatus::Invalid)
        .map(ScanPoint::from)
        .collect()
}

/// Poisson weight, with the variance floored at one count.
#[inline]
pub fn weight(counts: f64) -> f64 {
    1.0 / counts.max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Largest accepted cosine between the residual vector and any Jacobian column.
    pub gradient_tolerance: f64,
    /// Relative parameter step below which the iteration stops.
    pub step_tolerance: f64,
    pub damping_init: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            damping_init: 1e-3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("fit.gradient_tolerance", self.gradient_tolerance)?;
        require_positive("fit.step_tolerance", self.step_tolerance)?;
        require_positive("fit.damping_init", self.damping_init)?;
        if self.max_iterations == 0 {
            return Err(Error::param("fit.max_iterations", 0.0, "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Gradient,
    Step,
    /// Residuals are at rounding level: the data are reproduced exactly.
    ExactFit,
    /// No further decrease possible at any damping, with a small gradient.
    Stationary,
    NotConverged,
}

impl Convergence {
    pub fn as_str(self) -> &'static str {
        match self {
            Convergence::Gradient => "gradient",
            Convergence::Step => "step",
            Convergence::ExactFit => "exact_fit",
            Convergence::Stationary => "stationary",
            Convergence::NotConverged => "not_converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub form: ProfileForm,
    /// Best-fit parameters with their one-sigma uncertainties attached.
    pub params: DipModelParams,
    /// Sigma in the order `[n_inf, tau_d, tau_c, x0_mm]`.
    pub sigma: [f64; 4],
    pub covariance: Matrix4<f64>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub iterations: usize,
    pub converged: bool,
    pub convergence: Convergence,
    /// Objective after the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn depth(&self) -> f64 {
        self.params.depth()
    }

    /// One-sigma uncertainty of the dip depth `tau_c / (2 tau_D)`.
    pub fn depth_sigma(&self) -> f64 {
        let p = &self.params;
        let g = [0.0, -p.tau_c / (2.0 * p.tau_d * p.tau_d), 1.0 / (2.0 * p.tau_d), 0.0];
        let g = Vector4::from(g);
        (g.transpose() * self.covariance * g)[(0, 0)].max(0.0).sqrt()
    }
}

struct Normal {
    h: Matrix4<f64>,
    g: Vector4<f64>,
    chi2: f64,
}

fn check_points(points: &[ScanPoint]) -> Result<()> {
    if points.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} scan points, need at least {MIN_POINTS}",
            points.len()
        )));
    }
    for p in points {
        if !p.x_mm.is_finite() {
            return Err(Error::param("x_mm", p.x_mm, "must be finite"));
        }
        if !(p.counts.is_finite() && p.counts >= 0.0) {
            return Err(Error::param("counts", p.counts, "must be finite and >= 0"));
        }
    }
    Ok(())
}

fn chi2_at(points: &[ScanPoint], theta: &Theta, v: f64, form: ProfileForm) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.counts - model(p.x_mm, theta, v, form);
            weight(p.counts) * r * r
        })
        .sum()
}

fn normal_equations(points: &[ScanPoint], theta: &Theta, v: f64, form: ProfileForm) -> Normal {
    let mut h = Matrix4::zeros();
    let mut g = Vector4::zeros();
    let mut chi2 = 0.0;
    for p in points {
        let (m, jac) = model_and_jacobian(p.x_mm, theta, v, form);
        let w = weight(p.counts);
        let r = p.counts - m;
        chi2 += w * r * r;
        let j = Vector4::from(jac);
        h += w * j * j.transpose();
        g += w * r * j;
    }
    Normal { h, g, chi2 }
}

/// Weighted reduced chi-square of `params` against `points`.
pub fn goodness_of_fit(
    points: &[ScanPoint],
    params: &DipModelParams,
    speed_m_s: f64,
    form: ProfileForm,
) -> Result<f64> {
    if points.len() <= N_PARAMS {
        return Err(Error::InsufficientData(format!(
            "{} points leave no degrees of freedom",
            points.len()
        )));
    }
    params.validate()?;
    let chi2 = chi2_at(points, &to_theta(params), speed_m_s, form);
    Ok(chi2 / (points.len() - N_PARAMS) as f64)
}

/// Fits the dip starting from [`initial_guess`].
pub fn fit_dip(
    points: &[ScanPoint],
    speed_m_s: f64,
    config: &FitConfig,
    form: ProfileForm,
) -> Result<FitResult> {
    check_points(points)?;
    let start = initial_guess(points, speed_m_s)?;
    fit_dip_from(points, speed_m_s, config, form, &start)
}

pub fn fit_dip_from(
    points: &[ScanPoint],
    speed_m_s: f64,
    config: &FitConfig,
    form: ProfileForm,
    start: &DipModelParams,
) -> Result<FitResult> {
    check_points(points)?;
    require_positive("speed_m_s", speed_m_s)?;
    config.validate()?;
    start.validate()?;
    let v = speed_m_s;
    let scale: f64 = points.iter().map(|p| weight(p.counts) * p.counts * p.counts).sum();
    let chi2_floor = 1e-26 * scale;

    let mut theta = to_theta(start);
    let mut normal = normal_equations(points, &theta, v, form);
    let mut trace = vec![normal.chi2];
    let mut lambda = config.damping_init;
    let mut convergence = Convergence::NotConverged;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if normal.chi2 <= chi2_floor {
            convergence = Convergence::ExactFit;
            break;
        }
        let cosine = gradient_cosine(&normal);
        if cosine <= config.gradient_tolerance {
            convergence = Convergence::Gradient;
            break;
        }
        iterations += 1;

        let mut accepted = None;
        while lambda < 1e16 {
            if let Some(step) = damped_step(&normal, lambda) {
                let trial: Theta = std::array::from_fn(|i| theta[i] + step[i]);
                let chi2 = chi2_at(points, &trial, v, form);
                if chi2.is_finite() && chi2 < normal.chi2 {
                    accepted = Some((trial, step));
                    lambda = (lambda * 0.1).max(1e-15);
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, step)) = accepted else {
            if cosine <= 1e-6 {
                convergence = Convergence::Stationary;
            }
            break;
        };
        theta = trial;
        normal = normal_equations(points, &theta, v, form);
        trace.push(normal.chi2);
        let small = (0..N_PARAMS)
            .all(|i| step[i].abs() <= config.step_tolerance * (theta[i].abs() + config.step_tolerance));
        if small {
            convergence = Convergence::Step;
            break;
        }
    }

    let params = from_theta(&theta);
    let covariance = covariance(&normal.h, &params)?;
    let sigma: [f64; 4] = std::array::from_fn(|i| covariance[(i, i)].max(0.0).sqrt());
    if !(sigma[2] <= UNIDENTIFIABLE_REL_SIGMA * params.tau_c) {
        return Err(Error::Degenerate(format!(
            "tau_c is not identifiable: fitted {:.3e} s with sigma {:.3e} s",
            params.tau_c, sigma[2]
        )));
    }
    let dof = points.len().saturating_sub(N_PARAMS).max(1);
    Ok(FitResult {
        form,
        params: DipModelParams {
            uncertainty: Some(DipUncertainty {
                n_inf: sigma[0],
                tau_d: sigma[1],
                tau_c: sigma[2],
                x0_mm: sigma[3],
            }),
            ..params
        },
        sigma,
        covariance,
        chi2: normal.chi2,
        chi2_reduced: normal.chi2 / dof as f64,
        iterations,
        converged: convergence != Convergence::NotConverged,
        convergence,
        objective_trace: trace,
    })
}

/// Largest cosine between the weighted residual vector and a Jacobian column.
fn gradient_cosine(n: &Normal) -> f64 {
    let rnorm = n.chi2.sqrt();
    (0..N_PARAMS)
        .map(|i| {
            let col = n.h[(i, i)].sqrt();
            if col == 0.0 || rnorm == 0.0 {
                0.0
            } else {
                n.g[i].abs() / (col * rnorm)
            }
        })
        .fold(0.0, f64::max)
}

fn damped_step(n: &Normal, lambda: f64) -> Option<Vector4<f64>> {
    let max_diag = (0..N_PARAMS).map(|i| n.h[(i, i)]).fold(0.0, f64::max);
    let mut a = n.h;
    for i in 0..N_PARAMS {
        a[(i, i)] += lambda * n.h[(i, i)].max(1e-12 * max_diag);
    }
    let step = a.cholesky()?.solve(&n.g);
    step.iter().all(|s| s.is_finite()).then_some(step)
}

/// Parameter covariance in natural units from the normal matrix in log space.
fn covariance(h: &Matrix4<f64>, p: &DipModelParams) -> Result<Matrix4<f64>> {
    // equilibrate before inverting so that the conditioning test is scale free
    let d: [f64; 4] = std::array::from_fn(|i| h[(i, i)].sqrt());
    if d.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Degenerate(
            "a parameter has no influence on the model (flat data?)".into(),
        ));
    }
    let scaled = Matrix4::from_fn(|i, j| h[(i, j)] / (d[i] * d[j]));
    let eig = scaled.symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 1e-12 * max) {
        return Err(Error::Degenerate(format!(
            "normal matrix is singular (condition {:.2e}); tau_c is not identifiable",
            max / min.max(f64::MIN_POSITIVE)
        )));
    }
    let inv = scaled
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("normal matrix is not invertible".into()))?;
    let jac = [p.n_inf, p.tau_d, p.tau_c, 1.0];
    let mut c = Matrix4::from_fn(|i, j| inv[(i, j)] / (d[i] * d[j]) * jac[i] * jac[j]);
    c = 0.5 * (c + c.transpose());
    Ok(c)
}

/// Bootstrap spread of the fitted parameters over `resamples` row resamplings.
pub fn bootstrap(
    points: &[ScanPoint],
    speed_m_s: f64,
    config: &FitConfig,
    form: ProfileForm,
    resamples: usize,
    seed: u64,
    exec: Execution,
) -> Result<DipUncertainty> {
    check_points(points)?;
    let start = initial_guess(points, speed_m_s)?;
    let base = fit_dip_from(points, speed_m_s, config, form, &start)?;
    let fits: Vec<Option<DipModelParams>> = map_indices(resamples, exec, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let sample: Vec<ScanPoint> = (0..points.len())
            .map(|_| points[rng.random_range(0..points.len())])
            .collect();
        fit_dip_from(&sample, speed_m_s, config, form, &base.params)
            .ok()
            .filter(|f| f.converged)
            .map(|f| f.params)
    });
    let ok: Vec<DipModelParams> = fits.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::Degenerate("bootstrap resamples failed to fit".into()));
    }
    let sd = |f: fn(&DipModelParams) -> f64| {
        let n = ok.len() as f64;
        let mean = ok.iter().map(f).sum::<f64>() / n;
        (ok.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(DipUncertainty {
        n_inf: sd(|p| p.n_inf),
        tau_d: sd(|p| p.tau_d),
        tau_c: sd(|p| p.tau_c),
        x0_mm: sd(|p| p.x0_mm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Poisson};

    fn synthetic(p: &DipModelParams, v: f64, xs: impl Iterator<Item = f64>, form: ProfileForm) -> Vec<ScanPoint> {
        let theta = to_theta(p);
        xs.map(|x| ScanPoint {
            x_mm: x,
            counts: model(x, &theta, v, form),
        })
        .collect()
    }

    fn grid(lo: f64, step: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| lo + i as f64 * step)
    }

    fn assert_recovers(fit: &FitResult, truth: &DipModelParams, tol: f64) {
        let got = &fit.params;
        for (name, a, b) in [
            ("n_inf", got.n_inf, truth.n_inf),
            ("tau_d", got.tau_d, truth.tau_d),
            ("tau_c", got.tau_c, truth.tau_c),
            ("x0", got.x0_mm, truth.x0_mm),
        ] {
            assert!(((a - b) / b).abs() < tol, "{name}: {a} vs {b}");
        }
    }

    #[test]
    fn noiseless_scintillator_round_trip() {
        let truth = DipModelParams::scintillator_reference();
        let pts = synthetic(&truth, 630.0, grid(0.0, 0.04, 101), ProfileForm::PaperApprox);
        let fit = fit_dip(&pts, 630.0, &FitConfig::default(), ProfileForm::PaperApprox).unwrap();
        assert!(fit.converged);
        assert_recovers(&fit, &truth, 1e-6);
        assert!(fit.chi2_reduced < 1e-12);
    }

    #[test]
    fn noiseless_helium_round_trip_both_forms() {
        let truth = DipModelParams::helium3_reference();
        for form in [ProfileForm::PaperApprox, ProfileForm::ExactConvolution] {
            let pts = synthetic(&truth, 630.0, grid(-2.0, 0.1, 83), form);
            let fit = fit_dip(&pts, 630.0, &FitConfig::default(), form).unwrap();
            assert!(fit.converged);
            assert_recovers(&fit, &truth, 1e-6);
        }
    }

    #[test]
    fn objective_never_increases() {
        let truth = DipModelParams::new(3200.0, 4e-3, 1e-3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = synthetic(&truth, 1.0, grid(-40.0, 2.0, 41), ProfileForm::PaperApprox);
        for p in &mut pts {
            p.counts = Poisson::new(p.counts).unwrap().sample(&mut rng);
        }
        let start = DipModelParams::new(3000.0, 9e-3, 4e-3, -5.0);
        let fit = fit_dip_from(&pts, 1.0, &FitConfig::default(), ProfileForm::PaperApprox, &start)
            .unwrap();
        assert!(fit.converged);
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let c = &fit.covariance;
        assert_eq!(*c, c.transpose());
        assert!(c.symmetric_eigen().eigenvalues.min() >= 0.0);
        for i in 0..4 {
            assert_eq!(fit.sigma[i], c[(i, i)].sqrt());
        }
    }

    #[test]
    fn flat_noiseless_data_is_degenerate() {
        let pts: Vec<ScanPoint> = grid(-10.0, 1.0, 21)
            .map(|x| ScanPoint { x_mm: x, counts: 500.0 })
            .collect();
        let err = fit_dip(&pts, 1.0, &FitConfig::default(), ProfileForm::PaperApprox).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn too_few_points_and_dof() {
        let pts: Vec<ScanPoint> = grid(0.0, 1.0, 5)
            .map(|x| ScanPoint { x_mm: x, counts: 10.0 })
            .collect();
        assert!(matches!(
            fit_dip(&pts, 1.0, &FitConfig::default(), ProfileForm::PaperApprox),
            Err(Error::InsufficientData(_))
        ));
        let p = DipModelParams::new(10.0, 1e-3, 1e-4, 0.0);
        assert!(goodness_of_fit(&pts[..4], &p, 1.0, ProfileForm::PaperApprox).is_err());
        assert!(goodness_of_fit(&pts, &p, 1.0, ProfileForm::PaperApprox).is_ok());
    }

    #[test]
    fn zero_count_rows_use_unit_variance() {
        assert_eq!(weight(0.0), 1.0);
        assert_eq!(weight(0.5), 1.0);
        assert_eq!(weight(4.0), 0.25);
    }

    #[test]
    fn goodness_of_fit_noiseless_is_zero() {
        let truth = DipModelParams::scintillator_reference();
        let pts = synthetic(&truth, 630.0, grid(0.0, 0.04, 101), ProfileForm::PaperApprox);
        let chi = goodness_of_fit(&pts, &truth, 630.0, ProfileForm::PaperApprox).unwrap();
        assert!(chi < 1e-20);
    }
}
