//! Dip model in scan coordinates with its analytic Jacobian.
//!
//! Fit parameters are `θ = [ln n_inf, ln tau_D, ln tau_c, x0_mm]`; the lag at
//! position `x` is `t = (x - x0) / v`.

use crate::physics::{DipModelParams, ProfileForm};

pub(crate) const N_PARAMS: usize = 4;

pub type Theta = [f64; N_PARAMS];

pub fn to_theta(p: &DipModelParams) -> Theta {
    [p.n_inf.ln(), p.tau_d.ln(), p.tau_c.ln(), p.x0_mm]
}

pub fn from_theta(theta: &Theta) -> DipModelParams {
    DipModelParams::new(theta[0].exp(), theta[1].exp(), theta[2].exp(), theta[3])
}

/// Model value and `∂m/∂θ` at position `x_mm`.
pub fn model_and_jacobian(
    x_mm: f64,
    theta: &Theta,
    speed_m_s: f64,
    form: ProfileForm,
) -> (f64, Theta) {
    let n = theta[0].exp();
    let tau_d = theta[1].exp();
    let tau_c = theta[2].exp();
    let k = 1e-3 / speed_m_s;
    let t = (x_mm - theta[3]) * k;
    // width², and d ln(width) / d ln(tau_D), d ln(width) / d ln(tau_c)
    let (s2, wd, wc) = match form {
        ProfileForm::PaperApprox => (tau_d * tau_d, 1.0, 0.0),
        ProfileForm::ExactConvolution => {
            let s2 = tau_c * tau_c + tau_d * tau_d;
            (s2, tau_d * tau_d / s2, tau_c * tau_c / s2)
        }
    };
    let u = t * t / s2;
    // dip term A·E = tau_c / (2 s) · exp(-t² / 2s²)
    let dip = 0.5 * tau_c / s2.sqrt() * (-0.5 * u).exp();
    let m = n * (1.0 - dip);
    // ∂ ln(dip) / ∂ ln s = u - 1
    let jac = [
        m,
        -n * dip * wd * (u - 1.0),
        -n * dip * (1.0 + wc * (u - 1.0)),
        -n * dip * t * k / s2,
    ];
    (m, jac)
}

pub fn model(x_mm: f64, theta: &Theta, speed_m_s: f64, form: ProfileForm) -> f64 {
    model_and_jacobian(x_mm, theta, speed_m_s, form).0
}
