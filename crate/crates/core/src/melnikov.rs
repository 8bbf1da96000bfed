//! Melnikov-type integrals along the front and back layers and the resulting
//! prediction of the second small eigenvalue.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evans::SpectralConfig;
use crate::model::{LayerOrbit, ModelParams};
use crate::pulse::{JumpLevel, PulseSolution};
use crate::quad::{self, QuadResult, TailRates};

/// Relative accuracy requested from every quadrature here.
pub const REL_TOL: f64 = 1e-12;
/// Tail truncation is pushed out until the analytic bound is below this fraction.
pub const TAIL_REL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadDiagnostics {
    pub panels: usize,
    pub error: f64,
    pub tail_bound: f64,
    pub cutoff: (f64, f64),
}

impl From<&QuadResult> for QuadDiagnostics {
    fn from(r: &QuadResult) -> Self {
        Self { panels: r.panels, error: r.error, tail_bound: r.tail_bound, cutoff: r.cutoff }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Integral {
    pub value: f64,
    pub diagnostics: QuadDiagnostics,
}

impl Integral {
    fn from_result(r: QuadResult) -> Self {
        Self { value: r.value, diagnostics: (&r).into() }
    }
}

/// The three components of Psi_* and the pairing point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsiStar {
    pub psi: [f64; 3],
    pub l_eps: f64,
    pub xi_pair: f64,
    pub third: Integral,
}

#[derive(Debug, Clone, Serialize)]
pub struct MelnikovReport {
    pub a: f64,
    pub eps: f64,
    pub m_f: f64,
    pub m_b1: f64,
    /// Inner-product value; None when only closed-form inputs were used.
    pub m_b2_full: Option<f64>,
    pub m_b2_leading: f64,
    pub lambda1_pred: f64,
    pub b0_estimate: f64,
    pub u_b1: f64,
    pub w_b: f64,
    pub psi_star: Option<PsiStar>,
    pub quadrature: Vec<(String, QuadDiagnostics)>,
}

fn front_rates(params: &ModelParams, orbit: &LayerOrbit, weight: f64) -> Result<TailRates> {
    let two_s = 2.0 * orbit.rate.abs();
    if !(two_s > weight) {
        return Err(Error::Integrability(format!(
            "2 sigma = {two_s} does not exceed c0 F^2 = {weight} (a = {}, k = {})",
            params.a, params.k
        )));
    }
    Ok(TailRates { left: two_s - weight, right: two_s + weight })
}

/// M_f = int F(0) e^{-c0 F(0)^2 xi} u_f'(xi)^2 dxi.
pub fn integral_mf(params: &ModelParams) -> Result<Integral> {
    let front = params.front_profile();
    let f0 = front.f_level;
    let wgt = params.wave_speed_c0() * f0 * f0;
    let rates = front_rates(params, &front, wgt)?;
    let g = |x: f64| f0 * front.du(x).powi(2) * (-wgt * x).exp();
    Ok(Integral::from_result(quad::integrate_line(&g, rates, REL_TOL, TAIL_REL)?))
}

/// M_b1 = int F(w_b) u_b'(xi)^2 e^{-c0 F(w_b)^2 xi} dxi.
pub fn integral_mb1(params: &ModelParams) -> Result<Integral> {
    let back = params.back_profile()?;
    let fb = back.f_level;
    let wgt = params.wave_speed_c0() * fb * fb;
    let rates = front_rates(params, &back, wgt)?;
    let g = |x: f64| fb * back.du(x).powi(2) * (-wgt * x).exp();
    Ok(Integral::from_result(quad::integrate_line(&g, rates, REL_TOL, TAIL_REL)?))
}

/// Leading-order value
/// -(eps/c0)(u_b1 - gamma w_b) [int u_b' e^{-c0 F_b^2 z} F_b u_b dz + c0 F_w(w_b) int u_b'^2 e^{-c0 F_b^2 z} dz].
pub fn integral_mb2_leading(params: &ModelParams, eps: f64) -> Result<(f64, [Integral; 2])> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    let back = params.back_profile()?;
    let fb = back.f_level;
    let c0 = params.wave_speed_c0();
    let wgt = c0 * fb * fb;
    let kappa = back.rate.abs();
    if !(kappa > wgt) {
        return Err(Error::Integrability(format!("sigma_b = {kappa} does not exceed c0 F_b^2 = {wgt}")));
    }
    let fw = params.deformation(back.w_level)?.f_w;
    let g1 = |x: f64| back.du(x) * (-wgt * x).exp() * fb * back.u(x);
    let i1 = quad::integrate_line(&g1, TailRates { left: kappa - wgt, right: 2.0 * kappa + wgt }, REL_TOL, TAIL_REL)?;
    let g2 = |x: f64| back.du(x).powi(2) * (-wgt * x).exp();
    let i2 = quad::integrate_line(&g2, front_rates(params, &back, wgt)?, REL_TOL, TAIL_REL)?;
    let pre = -(eps / c0) * (back.amplitude - params.gamma * back.w_level);
    let value = pre * (i1.value + c0 * fw * i2.value);
    Ok((value, [Integral::from_result(i1), Integral::from_result(i2)]))
}

/// Psi_* assembled from the back layer, with L_eps = -nu log eps.
pub fn psi_star(pulse: &PulseSolution, cfg: &SpectralConfig) -> Result<PsiStar> {
    let params = &pulse.params;
    if !matches!(pulse.jump, JumpLevel::Back { .. }) {
        return Err(Error::NoBackLayer("pulse jumps at the fold; no back layer to pair with".into()));
    }
    let back = params.back_profile()?;
    let fb = back.f_level;
    let wgt = params.wave_speed_c0() * fb * fb;
    let fw = params.deformation(back.w_level)?.f_w;
    let l_eps = -cfg.nu * params.eps.ln();
    let xi_pair = pulse.z_ae - l_eps;
    if !pulse.contains(xi_pair) {
        return Err(Error::OutOfRange(format!("pairing point {xi_pair} outside the pulse grid")));
    }
    let e = (wgt * l_eps).exp();
    let psi1 = e * back.d2u(-l_eps) / fb;
    let psi2 = -e * back.du(-l_eps);
    let delta = |z: f64| fb * back.u(z) + 2.0 * fw * back.d2u(z) / (fb * fb);
    let g = |z: f64| back.du(z) * (-wgt * z).exp() * delta(z);
    // int_inf^{-L} = -int_{-L}^{inf}
    let r = quad::integrate_from(&g, -l_eps, back.rate.abs() * 2.0 + wgt, REL_TOL, TAIL_REL)?;
    Ok(PsiStar { psi: [psi1, psi2, -r.value], l_eps, xi_pair, third: Integral::from_result(r) })
}

/// M_b2 = <Psi_*, phi'(Z - L_eps)>.
pub fn integral_mb2_full(pulse: &PulseSolution, cfg: &SpectralConfig) -> Result<(f64, PsiStar)> {
    let ps = psi_star(pulse, cfg)?;
    let d = pulse.derivative_at(ps.xi_pair)?;
    Ok((ps.psi[0] * d.u + ps.psi[1] * d.v + ps.psi[2] * d.w, ps))
}

/// lambda_1 = -m_b2 / m_b1, using the full value when it is available.
pub fn lambda1_prediction(report: &MelnikovReport) -> f64 {
    -report.m_b2_full.unwrap_or(report.m_b2_leading) / report.m_b1
}

fn assemble(params: &ModelParams, full: Option<(f64, PsiStar)>) -> Result<MelnikovReport> {
    let mf = integral_mf(params)?;
    let mb1 = integral_mb1(params)?;
    let (lead, inner) = integral_mb2_leading(params, params.eps)?;
    let back = params.back_profile()?;
    let mut quadrature = vec![
        ("m_f".to_string(), mf.diagnostics),
        ("m_b1".to_string(), mb1.diagnostics),
        ("m_b2_leading_1".to_string(), inner[0].diagnostics),
        ("m_b2_leading_2".to_string(), inner[1].diagnostics),
    ];
    if let Some((_, ps)) = &full {
        quadrature.push(("psi_star_3".to_string(), ps.third.diagnostics));
    }
    let mut report = MelnikovReport {
        a: params.a,
        eps: params.eps,
        m_f: mf.value,
        m_b1: mb1.value,
        m_b2_full: full.map(|f| f.0),
        m_b2_leading: lead,
        lambda1_pred: 0.0,
        b0_estimate: 0.0,
        u_b1: back.amplitude,
        w_b: back.w_level,
        psi_star: full.map(|f| f.1),
        quadrature,
    };
    report.lambda1_pred = lambda1_prediction(&report);
    report.b0_estimate = -report.lambda1_pred / params.eps;
    Ok(report)
}

/// Report from the closed-form layers only (no pulse needed).
pub fn melnikov_closed_form(params: &ModelParams) -> Result<MelnikovReport> {
    assemble(params, None)
}

/// Full report, pairing Psi_* with the computed pulse.
pub fn melnikov_report(pulse: &PulseSolution, cfg: &SpectralConfig) -> Result<MelnikovReport> {
    let full = integral_mb2_full(pulse, cfg)?;
    assemble(&pulse.params, Some(full))
}
