//! Point spectrum along the computed pulse: linearization, shifted system,
//! an analytic Evans function built from the unstable direction at the left
//! end and the stable 2-plane (as a second-compound trajectory) at the right
//! end, zero counting on contours, the large-|lambda| check and the reduced
//! front/back problems.

use std::io::Write;

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::{self, Contour, Region, RefinedZero, WindingResult};
use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::model::{FieldMode, LayerKind, LayerOrbit, ModelParams, SlowFastState};
use crate::ode::Dopri5;
use crate::pulse::PulseSolution;

type C = Complex64;

fn cr(x: f64) -> C {
    C::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub k1: f64,
    pub eta: f64,
    pub delta: f64,
    pub m_tilde: f64,
    pub nu: f64,
    pub trace_normalize: bool,
    pub xi_match: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl SpectralConfig {
    /// eta = sqrt(2k) F_m k1 / 4.
    pub fn lemma_eta(params: &ModelParams, k1: f64) -> f64 {
        (2.0 * params.k).sqrt() * params.f_min() * k1 / 4.0
    }

    /// Defaults for a computed pulse. The shift is the larger of the lemma
    /// value and the midpoint between the slow spatial rate at Re lambda = -delta
    /// and the fast unstable rate there, so that the closed disk of radius
    /// delta stays shift-admissible.
    pub fn for_pulse(pulse: &PulseSolution) -> Self {
        let p = &pulse.params;
        let c = pulse.speed;
        let delta = 0.1_f64.max(8.0 * p.eps);
        let k1 = 0.5 - p.a;
        let f0 = p.f_zero();
        let b = c * f0 * f0;
        let ka = p.k * p.a - delta;
        let mu_u = 0.5 * (b + (b * b + 4.0 * f0 * f0 * ka.max(0.0)).sqrt());
        let mu_slow = (delta - p.eps * p.gamma) / c;
        let eta = Self::lemma_eta(p, k1).max(0.5 * (mu_slow + mu_u));
        Self {
            k1,
            eta,
            delta,
            m_tilde: 10.0 * (1.0 + p.k),
            nu: 1.0,
            trace_normalize: true,
            xi_match: 0.0,
            rtol: 1e-10,
            atol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if !(self.m_tilde >= 10.0 * self.delta) {
            return Err(Error::InvalidParameter(format!("M_tilde = {} must be >= 10 delta", self.m_tilde)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("nu = {} must be positive", self.nu)));
        }
        Ok(())
    }

    /// max{sqrt(2/k) 2/F(0), sqrt(2/k) 2/(F(w_b) U2(w_b)), 2/mu_gap}.
    pub fn nu_lower_bound(params: &ModelParams, mu_gap: f64) -> Result<f64> {
        let b = params.solve_wb()?;
        let fb = params.deformation(b.w_b)?.f;
        let s = (2.0 / params.k).sqrt();
        Ok((s * 2.0 / params.f_zero()).max(s * 2.0 / (fb * b.u2)).max(2.0 / mu_gap))
    }
}

/// A0 assembled from a phase-space point; affine in lambda.
pub fn linearization_from_state(params: &ModelParams, c: f64, s: SlowFastState, lambda: C) -> Result<Matrix3<C>> {
    let d = params.deformation(s.w)?;
    let r = params.reaction(s.u, s.w);
    let g = params.vector_field(c, s, FieldMode::Fast)?;
    let (f, fw, fww) = (d.f, d.f_w, d.f_ww);
    let (up, vp, wp) = (g.u, g.v, g.w);
    let upp = fw * wp * s.v + f * vp;
    let eps = params.eps;
    let eg = eps * params.gamma;
    let a21 = (lambda + r.f_u) * f + eps * fw * up / (c * f * f);
    let delta = cr(2.0 * fw * upp - 3.0 * fw * fw * up * wp / f + fww * up * wp) - (lambda + eg) * (fw * up / c);
    let a23 = cr(f * r.f_w) + delta / (f * f);
    let z = cr(0.0);
    Ok(Matrix3::new(z, cr(f), z, a21, cr(c * f * f), a23, cr(eps / c), z, -(lambda + eg) / c))
}

pub fn linearization_matrix(pulse: &PulseSolution, xi: f64, lambda: C) -> Result<Matrix3<C>> {
    let s = pulse.state_at(xi)?;
    linearization_from_state(&pulse.params, pulse.speed, s, lambda)
}

/// Same as `linearization_matrix` but evaluates beyond the grid with the
/// closed-form tails of the pulse.
pub fn linearization_matrix_extended(pulse: &PulseSolution, xi: f64, lambda: C) -> Result<Matrix3<C>> {
    linearization_from_state(&pulse.params, pulse.speed, pulse.state_extended(xi), lambda)
}

pub fn shifted_matrix(pulse: &PulseSolution, cfg: &SpectralConfig, xi: f64, lambda: C) -> Result<Matrix3<C>> {
    Ok(linearization_matrix(pulse, xi, lambda)? - Matrix3::identity() * cr(cfg.eta))
}

/// Second compound on the basis (e12, e13, e23).
pub fn compound2(a: &Matrix3<C>) -> Matrix3<C> {
    Matrix3::new(
        a[(0, 0)] + a[(1, 1)],
        a[(1, 2)],
        -a[(0, 2)],
        a[(2, 1)],
        a[(0, 0)] + a[(2, 2)],
        a[(0, 1)],
        -a[(2, 0)],
        a[(1, 0)],
        a[(1, 1)] + a[(2, 2)],
    )
}

/// phi ^ psi for psi = (psi12, psi13, psi23).
pub fn wedge(phi: &Vector3<C>, psi: &Vector3<C>) -> C {
    phi[0] * psi[2] - phi[1] * psi[1] + phi[2] * psi[0]
}

fn cross(a: &Vector3<C>, b: &Vector3<C>) -> Vector3<C> {
    Vector3::new(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])
}

fn vnorm(v: &Vector3<C>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues split into (slow, unstable, stable) by identity: the slow one is
/// nearest the (3,3) entry, the unstable one has the larger real part of the rest.
fn split_eigen(a: &Matrix3<C>) -> Result<(C, C, C)> {
    let ev = a
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::NonHyperbolic("eigenvalue computation failed".into()))?;
    let mut v: Vec<C> = ev.iter().copied().collect();
    let target = a[(2, 2)];
    let (is, _) = v
        .iter()
        .enumerate()
        .map(|(i, x)| (i, (x - target).norm()))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("three eigenvalues");
    let slow = v.remove(is);
    let (u, s) = if v[0].re >= v[1].re { (v[0], v[1]) } else { (v[1], v[0]) };
    Ok((slow, u, s))
}

/// Fixed choices that make the boundary vectors analytic along a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pinning {
    pub left_rows: (usize, usize),
    pub left_comp: usize,
    pub right_cols: (usize, usize),
    pub right_comp: usize,
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn best_pair<F: Fn(usize) -> Vector3<C>>(get: F) -> ((usize, usize), usize) {
    let mut best = ((0, 1), 0, -1.0);
    for &(i, j) in &PAIRS {
        let v = cross(&get(i), &get(j));
        let n = vnorm(&v);
        if n > best.2 {
            let comp = (0..3).max_by(|&x, &y| v[x].norm().total_cmp(&v[y].norm())).expect("three comps");
            best = ((i, j), comp, n);
        }
    }
    (best.0, best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvansValue {
    pub lambda: C,
    pub value: C,
    pub log_scale: C,
    pub conditioning: f64,
    /// Shifted asymptotic Morse index is one at both ends.
    pub admissible: bool,
}

pub struct EvansFunction<'a> {
    pub pulse: &'a PulseSolution,
    pub cfg: SpectralConfig,
    pub xi_left: f64,
    pub xi_right: f64,
    pub pinning: Pinning,
}

struct Boundary {
    mu: C,
    vec: Vector3<C>,
    admissible: bool,
}

impl<'a> EvansFunction<'a> {
    /// Pinning is fixed at the reference point lambda = delta.
    pub fn new(pulse: &'a PulseSolution, cfg: SpectralConfig) -> Result<Self> {
        Self::with_reference(pulse, cfg, cr(cfg.delta))
    }

    pub fn with_reference(pulse: &'a PulseSolution, cfg: SpectralConfig, lambda_ref: C) -> Result<Self> {
        cfg.validate()?;
        let mut ev = Self {
            pulse,
            cfg,
            xi_left: pulse.left_end(),
            xi_right: pulse.right_end(),
            pinning: Pinning { left_rows: (0, 2), left_comp: 0, right_cols: (0, 1), right_comp: 0 },
        };
        let al = ev.matrix(ev.xi_left, lambda_ref)?;
        let (_, mu_l, _) = split_eigen(&al)?;
        let ml = al - Matrix3::identity() * mu_l;
        let (rows, lc) = best_pair(|i| ml.row(i).transpose());
        let ar = ev.matrix(ev.xi_right, lambda_ref)?;
        let (_, mu_r, _) = split_eigen(&ar)?;
        let mr = ar - Matrix3::identity() * mu_r;
        let (cols, rc) = best_pair(|j| mr.column(j).into_owned());
        ev.pinning = Pinning { left_rows: rows, left_comp: lc, right_cols: cols, right_comp: rc };
        Ok(ev)
    }

    pub fn with_ends(mut self, xi_left: f64, xi_right: f64) -> Result<Self> {
        if !(self.pulse.contains(xi_left) && self.pulse.contains(xi_right) && xi_left < xi_right) {
            return Err(Error::OutOfRange(format!("ends [{xi_left}, {xi_right}] not inside the pulse grid")));
        }
        self.xi_left = xi_left;
        self.xi_right = xi_right;
        Ok(self)
    }

    /// Shifted matrix A(xi, lambda) = A0 - eta I.
    pub fn matrix(&self, xi: f64, lambda: C) -> Result<Matrix3<C>> {
        shifted_matrix(self.pulse, &self.cfg, xi, lambda)
    }

    fn left_boundary(&self, lambda: C) -> Result<Boundary> {
        let a = self.matrix(self.xi_left, lambda)?;
        let (slow, mu, st) = split_eigen(&a)?;
        let m = a - Matrix3::identity() * mu;
        let (i, j) = self.pinning.left_rows;
        let v = cross(&m.row(i).transpose(), &m.row(j).transpose());
        let pin = v[self.pinning.left_comp];
        if pin.norm() < 1e-8 * vnorm(&v) {
            return Err(Error::Contour(format!("left pinning degenerates at lambda = {lambda}")));
        }
        Ok(Boundary { mu, vec: v / pin, admissible: mu.re > 0.0 && slow.re < 0.0 && st.re < 0.0 })
    }

    fn right_boundary(&self, lambda: C) -> Result<Boundary> {
        let a = self.matrix(self.xi_right, lambda)?;
        let (slow, mu, st) = split_eigen(&a)?;
        let m = a - Matrix3::identity() * mu;
        let (i, j) = self.pinning.right_cols;
        let l = cross(&m.column(i).into_owned(), &m.column(j).into_owned());
        let pin = l[self.pinning.right_comp];
        if pin.norm() < 1e-8 * vnorm(&l) {
            return Err(Error::Contour(format!("right pinning degenerates at lambda = {lambda}")));
        }
        let l = l / pin;
        // Stable plane as a 2-form: (psi12, psi13, psi23) = (l3, -l2, l1).
        let psi = Vector3::new(l[2], -l[1], l[0]);
        let sigma = a.trace() - mu;
        Ok(Boundary { mu: sigma, vec: psi, admissible: mu.re > 0.0 && slow.re < 0.0 && st.re < 0.0 })
    }

    fn propagate(&self, lambda: C, from: f64, to: f64, y0: Vector3<C>, shift: C, compound: bool) -> Result<Vector3<C>> {
        let mut fail = false;
        let rhs = |xi: f64, y: &[f64], dy: &mut [f64]| {
            let a = match self.matrix(xi, lambda) {
                Ok(a) => a,
                Err(_) => {
                    fail = true;
                    dy.iter_mut().for_each(|d| *d = f64::NAN);
                    return;
                }
            };
            let mut m = if compound { compound2(&a) } else { a };
            if self.cfg.trace_normalize {
                m -= Matrix3::identity() * shift;
            }
            let v = Vector3::new(C::new(y[0], y[1]), C::new(y[2], y[3]), C::new(y[4], y[5]));
            let r = m * v;
            for k in 0..3 {
                dy[2 * k] = r[k].re;
                dy[2 * k + 1] = r[k].im;
            }
        };
        let y = [y0[0].re, y0[0].im, y0[1].re, y0[1].im, y0[2].re, y0[2].im];
        let (out, _) = Dopri5::new(self.cfg.rtol, self.cfg.atol).integrate(rhs, from, to, &y, |_, _, _| {})?;
        if fail || out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Integration(format!("Evans integration failed at lambda = {lambda}")));
        }
        Ok(Vector3::new(C::new(out[0], out[1]), C::new(out[2], out[3]), C::new(out[4], out[5])))
    }

    pub fn evaluate(&self, lambda: C) -> Result<EvansValue> {
        self.evaluate_at(lambda, self.cfg.xi_match)
    }

    /// Wedge pairing at the matching point xi_m.
    pub fn evaluate_at(&self, lambda: C, xi_m: f64) -> Result<EvansValue> {
        if !(xi_m > self.xi_left && xi_m < self.xi_right) {
            return Err(Error::OutOfRange(format!("matching point {xi_m} outside the integration window")));
        }
        let lb = self.left_boundary(lambda)?;
        let rb = self.right_boundary(lambda)?;
        let phi = self.propagate(lambda, self.xi_left, xi_m, lb.vec, lb.mu, false)?;
        let psi = self.propagate(lambda, self.xi_right, xi_m, rb.vec, rb.mu, true)?;
        let value = wedge(&phi, &psi);
        let log_scale = if self.cfg.trace_normalize {
            lb.mu * (xi_m - self.xi_left) + rb.mu * (xi_m - self.xi_right)
        } else {
            cr(0.0)
        };
        Ok(EvansValue {
            lambda,
            value,
            log_scale,
            conditioning: value.norm() / (vnorm(&phi) * vnorm(&psi)),
            admissible: lb.admissible && rb.admissible,
        })
    }

    pub fn value(&self, lambda: C) -> Result<C> {
        Ok(self.evaluate(lambda)?.value)
    }
}

pub fn evans_function(pulse: &PulseSolution, cfg: &SpectralConfig, lambda: C) -> Result<EvansValue> {
    EvansFunction::new(pulse, *cfg)?.evaluate(lambda)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourReport {
    pub region: Region,
    pub winding: i64,
    pub zeros: Vec<RefinedZero>,
    pub samples: usize,
    #[serde(skip)]
    pub contour: Vec<C>,
    #[serde(skip)]
    pub scan: Vec<EvansValue>,
}

impl ContourReport {
    pub fn zero_count(&self) -> i64 {
        self.zeros.iter().map(|z| z.order).sum()
    }

    /// CSV columns re_lambda, im_lambda, re_E, im_E, log_scale.
    pub fn write_scan_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re_lambda,im_lambda,re_E,im_E,log_scale")?;
        for s in &self.scan {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(s.lambda.re),
                fmt17(s.lambda.im),
                fmt17(s.value.re),
                fmt17(s.value.im),
                fmt17(s.log_scale.re)
            )?;
        }
        Ok(())
    }
}

pub const MAX_CONTOUR_POINTS: usize = 20_000;

/// Argument-principle count on `contour`, with refinement of the enclosed zeros.
/// Boundary vectors are pinned at a point of the contour.
pub fn count_zeros(pulse: &PulseSolution, cfg: &SpectralConfig, contour: &Contour, n_points: usize) -> Result<ContourReport> {
    let ev = EvansFunction::with_reference(pulse, *cfg, contour.point(0.0))?;
    count_zeros_with(&ev, contour, n_points)
}

pub fn count_zeros_with(ev: &EvansFunction, contour: &Contour, n_points: usize) -> Result<ContourReport> {
    let f = |z: C| -> Result<C> {
        let v = ev.evaluate(z)?;
        if !v.admissible {
            return Err(Error::Contour(format!(
                "lambda = {z} is not shift-admissible (asymptotic Morse index differs from one); consider adjusting delta or eta"
            )));
        }
        Ok(v.value)
    };
    let wr: WindingResult = contour::winding(&f, contour, n_points, MAX_CONTOUR_POINTS)?;
    let zeros = if wr.winding > 0 { contour::refine_zeros(&f, contour, &wr)? } else { Vec::new() };
    let scan = wr
        .samples
        .iter()
        .map(|s| EvansValue { lambda: s.z, value: s.value, log_scale: cr(0.0), conditioning: f64::NAN, admissible: true })
        .collect();
    Ok(ContourReport {
        region: contour.region,
        winding: wr.winding,
        zeros,
        samples: wr.samples.len(),
        contour: wr.samples.iter().map(|s| s.z).collect(),
        scan,
    })
}

/// Standard contours: boundary of R1, the bounded sector R2, a rectangle inside
/// R2, the clipped outer sector, and the right half-disk used for a = 0.
pub struct StandardContours;

impl StandardContours {
    pub fn r1(cfg: &SpectralConfig) -> Contour {
        Contour::circle(cr(0.0), cfg.delta, Region::R1)
    }

    pub fn r2(cfg: &SpectralConfig) -> Contour {
        Contour::annular_sector(cfg.delta, cfg.m_tilde, -0.9 * cfg.delta, Region::R2)
    }

    pub fn r2_rectangle(cfg: &SpectralConfig) -> Contour {
        let h = 0.5 * cfg.m_tilde;
        Contour::rectangle(cfg.delta, h, -h, h, Region::R2)
    }

    /// M_tilde <= |lambda| <= 2 M_tilde, clipped to Re lambda >= -0.9 delta.
    pub fn r3(cfg: &SpectralConfig) -> Contour {
        Contour::annular_sector(cfg.m_tilde, 2.0 * cfg.m_tilde, -0.9 * cfg.delta, Region::R3)
    }

    pub fn omega_plus(cfg: &SpectralConfig) -> Contour {
        Contour::disk_segment(cfg.m_tilde, 0.5 * cfg.delta, Region::OmegaPlus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R3Sample {
    pub lambda: C,
    pub case1: bool,
    pub re_sqrt_unit: f64,
    pub re_mu1: f64,
    pub min_re_mu23: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct R3Report {
    pub bound: f64,
    pub samples: Vec<R3Sample>,
    pub case1: usize,
    pub case2: usize,
    pub min_re_sqrt_unit: f64,
    pub min_re_mu23: f64,
    pub all_ok: bool,
    pub arc_min_abs_e: f64,
    pub arc_max_abs_e: f64,
    pub arc_points: usize,
}

/// Rescaled hyperbolicity criteria for |lambda| > M_tilde, |arg lambda| <= 2 pi / 3,
/// plus a scan of E on the admissible part of the arc |lambda| = 2 M_tilde.
pub fn r3_exclusion_check(pulse: &PulseSolution, cfg: &SpectralConfig, lambda_samples: &[C]) -> Result<R3Report> {
    let p = &pulse.params;
    let c = pulse.speed;
    let bound = 0.25 + p.m / (8.0 * p.c1);
    let f_min_pulse = pulse
        .states
        .iter()
        .map(|s| p.deformation(s.w).map(|d| d.f))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut samples = Vec::new();
    for &lam in lambda_samples {
        if lam.norm() <= cfg.m_tilde || lam.arg().abs() > 2.0 * std::f64::consts::FRAC_PI_3 {
            return Err(Error::OutOfRange(format!("sample {lam} outside the large-|lambda| sector")));
        }
        let unit = (lam / lam.norm()).sqrt();
        let re_mu1 = (-lam / (c * lam.norm().sqrt())).re;
        let mu23 = unit * f_min_pulse;
        let min23 = mu23.re.abs();
        let case1 = 8.0 * lam.re.abs() > c * lam.norm().sqrt();
        let ok = unit.re > 0.5 && min23 > bound && if case1 { re_mu1.abs() > 0.125 } else { re_mu1.abs() <= 0.125 };
        samples.push(R3Sample { lambda: lam, case1, re_sqrt_unit: unit.re, re_mu1, min_re_mu23: min23, ok });
    }
    let ev = EvansFunction::with_reference(pulse, *cfg, cr(2.0 * cfg.m_tilde))?;
    let n_arc = 64;
    let mut mins = f64::INFINITY;
    let mut maxs: f64 = 0.0;
    // Admissible part of the outer arc, Re lambda >= -0.9 delta.
    let to = (-0.9 * cfg.delta / (2.0 * cfg.m_tilde)).acos();
    for i in 0..=n_arc {
        let th = -to + 2.0 * to * i as f64 / n_arc as f64;
        let v = ev.evaluate(C::from_polar(2.0 * cfg.m_tilde, th))?.value.norm();
        mins = mins.min(v);
        maxs = maxs.max(v);
    }
    Ok(R3Report {
        bound,
        case1: samples.iter().filter(|s| s.case1).count(),
        case2: samples.iter().filter(|s| !s.case1).count(),
        min_re_sqrt_unit: samples.iter().map(|s| s.re_sqrt_unit).fold(f64::INFINITY, f64::min),
        min_re_mu23: samples.iter().map(|s| s.min_re_mu23).fold(f64::INFINITY, f64::min),
        all_ok: samples.iter().all(|s| s.ok),
        samples,
        arc_min_abs_e: mins,
        arc_max_abs_e: maxs,
        arc_points: n_arc + 1,
    })
}

/// Grid of sample points in the large-|lambda| sector.
pub fn r3_sample_grid(cfg: &SpectralConfig, n_radii: usize, n_angles: usize) -> Vec<C> {
    let mut out = Vec::new();
    let amax = 2.0 * std::f64::consts::FRAC_PI_3 * 0.999;
    for i in 0..n_radii {
        let r = cfg.m_tilde * (1.0 + 0.01 + 9.0 * i as f64 / (n_radii.max(2) - 1) as f64);
        for j in 0..n_angles {
            let th = -amax + 2.0 * amax * j as f64 / (n_angles.max(2) - 1) as f64;
            out.push(C::from_polar(r, th));
        }
    }
    out
}

/// Reduced 2x2 problem along a closed-form layer orbit (eps = 0).
pub struct ReducedProblem {
    pub params: ModelParams,
    pub orbit: LayerOrbit,
    pub eta: f64,
    pub half_length: f64,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedSpectrum {
    pub kind: LayerKind,
    pub eta: f64,
    pub scan_lower: f64,
    pub eigenvalues: Vec<f64>,
    pub top_eigenvalue: f64,
    pub sign_changes: usize,
    pub r2_clear: bool,
    pub r2_winding: i64,
}

impl ReducedProblem {
    pub fn new(params: &ModelParams, orbit: LayerOrbit, eta: f64) -> Self {
        Self { params: *params, orbit, eta, half_length: 40.0 / orbit.rate.abs(), rtol: 1e-11, atol: 1e-13 }
    }

    fn matrix(&self, xi: f64, lambda: C) -> Matrix2<C> {
        let f = self.orbit.f_level;
        let fu = self.params.reaction(self.orbit.u(xi), self.orbit.w_level).f_u;
        let b = self.orbit.speed * f * f;
        Matrix2::new(cr(-self.eta), cr(f), (lambda + fu) * f, cr(b - self.eta))
    }

    fn end_u(&self, right: bool) -> f64 {
        let (l, r) = (self.orbit.endpoints[0].0, self.orbit.endpoints[1].0);
        if right {
            r
        } else {
            l
        }
    }

    /// Lower end of the real interval where both shifted limits are hyperbolic
    /// with one unstable direction.
    pub fn hyperbolic_lower_bound(&self) -> f64 {
        let f = self.orbit.f_level;
        let b = self.orbit.speed * f * f;
        let h = self.eta;
        [false, true]
            .iter()
            .map(|&r| {
                let fu = self.params.reaction(self.end_u(r), self.orbit.w_level).f_u;
                (h * h - b * h) / (f * f) - fu
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn eig(&self, xi: f64, lambda: C) -> (C, C) {
        let m = self.matrix(xi, lambda);
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (tr * tr * 0.25 - det).sqrt();
        let (p, q) = (tr * 0.5 + disc, tr * 0.5 - disc);
        if p.re >= q.re {
            (p, q)
        } else {
            (q, p)
        }
    }

    fn propagate(&self, lambda: C, from: f64, to: f64, y0: [C; 2], shift: C, mut obs: impl FnMut(f64, [C; 2])) -> Result<[C; 2]> {
        let rhs = |xi: f64, y: &[f64], dy: &mut [f64]| {
            let m = self.matrix(xi, lambda) - Matrix2::identity() * shift;
            let v0 = C::new(y[0], y[1]);
            let v1 = C::new(y[2], y[3]);
            let r0 = m[(0, 0)] * v0 + m[(0, 1)] * v1;
            let r1 = m[(1, 0)] * v0 + m[(1, 1)] * v1;
            dy[0] = r0.re;
            dy[1] = r0.im;
            dy[2] = r1.re;
            dy[3] = r1.im;
        };
        let y = [y0[0].re, y0[0].im, y0[1].re, y0[1].im];
        let (out, _) = Dopri5::new(self.rtol, self.atol).with_h_max(0.1).integrate(rhs, from, to, &y, |t, y, _| {
            obs(t, [C::new(y[0], y[1]), C::new(y[2], y[3])])
        })?;
        Ok([C::new(out[0], out[1]), C::new(out[2], out[3])])
    }

    /// det[phi_-(0), phi_+(0)] with growth removed.
    pub fn evans(&self, lambda: C) -> Result<C> {
        let l = self.half_length;
        let f = self.orbit.f_level;
        let (mu_l, _) = self.eig(-l, lambda);
        let (_, mu_r) = self.eig(l, lambda);
        let phi = self.propagate(lambda, -l, 0.0, [cr(f), mu_l + self.eta], mu_l, |_, _| {})?;
        let psi = self.propagate(lambda, l, 0.0, [cr(f), mu_r + self.eta], mu_r, |_, _| {})?;
        Ok(phi[0] * psi[1] - phi[1] * psi[0])
    }

    /// Sign changes of the first component of the stitched eigenfunction at lambda.
    pub fn eigenfunction_sign_changes(&self, lambda: f64) -> Result<usize> {
        let lam = cr(lambda);
        let l = self.half_length;
        let f = self.orbit.f_level;
        let (mu_l, _) = self.eig(-l, lam);
        let (_, mu_r) = self.eig(l, lam);
        let mut left = Vec::new();
        let mut right = Vec::new();
        let phi = self.propagate(lam, -l, 0.0, [cr(f), mu_l + self.eta], mu_l, |_, y| left.push(y[0].re))?;
        let psi = self.propagate(lam, l, 0.0, [cr(f), mu_r + self.eta], mu_r, |_, y| right.push(y[0].re))?;
        let alpha = if psi[0].norm() > psi[1].norm() { (phi[0] / psi[0]).re } else { (phi[1] / psi[1]).re };
        let count = |vals: &[f64], scale: f64| {
            let m = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            let mut sign = 0.0;
            let mut n = 0;
            for &v in vals {
                let v = v * scale;
                if v.abs() < 1e-6 * m * scale.abs() {
                    continue;
                }
                if sign != 0.0 && v.signum() != sign {
                    n += 1;
                }
                sign = v.signum();
            }
            n
        };
        let mut joined: Vec<f64> = left;
        joined.extend(right.iter().rev().map(|v| v * alpha));
        Ok(count(&joined, 1.0))
    }

    /// Real eigenvalues in [lo, hi] from sign changes of the reduced Evans
    /// function on a uniform grid, refined by bisection.
    pub fn real_eigenvalues(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
        let d = |x: f64| -> Result<f64> { Ok(self.evans(cr(x))?.re) };
        let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let vals = xs.iter().map(|&x| d(x)).collect::<Result<Vec<_>>>()?;
        let mut roots = Vec::new();
        for i in 0..n {
            if vals[i] == 0.0 {
                roots.push(xs[i]);
                continue;
            }
            if vals[i].signum() != vals[i + 1].signum() && vals[i + 1] != 0.0 {
                let (mut a, mut b, fa) = (xs[i], xs[i + 1], vals[i]);
                for _ in 0..200 {
                    if b - a < 1e-14 * (1.0 + a.abs()) {
                        break;
                    }
                    let m = 0.5 * (a + b);
                    let fm = d(m)?;
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == fa.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        Ok(roots)
    }
}

pub fn reduced_front_back_spectrum(params: &ModelParams, cfg: &SpectralConfig, j: LayerKind) -> Result<ReducedSpectrum> {
    let orbit = match j {
        LayerKind::Front => params.front_profile(),
        LayerKind::Back => params.back_profile()?,
    };
    // Keep the shift inside the reduced admissible window at lambda = 0.
    let f = orbit.f_level;
    let b = orbit.speed * f * f;
    let fu_min = [orbit.endpoints[0].0, orbit.endpoints[1].0]
        .iter()
        .map(|&u| params.reaction(u, orbit.w_level).f_u)
        .fold(f64::INFINITY, f64::min);
    let mu_plus = 0.5 * (b + (b * b + 4.0 * f * f * fu_min).sqrt());
    let eta = cfg.eta.min(0.5 * mu_plus);
    let rp = ReducedProblem::new(params, orbit, eta);
    let lower = rp.hyperbolic_lower_bound();
    let lo = lower + 0.25 * (-lower).max(0.02);
    let roots = rp.real_eigenvalues(lo, cfg.m_tilde, 600)?;
    let top = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Contour("no reduced eigenvalue found on the real axis".into()));
    }
    let sign_changes = rp.eigenfunction_sign_changes(top)?;
    let in_r2 = roots.iter().any(|&r| r >= cfg.delta && r <= cfg.m_tilde);
    let ev = |z: C| rp.evans(z);
    let wr = contour::winding(&ev, &StandardContours::r2(cfg), 128, MAX_CONTOUR_POINTS)?;
    Ok(ReducedSpectrum {
        kind: j,
        eta,
        scan_lower: lo,
        eigenvalues: roots,
        top_eigenvalue: top,
        sign_changes,
        r2_clear: !in_r2 && wr.winding == 0,
        r2_winding: wr.winding,
    })
}
