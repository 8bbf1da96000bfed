//! Closed-form layer of the reaction-diffusion-mechanics model: the deformation
//! factor, the cubic reaction term, the travelling-wave vector fields, the
//! critical set and the explicit front/back layer orbits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and bifurcation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub k: f64,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub c1: f64,
    pub eps: f64,
}

/// Value of F and its first two derivatives in w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deformation {
    pub f: f64,
    pub f_w: f64,
    pub f_ww: f64,
}

/// Reaction term with partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reaction {
    pub f: f64,
    pub f_u: f64,
    pub f_w: f64,
}

/// A point (u, v, w) of the travelling-wave phase space, v = u'/F.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlowFastState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl SlowFastState {
    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self { u: y[0], v: y[1], w: y[2] }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    Fast,
    Layer,
    Reduced,
}

/// Equilibria of the layer system on a fixed level w0, U1 <= U2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalBranches {
    pub zero: f64,
    pub u1: f64,
    pub u2: f64,
}

/// Root of the back-layer level equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackLevel {
    pub w_b: f64,
    pub u1: f64,
    pub u2: f64,
    /// Sign changes of the level equation seen on a 1000-point scan of [0, fold].
    pub sign_changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Front,
    Back,
}

/// Closed-form heteroclinic of the layer system, u = amplitude * logistic(rate * xi + shift).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerOrbit {
    pub kind: LayerKind,
    pub w_level: f64,
    pub speed: f64,
    pub integration_constant: f64,
    pub endpoints: [(f64, f64); 2],
    pub amplitude: f64,
    /// Signed exponent multiplying xi inside the logistic.
    pub rate: f64,
    /// F(w_level).
    pub f_level: f64,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LayerOrbit {
    fn arg(&self, xi: f64) -> f64 {
        let shift = self.integration_constant.ln();
        match self.kind {
            LayerKind::Front => self.rate * xi + shift,
            LayerKind::Back => self.rate * xi - shift,
        }
    }

    /// (y, y(1-y), 1-2y) with y the logistic, computed without cancellation.
    fn parts(&self, xi: f64) -> (f64, f64, f64) {
        let x = self.arg(xi);
        let y = logistic(x);
        let ym = logistic(-x);
        (y, y * ym, -(0.5 * x).tanh())
    }

    pub fn u(&self, xi: f64) -> f64 {
        self.amplitude * self.parts(xi).0
    }

    pub fn du(&self, xi: f64) -> f64 {
        let (_, p, _) = self.parts(xi);
        self.amplitude * self.rate * p
    }

    pub fn d2u(&self, xi: f64) -> f64 {
        let (_, p, q) = self.parts(xi);
        self.amplitude * self.rate * self.rate * p * q
    }

    pub fn d3u(&self, xi: f64) -> f64 {
        let (_, p, _) = self.parts(xi);
        self.amplitude * self.rate.powi(3) * p * (1.0 - 6.0 * p)
    }

    pub fn v(&self, xi: f64) -> f64 {
        self.du(xi) / self.f_level
    }

    pub fn dv(&self, xi: f64) -> f64 {
        self.d2u(xi) / self.f_level
    }

    pub fn state(&self, xi: f64) -> SlowFastState {
        SlowFastState::new(self.u(xi), self.v(xi), self.w_level)
    }
}

impl ModelParams {
    /// Validated constructor; rejects parameters outside the admissible set.
    pub fn new(a: f64, k: f64, gamma: f64, m: f64, c1: f64, eps: f64) -> Result<Self> {
        let p = Self { a, k, gamma, m, c1, eps };
        p.validate()?;
        Ok(p)
    }

    /// Demo parameters k=2, a=0.25, gamma=1, M=2, c1=1 at the given eps.
    pub fn demo(eps: f64) -> Self {
        Self { a: 0.25, k: 2.0, gamma: 1.0, m: 2.0, c1: 1.0, eps }
    }

    pub fn with_eps(self, eps: f64) -> Result<Self> {
        Self::new(self.a, self.k, self.gamma, self.m, self.c1, eps)
    }

    pub fn with_a(self, a: f64) -> Result<Self> {
        Self::new(a, self.k, self.gamma, self.m, self.c1, self.eps)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.a, self.k, self.gamma, self.m, self.c1, self.eps];
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value".into()));
        }
        if !(0.0..0.5).contains(&self.a) {
            return Err(Error::InvalidParameter(format!("a = {} not in [0, 1/2)", self.a)));
        }
        for (name, x) in [("k", self.k), ("gamma", self.gamma), ("M", self.m), ("c1", self.c1)] {
            if x <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {x} must be positive")));
            }
        }
        if self.eps < 0.0 {
            return Err(Error::InvalidParameter(format!("eps = {} must be >= 0", self.eps)));
        }
        let u2_min = match self.solve_wb() {
            Ok(b) => b.u2,
            Err(_) => 0.5 * (1.0 + self.a),
        };
        if self.gamma * self.fold_w() >= u2_min {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} admits nontrivial rest states (gamma*fold = {} >= {})",
                self.gamma,
                self.gamma * self.fold_w(),
                u2_min
            )));
        }
        Ok(())
    }

    /// F(0) = 1 + M/(2 c1).
    pub fn f_zero(&self) -> f64 {
        1.0 + self.m / (2.0 * self.c1)
    }

    /// Lower bound F_m = 1/2 + M/(4 c1) = F(0)/2.
    pub fn f_min(&self) -> f64 {
        0.5 + self.m / (4.0 * self.c1)
    }

    /// Supremum of admissible w.
    pub fn w_max(&self) -> f64 {
        0.5 * self.c1 * self.f_zero().powi(2)
    }

    /// Fold of the critical parabola, k(1-a)^2/4.
    pub fn fold_w(&self) -> f64 {
        0.25 * self.k * (1.0 - self.a).powi(2)
    }

    pub fn deformation(&self, w: f64) -> Result<Deformation> {
        let d = self.f_zero().powi(2) - 2.0 * w / self.c1;
        if !(d > 0.0) {
            return Err(Error::DeformationDomain { w, w_max: self.w_max() });
        }
        let s = d.sqrt();
        Ok(Deformation {
            f: self.f_min() + 0.5 * s,
            f_w: -0.5 / (self.c1 * s),
            f_ww: -0.5 / (self.c1 * self.c1 * d * s),
        })
    }

    pub fn reaction(&self, u: f64, w: f64) -> Reaction {
        let (k, a) = (self.k, self.a);
        Reaction {
            f: k * u * (u - a) * (u - 1.0) + u * w,
            f_u: k * (3.0 * u * u - 2.0 * (a + 1.0) * u + a) + w,
            f_w: u,
        }
    }

    pub fn vector_field(&self, c: f64, s: SlowFastState, mode: FieldMode) -> Result<SlowFastState> {
        match mode {
            FieldMode::Fast | FieldMode::Layer => {
                let d = self.deformation(s.w)?;
                let r = self.reaction(s.u, s.w);
                let dw = if mode == FieldMode::Fast {
                    self.eps / c * (s.u - self.gamma * s.w)
                } else {
                    0.0
                };
                Ok(SlowFastState::new(d.f * s.v, c * d.f * d.f * s.v + d.f * r.f, dw))
            }
            FieldMode::Reduced => {
                let tol = 1e-8;
                let r = self.reaction(s.u, s.w);
                if s.v.abs() > tol || r.f.abs() > tol {
                    return Err(Error::OffCriticalSet(format!(
                        "|v| = {:e}, |f| = {:e}",
                        s.v.abs(),
                        r.f.abs()
                    )));
                }
                let dw = (s.u - self.gamma * s.w) / c;
                let du_dw = if s.u.abs() <= tol {
                    0.0
                } else {
                    -1.0 / (self.k * (2.0 * s.u - 1.0 - self.a))
                };
                Ok(SlowFastState::new(du_dw * dw, 0.0, dw))
            }
        }
    }

    /// Jacobian of the fast vector field with respect to (u, v, w).
    pub fn fast_jacobian(&self, c: f64, s: SlowFastState) -> Result<[[f64; 3]; 3]> {
        let d = self.deformation(s.w)?;
        let r = self.reaction(s.u, s.w);
        let e = self.eps / c;
        Ok([
            [0.0, d.f, d.f_w * s.v],
            [
                d.f * r.f_u,
                c * d.f * d.f,
                2.0 * c * d.f * d.f_w * s.v + d.f_w * r.f + d.f * r.f_w,
            ],
            [e, 0.0, -e * self.gamma],
        ])
    }

    /// Derivative of the fast vector field with respect to the speed c.
    pub fn fast_dc(&self, c: f64, s: SlowFastState) -> Result<[f64; 3]> {
        let d = self.deformation(s.w)?;
        Ok([0.0, d.f * d.f * s.v, -self.eps / (c * c) * (s.u - self.gamma * s.w)])
    }

    pub fn critical_branches(&self, w0: f64) -> Result<CriticalBranches> {
        let fold = self.fold_w();
        if w0 > fold || w0 < 0.0 {
            return Err(Error::BeyondFold { w0, fold });
        }
        let disc = ((1.0 - self.a).powi(2) - 4.0 * w0 / self.k).max(0.0).sqrt();
        let mid = 0.5 * (1.0 + self.a);
        Ok(CriticalBranches { zero: 0.0, u1: mid - 0.5 * disc, u2: mid + 0.5 * disc })
    }

    /// c0 = sqrt(2k)(1/2 - a)/F(0).
    pub fn wave_speed_c0(&self) -> f64 {
        (2.0 * self.k).sqrt() * (0.5 - self.a) / self.f_zero()
    }

    /// Residual of the back-layer level equation (1-2a)F(w) - (2U1 - U2)F(0).
    pub fn wb_residual(&self, w: f64) -> Result<f64> {
        let b = self.critical_branches(w)?;
        let d = self.deformation(w)?;
        Ok((1.0 - 2.0 * self.a) * d.f - (2.0 * b.u1 - b.u2) * self.f_zero())
    }

    /// Speed of the back layer at level w, sqrt(2k)(U1 - U2/2)/F(w).
    pub fn back_speed(&self, w: f64) -> Result<f64> {
        let b = self.critical_branches(w)?;
        let d = self.deformation(w)?;
        Ok((2.0 * self.k).sqrt() * (b.u1 - 0.5 * b.u2) / d.f)
    }

    /// Bisection for the back-layer level on (0, fold).
    pub fn solve_wb(&self) -> Result<BackLevel> {
        let fold = self.fold_w();
        let n = 1000;
        let mut changes = Vec::new();
        let mut prev = self.wb_residual(0.0)?;
        for i in 1..=n {
            let w = fold * i as f64 / n as f64;
            let g = self.wb_residual(w)?;
            if prev.signum() != g.signum() {
                changes.push((fold * (i - 1) as f64 / n as f64, w));
            }
            prev = g;
        }
        let Some(&(mut lo, mut hi)) = changes.first() else {
            return Err(Error::NoBackLayer(format!(
                "level equation has no sign change on (0, {fold}) for a = {}",
                self.a
            )));
        };
        let glo = self.wb_residual(lo)?;
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            let g = self.wb_residual(mid)?;
            if g.signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w_b = 0.5 * (lo + hi);
        let b = self.critical_branches(w_b)?;
        Ok(BackLevel { w_b, u1: b.u1, u2: b.u2, sign_changes: changes.len() })
    }

    pub fn front_profile(&self) -> LayerOrbit {
        let f0 = self.f_zero();
        LayerOrbit {
            kind: LayerKind::Front,
            w_level: 0.0,
            speed: self.wave_speed_c0(),
            integration_constant: 1.0,
            endpoints: [(0.0, 0.0), (1.0, 0.0)],
            amplitude: 1.0,
            rate: f0 * (0.5 * self.k).sqrt(),
            f_level: f0,
        }
    }

    pub fn back_profile(&self) -> Result<LayerOrbit> {
        let b = self.solve_wb()?;
        let fb = self.deformation(b.w_b)?.f;
        Ok(LayerOrbit {
            kind: LayerKind::Back,
            w_level: b.w_b,
            speed: self.wave_speed_c0(),
            integration_constant: 1.0,
            endpoints: [(b.u2, 0.0), (0.0, 0.0)],
            amplitude: b.u2,
            rate: -fb * (0.5 * self.k).sqrt() * b.u2,
            f_level: fb,
        })
    }

    pub fn front_back_profiles(&self) -> Result<(LayerOrbit, LayerOrbit)> {
        Ok((self.front_profile(), self.back_profile()?))
    }
}
