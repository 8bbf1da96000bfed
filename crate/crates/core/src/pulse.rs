//! Travelling pulse for eps > 0: singular skeleton, multiple-shooting
//! boundary-value solve for (orbit, c), and the segment decomposition.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite;
use crate::model::{FieldMode, LayerOrbit, ModelParams, SlowFastState};
use crate::ode::Dopri5;

/// Level at which the singular orbit leaves the right slow branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JumpLevel {
    /// Back layer at the root of the level equation.
    Back { w_b: f64 },
    /// No root of the level equation: the jump is placed just below the fold.
    Fold { w_jump: f64 },
}

impl JumpLevel {
    pub fn w(&self) -> f64 {
        match *self {
            JumpLevel::Back { w_b } => w_b,
            JumpLevel::Fold { w_jump } => w_jump,
        }
    }
}

/// Fraction of the fold height used when the level equation has no root.
pub const FOLD_JUMP_FRACTION: f64 = 0.97;

#[derive(Debug, Clone)]
pub struct SingularSkeleton {
    pub front: LayerOrbit,
    pub back: Option<LayerOrbit>,
    pub jump: JumpLevel,
    /// (0,0,0), (1,0,0), (U2(w_jump),0,w_jump), (0,0,w_jump).
    pub corners: [SlowFastState; 4],
    /// Slow time tau(w) = int_0^w c0/(U2(s) - gamma s) ds on the right branch, tabulated.
    slow_table: Vec<(f64, f64)>,
}

impl SingularSkeleton {
    /// Fast-time length eps^{-1} tau(w_jump) of the right slow arc.
    pub fn slow_length(&self, eps: f64) -> f64 {
        self.slow_table.last().map(|p| p.0).unwrap_or(0.0) / eps
    }

    /// Inverse of the slow-time table: w on the right branch after slow time s.
    fn w_at_slow_time(&self, s: f64) -> f64 {
        let t = &self.slow_table;
        if s <= 0.0 {
            return 0.0;
        }
        for win in t.windows(2) {
            if s <= win[1].0 {
                let f = (s - win[0].0) / (win[1].0 - win[0].0);
                return win[0].1 + f * (win[1].1 - win[0].1);
            }
        }
        t.last().map(|p| p.1).unwrap_or(0.0)
    }
}

pub fn singular_skeleton(params: &ModelParams) -> Result<SingularSkeleton> {
    let front = params.front_profile();
    let (back, jump) = match params.back_profile() {
        Ok(b) => (Some(b), JumpLevel::Back { w_b: b.w_level }),
        Err(Error::NoBackLayer(_)) => (None, JumpLevel::Fold { w_jump: FOLD_JUMP_FRACTION * params.fold_w() }),
        Err(e) => return Err(e),
    };
    let wj = jump.w();
    let u2j = params.critical_branches(wj)?.u2;
    let c0 = params.wave_speed_c0();
    let n = 2000;
    let mut table = Vec::with_capacity(n + 1);
    let integrand = |w: f64| -> Result<f64> {
        let u2 = params.critical_branches(w)?.u2;
        Ok(c0 / (u2 - params.gamma * w))
    };
    let mut s = 0.0;
    table.push((0.0, 0.0));
    let h = wj / n as f64;
    for i in 0..n {
        let (w0, w1) = (i as f64 * h, (i + 1) as f64 * h);
        s += h / 6.0 * (integrand(w0)? + 4.0 * integrand(0.5 * (w0 + w1))? + integrand(w1)?);
        table.push((s, w1));
    }
    Ok(SingularSkeleton {
        front,
        back,
        jump,
        corners: [
            SlowFastState::new(0.0, 0.0, 0.0),
            SlowFastState::new(1.0, 0.0, 0.0),
            SlowFastState::new(u2j, 0.0, wj),
            SlowFastState::new(0.0, 0.0, wj),
        ],
        slow_table: table,
    })
}

/// Eigenstructure of the linearization at the rest state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginEigen {
    pub mu_u: f64,
    pub mu_s: f64,
    pub mu_1: f64,
    pub left_u: [f64; 3],
    pub left_s: [f64; 3],
    pub left_1: [f64; 3],
    pub right_u: [f64; 3],
}

pub fn origin_eigen(params: &ModelParams, c: f64) -> OriginEigen {
    let f0 = params.f_zero();
    let ka = params.k * params.a;
    let b = c * f0 * f0;
    let disc = (b * b + 4.0 * f0 * f0 * ka).sqrt();
    let mu_u = 0.5 * (b + disc);
    // Vieta keeps the small root accurate when ka is tiny.
    let mu_s = if mu_u > 0.0 { -f0 * f0 * ka / mu_u } else { 0.5 * (b - disc) };
    let e = params.eps / c;
    let mu_1 = -e * params.gamma;
    let left = |mu: f64| [mu - b, f0, 0.0];
    let p1 = mu_1 * mu_1 - b * mu_1 - f0 * f0 * ka;
    let l2 = e * f0 / p1;
    let left_1 = [l2 * (mu_1 - b) / f0, l2, 1.0];
    let right_u = [f0, mu_u, e * f0 / (mu_u + e * params.gamma)];
    OriginEigen { mu_u, mu_s, mu_1, left_u: left(mu_u), left_s: left(mu_s), left_1, right_u }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShootDirection {
    /// Segment maps integrate forward in xi.
    Forward,
    /// Segment maps integrate backward from the right node of each segment.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseOptions {
    pub tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub segment_length: f64,
    pub max_iter: usize,
    /// Truncation half-length; None selects 1.2 (z_ae + Xi_tau) with a tail margin.
    pub trunc: Option<f64>,
    pub tau: Option<f64>,
    pub xi0: f64,
    pub sigma0: f64,
    pub direction: ShootDirection,
}

impl Default for PulseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            rtol: 1e-11,
            atol: 1e-13,
            segment_length: 1.0,
            max_iter: 60,
            trunc: None,
            tau: None,
            xi0: 4.0,
            sigma0: 0.05,
            direction: ShootDirection::Forward,
        }
    }
}

/// Index ranges (half-open) of the four segments on the pulse grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMarkers {
    pub tau: f64,
    pub xi_tau: f64,
    pub xi0: f64,
    pub j_f: Range<usize>,
    pub j_r: Range<usize>,
    pub j_b: Range<usize>,
    pub j_l: Range<usize>,
    pub clipped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootDiagnostics {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub nodes: usize,
    pub direction: ShootDirection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseSolution {
    pub params: ModelParams,
    pub speed: f64,
    pub grid: Vec<f64>,
    pub states: Vec<SlowFastState>,
    pub derivs: Vec<SlowFastState>,
    second: Vec<[f64; 3]>,
    pub z_ae: f64,
    pub xi_cut: f64,
    pub jump: JumpLevel,
    pub markers: SegmentMarkers,
    pub diagnostics: ShootDiagnostics,
}

fn default_tau(params: &ModelParams, jump: JumpLevel) -> Result<f64> {
    let u2 = params.critical_branches(jump.w())?.u2;
    Ok(2.0 / ((0.5 * params.k).sqrt() * params.f_zero() * u2.min(1.0)))
}

/// Xi_tau(eps) = -tau log eps.
pub fn xi_tau(tau: f64, eps: f64) -> f64 {
    -tau * eps.ln()
}

fn initial_guess(params: &ModelParams, sk: &SingularSkeleton, xi: f64) -> Result<SlowFastState> {
    let eps = params.eps;
    let c0 = params.wave_speed_c0();
    let z = sk.slow_length(eps);
    let wj = sk.jump.w();
    let u_of = |x: f64| -> Result<(f64, f64)> {
        let w = if x <= 0.0 {
            0.0
        } else if x <= z {
            sk.w_at_slow_time(eps * x)
        } else {
            wj * (-eps * params.gamma * (x - z) / c0).exp()
        };
        let u2 = params.critical_branches(w.min(wj))?.u2;
        let u = if x < 0.5 * z {
            sk.front.u(x) * u2
        } else {
            let fj = params.deformation(wj)?.f;
            let kappa = fj * (0.5 * params.k).sqrt() * u2;
            let arg = -kappa * (x - z);
            u2 / (1.0 + (-arg).exp())
        };
        Ok((u, w))
    };
    let (u, w) = u_of(xi)?;
    let h = 1e-4;
    let du = (u_of(xi + h)?.0 - u_of(xi - h)?.0) / (2.0 * h);
    let f = params.deformation(w)?.f;
    Ok(SlowFastState::new(u, du / f, w))
}

/// Flow of the fast system over one segment together with the sensitivities
/// with respect to the initial state and to c.
struct SegmentFlow {
    end: [f64; 3],
    dy: [[f64; 3]; 3],
    dc: [f64; 3],
}

fn flow_with_sensitivity(params: &ModelParams, c: f64, t0: f64, t1: f64, y0: [f64; 3], opts: &PulseOptions) -> Result<SegmentFlow> {
    let mut z0 = vec![0.0; 15];
    z0[..3].copy_from_slice(&y0);
    z0[3] = 1.0;
    z0[7] = 1.0;
    z0[11] = 1.0;
    let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| {
        let s = SlowFastState::from_slice(z);
        let (g, j, gc) = match (
            params.vector_field(c, s, FieldMode::Fast),
            params.fast_jacobian(c, s),
            params.fast_dc(c, s),
        ) {
            (Ok(g), Ok(j), Ok(gc)) => (g, j, gc),
            _ => {
                dz.iter_mut().for_each(|x| *x = f64::NAN);
                return;
            }
        };
        dz[0] = g.u;
        dz[1] = g.v;
        dz[2] = g.w;
        for r in 0..3 {
            for col in 0..3 {
                let mut acc = 0.0;
                for m in 0..3 {
                    acc += j[r][m] * z[3 + 3 * m + col];
                }
                dz[3 + 3 * r + col] = acc;
            }
            let mut acc = gc[r];
            for m in 0..3 {
                acc += j[r][m] * z[12 + m];
            }
            dz[12 + r] = acc;
        }
    };
    let solver = Dopri5::new(opts.rtol, opts.atol);
    let (z, _) = solver.integrate(rhs, t0, t1, &z0, |_, _, _| {})?;
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integration(format!("segment [{t0}, {t1}] left the admissible domain")));
    }
    let mut dy = [[0.0; 3]; 3];
    for r in 0..3 {
        for col in 0..3 {
            dy[r][col] = z[3 + 3 * r + col];
        }
    }
    Ok(SegmentFlow { end: [z[0], z[1], z[2]], dy, dc: [z[12], z[13], z[14]] })
}

fn dot3(a: &[f64; 3], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

struct Bvp<'a> {
    params: &'a ModelParams,
    nodes: Vec<f64>,
    phase_node: usize,
    opts: &'a PulseOptions,
}

impl Bvp<'_> {
    fn n_unknowns(&self) -> usize {
        3 * self.nodes.len() + 1
    }

    /// Residual vector and (optionally) its Jacobian.
    fn evaluate(&self, x: &DVector<f64>, with_jac: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let n = self.n_unknowns();
        let nn = self.nodes.len();
        let c = x[n - 1];
        if !(c > 0.0) {
            return Err(Error::Shooting(format!("speed left the positive axis (c = {c})")));
        }
        let y = |i: usize| [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
        let flows: Vec<Result<SegmentFlow>> = (0..nn - 1)
            .into_par_iter()
            .map(|i| match self.opts.direction {
                ShootDirection::Forward => flow_with_sensitivity(self.params, c, self.nodes[i], self.nodes[i + 1], y(i), self.opts),
                ShootDirection::Backward => flow_with_sensitivity(self.params, c, self.nodes[i + 1], self.nodes[i], y(i + 1), self.opts),
            })
            .collect();
        let mut r = DVector::zeros(n);
        let mut jac = if with_jac { Some(DMatrix::zeros(n, n)) } else { None };

        let oe = origin_eigen(self.params, c);
        let dc = 1e-7 * c;
        let oe_p = origin_eigen(self.params, c + dc);
        let y0 = y(0);
        let yn = y(nn - 1);
        r[0] = dot3(&oe.left_s, &y0);
        r[1] = dot3(&oe.left_1, &y0);
        if let Some(j) = jac.as_mut() {
            for m in 0..3 {
                j[(0, m)] = oe.left_s[m];
                j[(1, m)] = oe.left_1[m];
            }
            j[(0, n - 1)] = (dot3(&oe_p.left_s, &y0) - r[0]) / dc;
            j[(1, n - 1)] = (dot3(&oe_p.left_1, &y0) - r[1]) / dc;
        }
        for (i, fl) in flows.into_iter().enumerate() {
            let fl = fl?;
            let row = 2 + 3 * i;
            let (src, dst) = match self.opts.direction {
                ShootDirection::Forward => (i, i + 1),
                ShootDirection::Backward => (i + 1, i),
            };
            let target = y(dst);
            for m in 0..3 {
                r[row + m] = fl.end[m] - target[m];
            }
            if let Some(j) = jac.as_mut() {
                for m in 0..3 {
                    for q in 0..3 {
                        j[(row + m, 3 * src + q)] = fl.dy[m][q];
                    }
                    j[(row + m, 3 * dst + m)] = -1.0;
                    j[(row + m, n - 1)] = fl.dc[m];
                }
            }
        }
        let rr = 2 + 3 * (nn - 1);
        r[rr] = dot3(&oe.left_u, &yn);
        r[rr + 1] = x[3 * self.phase_node] - 0.5;
        if let Some(j) = jac.as_mut() {
            for m in 0..3 {
                j[(rr, 3 * (nn - 1) + m)] = oe.left_u[m];
            }
            j[(rr, n - 1)] = (dot3(&oe_p.left_u, &yn) - r[rr]) / dc;
            j[(rr + 1, 3 * self.phase_node)] = 1.0;
        }
        Ok((r, jac))
    }
}

fn make_nodes(left: f64, right: f64, h: f64) -> (Vec<f64>, usize) {
    let nl = (left.abs() / h).ceil() as usize;
    let nr = (right / h).ceil() as usize;
    let nodes: Vec<f64> = (0..=nl + nr).map(|i| (i as f64 - nl as f64) * h).collect();
    (nodes, nl)
}

/// Damped Newton on the multiple-shooting system. Returns node states, c and
/// the residual history (max norm at each accepted iterate).
fn solve_bvp(bvp: &Bvp, mut x: DVector<f64>) -> Result<(DVector<f64>, Vec<f64>)> {
    let (mut r, _) = bvp.evaluate(&x, false)?;
    let mut history = vec![r.amax()];
    for _ in 0..bvp.opts.max_iter {
        if r.amax() < bvp.opts.tol {
            return Ok((x, history));
        }
        let (_, jac) = bvp.evaluate(&x, true)?;
        let jac = jac.expect("jacobian requested");
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| Error::Shooting("singular Newton matrix".into()))?;
        let merit = r.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &x + alpha * &step;
            if let Ok((rt, _)) = bvp.evaluate(&trial, false) {
                if rt.norm() < merit {
                    x = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Shooting(format!("line search stalled at residual {:e}", r.amax())));
        }
        history.push(r.amax());
    }
    if r.amax() < bvp.opts.tol {
        return Ok((x, history));
    }
    Err(Error::Shooting(format!(
        "no convergence after {} iterations (residual {:e})",
        bvp.opts.max_iter,
        r.amax()
    )))
}

/// Solves for the pulse. `c_guess` defaults to c0 when None.
pub fn shoot_pulse(params: &ModelParams, c_guess: Option<f64>, opts: &PulseOptions) -> Result<PulseSolution> {
    if !(params.eps > 0.0) {
        return Err(Error::InvalidParameter(format!("pulse requires eps > 0 (got {})", params.eps)));
    }
    let sk = singular_skeleton(params)?;
    let c_start = c_guess.unwrap_or_else(|| params.wave_speed_c0());
    let oe = origin_eigen(params, c_start);
    if !(oe.mu_u > 0.0 && oe.mu_s <= 0.0 && oe.mu_1 < 0.0) {
        return Err(Error::NonHyperbolic(format!(
            "origin eigenvalues {}, {}, {}",
            oe.mu_u, oe.mu_s, oe.mu_1
        )));
    }
    let tau = match opts.tau {
        Some(t) => t,
        None => default_tau(params, sk.jump)?,
    };
    let xt = xi_tau(tau, params.eps);
    let z_guess = sk.slow_length(params.eps);
    let half = |z: f64| opts.trunc.unwrap_or_else(|| (1.2 * (z + xt)).max(z + 15.0));

    let mut l = half(z_guess);
    let (mut nodes, mut phase_node) = make_nodes(-l, l, opts.segment_length);
    let mut x0 = DVector::zeros(3 * nodes.len() + 1);
    for (i, &xi) in nodes.iter().enumerate() {
        let s = initial_guess(params, &sk, xi)?;
        x0[3 * i] = s.u;
        x0[3 * i + 1] = s.v;
        x0[3 * i + 2] = s.w;
    }
    let n = x0.len();
    x0[n - 1] = c_start;

    let mut total_iter = 0;
    for attempt in 0..3 {
        let bvp = Bvp { params, nodes: nodes.clone(), phase_node, opts };
        let (x, hist) = solve_bvp(&bvp, x0)?;
        total_iter += hist.len() - 1;
        let c = x[x.len() - 1];
        let sol = assemble(params, c, &nodes, &x, opts)?;
        let z_ae = find_z_ae(params, &sol, sk.jump)?;
        let l_needed = half(z_ae);
        if opts.trunc.is_some() || l_needed <= l * 1.0001 || attempt == 2 {
            let diag = ShootDiagnostics {
                iterations: total_iter,
                residual_history: hist,
                nodes: nodes.len(),
                direction: opts.direction,
            };
            let mut p = PulseSolution {
                params: *params,
                speed: c,
                grid: sol.0,
                states: sol.1,
                derivs: sol.2,
                second: sol.3,
                z_ae,
                xi_cut: l,
                jump: sk.jump,
                markers: SegmentMarkers {
                    tau,
                    xi_tau: xt,
                    xi0: opts.xi0,
                    j_f: 0..0,
                    j_r: 0..0,
                    j_b: 0..0,
                    j_l: 0..0,
                    clipped: false,
                },
                diagnostics: diag,
            };
            p.markers = segment_markers(&p, tau, opts.xi0)?;
            return Ok(p);
        }
        // Re-solve on a longer domain seeded by the current solution.
        let old = PulseSolution {
            params: *params,
            speed: c,
            grid: sol.0,
            states: sol.1,
            derivs: sol.2,
            second: sol.3,
            z_ae,
            xi_cut: l,
            jump: sk.jump,
            markers: SegmentMarkers {
                tau,
                xi_tau: xt,
                xi0: opts.xi0,
                j_f: 0..0,
                j_r: 0..0,
                j_b: 0..0,
                j_l: 0..0,
                clipped: false,
            },
            diagnostics: ShootDiagnostics { iterations: 0, residual_history: vec![], nodes: 0, direction: opts.direction },
        };
        l = l_needed;
        let m = make_nodes(-l, l, opts.segment_length);
        nodes = m.0;
        phase_node = m.1;
        x0 = DVector::zeros(3 * nodes.len() + 1);
        for (i, &xi) in nodes.iter().enumerate() {
            let s = old.state_extended(xi);
            x0[3 * i] = s.u;
            x0[3 * i + 1] = s.v;
            x0[3 * i + 2] = s.w;
        }
        let nx = x0.len();
        x0[nx - 1] = c;
    }
    unreachable!("loop returns on the final attempt")
}

type Dense = (Vec<f64>, Vec<SlowFastState>, Vec<SlowFastState>, Vec<[f64; 3]>);

type Pieces = Vec<Result<Vec<(f64, [f64; 3])>>>;

/// Integrates every segment from its node with dense recording.
fn assemble(params: &ModelParams, c: f64, nodes: &[f64], x: &DVector<f64>, opts: &PulseOptions) -> Result<Dense> {
    let pieces: Pieces = (0..nodes.len() - 1)
        .into_par_iter()
        .map(|i| {
            let y0 = [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
            let mut pts = Vec::new();
            let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| match params.vector_field(c, SlowFastState::from_slice(y), FieldMode::Fast) {
                Ok(g) => {
                    dy[0] = g.u;
                    dy[1] = g.v;
                    dy[2] = g.w;
                }
                Err(_) => dy.iter_mut().for_each(|d| *d = f64::NAN),
            };
            Dopri5::new(opts.rtol, opts.atol)
                .with_h_max(0.25)
                .integrate(rhs, nodes[i], nodes[i + 1], &y0, |t, y, _| pts.push((t, [y[0], y[1], y[2]])))?;
            Ok(pts)
        })
        .collect();
    let mut grid = Vec::new();
    let mut states = Vec::new();
    for (i, p) in pieces.into_iter().enumerate() {
        let p = p?;
        let skip_last = i + 1 < nodes.len() - 1;
        let take = if skip_last { p.len() - 1 } else { p.len() };
        for &(t, y) in p.iter().take(take) {
            grid.push(t);
            states.push(SlowFastState::new(y[0], y[1], y[2]));
        }
    }
    let mut derivs = Vec::with_capacity(states.len());
    let mut second = Vec::with_capacity(states.len());
    for s in &states {
        let g = params.vector_field(c, *s, FieldMode::Fast)?;
        let j = params.fast_jacobian(c, *s)?;
        let ga = g.to_array();
        let mut dd = [0.0; 3];
        for r in 0..3 {
            dd[r] = j[r][0] * ga[0] + j[r][1] * ga[1] + j[r][2] * ga[2];
        }
        derivs.push(g);
        second.push(dd);
    }
    Ok((grid, states, derivs, second))
}

fn find_z_ae(params: &ModelParams, dense: &Dense, jump: JumpLevel) -> Result<f64> {
    let level = match jump {
        JumpLevel::Back { w_b } => 0.5 * params.critical_branches(w_b)?.u2,
        JumpLevel::Fold { .. } => 0.25 * (1.0 + params.a),
    };
    let (grid, states) = (&dense.0, &dense.1);
    let start = grid.iter().position(|&x| x >= 0.0).unwrap_or(0);
    for i in start..grid.len() - 1 {
        let (u0, u1) = (states[i].u, states[i + 1].u);
        if u0 >= level && u1 < level {
            let mut lo = grid[i];
            let mut hi = grid[i + 1];
            let interp = |x: f64| {
                hermite::quintic(
                    grid[i],
                    grid[i + 1],
                    [u0, dense.2[i].u, dense.3[i][0]],
                    [u1, dense.2[i + 1].u, dense.3[i + 1][0]],
                    x,
                )
            };
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if interp(mid) >= level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Shooting("pulse never returns below the back half-height".into()))
}

pub fn segment_markers(pulse: &PulseSolution, tau: f64, xi0: f64) -> Result<SegmentMarkers> {
    let xt = xi_tau(tau, pulse.params.eps);
    if xt > pulse.xi_cut {
        return Err(Error::OutOfRange(format!("Xi_tau = {xt} exceeds truncation {}", pulse.xi_cut)));
    }
    let g = &pulse.grid;
    let idx = |x: f64| g.partition_point(|&t| t < x);
    let idx_incl = |x: f64| g.partition_point(|&t| t <= x);
    let z = pulse.z_ae;
    let range = |a: f64, b: f64| {
        let s = idx(a);
        let e = idx_incl(b);
        s..e.max(s)
    };
    let lo = g[0];
    let hi = *g.last().expect("nonempty grid");
    let clipped = z + xt > hi || z + xi0 > hi;
    Ok(SegmentMarkers {
        tau,
        xi_tau: xt,
        xi0,
        j_f: range(lo, xt),
        j_r: range(xi0, z - xi0),
        j_b: range(z - xt, z + xt),
        j_l: range(z + xi0, hi),
        clipped,
    })
}

impl PulseSolution {
    fn interval(&self, xi: f64) -> usize {
        hermite::locate(&self.grid, xi)
    }

    pub fn contains(&self, xi: f64) -> bool {
        xi >= self.grid[0] && xi <= *self.grid.last().expect("nonempty grid")
    }

    pub fn left_end(&self) -> f64 {
        self.grid[0]
    }

    pub fn right_end(&self) -> f64 {
        *self.grid.last().expect("nonempty grid")
    }

    /// State by quintic Hermite interpolation; errors outside the grid.
    pub fn state_at(&self, xi: f64) -> Result<SlowFastState> {
        if !self.contains(xi) {
            return Err(Error::OutOfRange(format!(
                "xi = {xi} outside [{}, {}]",
                self.left_end(),
                self.right_end()
            )));
        }
        Ok(self.interp(xi))
    }

    fn interp(&self, xi: f64) -> SlowFastState {
        let i = self.interval(xi);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (s0, s1) = (self.states[i].to_array(), self.states[i + 1].to_array());
        let (d0, d1) = (self.derivs[i].to_array(), self.derivs[i + 1].to_array());
        let (e0, e1) = (self.second[i], self.second[i + 1]);
        let mut out = [0.0; 3];
        for m in 0..3 {
            out[m] = hermite::quintic(x0, x1, [s0[m], d0[m], e0[m]], [s1[m], d1[m], e1[m]], xi);
        }
        SlowFastState::new(out[0], out[1], out[2])
    }

    /// State including closed-form tails: along the unstable direction of the
    /// rest state for xi < left end, and slow decay on L0 beyond the right end.
    pub fn state_extended(&self, xi: f64) -> SlowFastState {
        if self.contains(xi) {
            return self.interp(xi);
        }
        let p = &self.params;
        if xi < self.left_end() {
            let oe = origin_eigen(p, self.speed);
            let s = self.states[0];
            let f = (oe.mu_u * (xi - self.left_end())).exp();
            return SlowFastState::new(s.u * f, s.v * f, s.w * f);
        }
        let s = *self.states.last().expect("nonempty");
        let dx = xi - self.right_end();
        let w = s.w * (-p.eps * p.gamma * dx / self.speed).exp();
        let fr = p.deformation(s.w).map(|d| d.f).unwrap_or(p.f_zero());
        let b = self.speed * fr * fr;
        let ka = p.k * p.a + s.w;
        let mu = 0.5 * (b - (b * b + 4.0 * fr * fr * ka).sqrt());
        let f = (mu * dx).exp();
        SlowFastState::new(s.u * f, s.v * f, w)
    }

    /// Derivative of the pulse from the vector field at every grid node.
    pub fn derivative_profile(&self) -> Vec<SlowFastState> {
        self.derivs.clone()
    }

    pub fn derivative_at(&self, xi: f64) -> Result<SlowFastState> {
        let s = self.state_at(xi)?;
        self.params.vector_field(self.speed, s, FieldMode::Fast)
    }

    /// Max over the grid of the local defect |y' - g(y)| of the interpolant,
    /// sampled at interval midpoints.
    pub fn max_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.len() - 1 {
            let xm = 0.5 * (self.grid[i] + self.grid[i + 1]);
            let h = 1e-3 * (self.grid[i + 1] - self.grid[i]);
            let (a, b) = (self.interp(xm - h), self.interp(xm + h));
            let fd = [(b.u - a.u) / (2.0 * h), (b.v - a.v) / (2.0 * h), (b.w - a.w) / (2.0 * h)];
            if let Ok(g) = self.params.vector_field(self.speed, self.interp(xm), FieldMode::Fast) {
                let ga = g.to_array();
                for m in 0..3 {
                    worst = worst.max((fd[m] - ga[m]).abs());
                }
            }
        }
        worst
    }

    /// Distance of (u, v) at the same w to the right slow branch; beyond the
    /// fold, distance to the fold point.
    pub fn distance_to_right_branch(&self, s: SlowFastState) -> f64 {
        let p = &self.params;
        let fold = p.fold_w();
        if s.w < 0.0 {
            return ((s.u - 1.0).powi(2) + s.v * s.v + s.w * s.w).sqrt();
        }
        if s.w > fold {
            let uf = 0.5 * (1.0 + p.a);
            return ((s.u - uf).powi(2) + s.v * s.v + (s.w - fold).powi(2)).sqrt();
        }
        let u2 = p.critical_branches(s.w).map(|b| b.u2).unwrap_or(0.5 * (1.0 + p.a));
        ((s.u - u2).powi(2) + s.v * s.v).sqrt()
    }

    /// sup over J_f of |(u, w) - (u_f, 0)|.
    pub fn front_deviation(&self) -> f64 {
        let front = self.params.front_profile();
        self.markers
            .j_f
            .clone()
            .map(|i| {
                let s = self.states[i];
                let du = s.u - front.u(self.grid[i]);
                (du * du + s.w * s.w).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// sup over J_r of the distance to the right slow branch.
    pub fn slow_branch_deviation(&self) -> f64 {
        self.markers
            .j_r
            .clone()
            .map(|i| self.distance_to_right_branch(self.states[i]))
            .fold(0.0, f64::max)
    }

    pub fn header_json(&self) -> serde_json::Value {
        let p = &self.params;
        serde_json::json!({
            "a": p.a, "k": p.k, "gamma": p.gamma, "M": p.m, "c1": p.c1, "eps": p.eps,
            "c": self.speed, "z_ae": self.z_ae,
        })
    }

    /// CSV with columns xi,u,v,w,du,dv,dw; floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "xi,u,v,w,du,dv,dw")?;
        for i in 0..self.grid.len() {
            let (s, d) = (self.states[i], self.derivs[i]);
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                crate::io::fmt17(self.grid[i]),
                crate::io::fmt17(s.u),
                crate::io::fmt17(s.v),
                crate::io::fmt17(s.w),
                crate::io::fmt17(d.u),
                crate::io::fmt17(d.v),
                crate::io::fmt17(d.w)
            )?;
        }
        Ok(())
    }
}
