//! Method-of-lines simulation of the PDE in the laboratory frame x, where the
//! pulse is (U, W)(x, t) = (u, w)(x + c t) and travels to the left.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::model::ModelParams;
use crate::pulse::PulseSolution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeState {
    pub x: Vec<f64>,
    pub h: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

fn uniform(x0: f64, x1: f64, n: usize) -> Result<(Vec<f64>, f64)> {
    if n < 3 || !(x1 > x0) {
        return Err(Error::InvalidParameter(format!("grid [{x0}, {x1}] with {n} nodes")));
    }
    let h = (x1 - x0) / (n - 1) as f64;
    Ok(((0..n).map(|i| x0 + i as f64 * h).collect(), h))
}

impl PdeState {
    pub fn rest(x0: f64, x1: f64, n: usize) -> Result<Self> {
        let (x, h) = uniform(x0, x1, n)?;
        Ok(Self { u: vec![0.0; n], w: vec![0.0; n], x, h, t: 0.0 })
    }

    /// Pulse laid out as U(x) = u(x - shift), using the closed-form tails
    /// beyond the computed grid.
    pub fn from_pulse(pulse: &PulseSolution, x0: f64, x1: f64, n: usize, shift: f64) -> Result<Self> {
        let (x, h) = uniform(x0, x1, n)?;
        let (u, w) = sample_pulse(pulse, &x, shift);
        Ok(Self { x, h, u, w, t: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Adds amp * exp(-((x - center)/width)^2) to U.
    pub fn add_bump(&mut self, amp: f64, center: f64, width: f64) {
        for (u, &x) in self.u.iter_mut().zip(&self.x) {
            *u += amp * (-((x - center) / width).powi(2)).exp();
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let w_max = params.w_max();
        for (&u, &w) in self.u.iter().zip(&self.w) {
            if !u.is_finite() || !w.is_finite() {
                return Err(Error::BlowUp { t: self.t });
            }
            if w >= w_max {
                return Err(Error::DeformationDomain { w, w_max });
            }
        }
        Ok(())
    }

    /// Largest deviation from the rest state at the two boundary nodes.
    pub fn boundary_deviation(&self) -> f64 {
        let n = self.len();
        [self.u[0], self.w[0], self.u[n - 1], self.w[n - 1]].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Leftmost crossing of U = level, by linear interpolation.
    pub fn front_position(&self, level: f64) -> Option<f64> {
        self.u.windows(2).zip(self.x.windows(2)).find_map(|(u, x)| {
            if (u[0] - level) * (u[1] - level) <= 0.0 && u[0] != u[1] {
                Some(x[0] + (level - u[0]) / (u[1] - u[0]) * (x[1] - x[0]))
            } else {
                None
            }
        })
    }

    /// CSV columns x, U, W.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,U,W")?;
        for i in 0..self.len() {
            writeln!(out, "{},{},{}", fmt17(self.x[i]), fmt17(self.u[i]), fmt17(self.w[i]))?;
        }
        Ok(())
    }
}

fn sample_pulse(pulse: &PulseSolution, x: &[f64], shift: f64) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .map(|&xi| {
            let s = pulse.state_extended(xi - shift);
            (s.u, s.w)
        })
        .unzip()
}

/// Conservative diffusion (1/F_i)[(U_{i+1}-U_i)/(h F_{i+1/2}) - (U_i-U_{i-1})/(h F_{i-1/2})]/h
/// with Neumann ends, plus the pointwise reaction terms.
pub fn spatial_operator(params: &ModelParams, state: &PdeState, du: &mut [f64], dw: &mut [f64]) -> Result<()> {
    let (u, w) = (&state.u, &state.w);
    diffusion(params, u, w, state.h, du)?;
    for i in 0..u.len() {
        du[i] -= params.reaction(u[i], w[i]).f;
        dw[i] = params.eps * (u[i] - params.gamma * w[i]);
    }
    Ok(())
}

fn face_coefficients(params: &ModelParams, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let fc = w.iter().map(|&wi| params.deformation(wi).map(|d| d.f)).collect::<Result<Vec<_>>>()?;
    let ff = w
        .windows(2)
        .map(|p| params.deformation(0.5 * (p[0] + p[1])).map(|d| d.f))
        .collect::<Result<Vec<_>>>()?;
    Ok((fc, ff))
}

fn diffusion(params: &ModelParams, u: &[f64], w: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
    let n = u.len();
    let (fc, ff) = face_coefficients(params, w)?;
    let h2 = h * h;
    for i in 0..n {
        let right = if i + 1 < n { (u[i + 1] - u[i]) / ff[i] } else { 0.0 };
        let left = if i > 0 { (u[i] - u[i - 1]) / ff[i - 1] } else { 0.0 };
        out[i] = (right - left) / (h2 * fc[i]);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical RK4 on the full semi-discrete system.
    Rk4,
    /// Strang splitting: RK4 half steps for the reaction around a
    /// Crank-Nicolson diffusion step with F frozen.
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub t_end: f64,
    /// None selects 0.4 h^2 min(F)^2 for RK4 and 10 times that for the split scheme.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    /// Time between orbital-distance records.
    pub record_every: f64,
    pub snapshot_every: Option<f64>,
    pub blow_up: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { t_end: 40.0, dt: None, scheme: Scheme::Rk4, record_every: 1.0, snapshot_every: None, blow_up: 10.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub shifts: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<PdeState>,
    #[serde(skip)]
    pub final_state: PdeState,
}

impl Trajectory {
    /// CSV columns t, d_orbital.
    pub fn write_distance_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,d_orbital")?;
        for (t, d) in self.times.iter().zip(&self.distances) {
            writeln!(out, "{},{}", fmt17(*t), fmt17(*d))?;
        }
        Ok(())
    }
}

/// Explicit stability bound 0.4 h^2 min(F)^2 over the current state.
pub fn explicit_dt(params: &ModelParams, state: &PdeState) -> Result<f64> {
    let fmin = state
        .w
        .iter()
        .map(|&w| params.deformation(w).map(|d| d.f))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(0.4 * state.h * state.h * fmin * fmin)
}

fn rk4(params: &ModelParams, s: &mut PdeState, dt: f64, reaction_only: bool) -> Result<()> {
    let n = s.len();
    let rhs = |st: &PdeState, du: &mut [f64], dw: &mut [f64]| -> Result<()> {
        if reaction_only {
            for i in 0..n {
                du[i] = -params.reaction(st.u[i], st.w[i]).f;
                dw[i] = params.eps * (st.u[i] - params.gamma * st.w[i]);
            }
            Ok(())
        } else {
            spatial_operator(params, st, du, dw)
        }
    };
    let mut ku = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut kw = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = s.clone();
    let stage = [0.0, 0.5, 0.5, 1.0];
    for j in 0..4 {
        if j > 0 {
            for i in 0..n {
                tmp.u[i] = s.u[i] + stage[j] * dt * ku[j - 1][i];
                tmp.w[i] = s.w[i] + stage[j] * dt * kw[j - 1][i];
            }
        }
        let (a, b) = (&mut ku[j], &mut kw[j]);
        rhs(&tmp, a, b)?;
    }
    for i in 0..n {
        s.u[i] += dt / 6.0 * (ku[0][i] + 2.0 * ku[1][i] + 2.0 * ku[2][i] + ku[3][i]);
        s.w[i] += dt / 6.0 * (kw[0][i] + 2.0 * kw[1][i] + 2.0 * kw[2][i] + kw[3][i]);
    }
    Ok(())
}

/// Crank-Nicolson step for U_t = D(W) U with W frozen; tridiagonal solve.
fn crank_nicolson(params: &ModelParams, s: &mut PdeState, dt: f64) -> Result<()> {
    let n = s.len();
    let (fc, ff) = face_coefficients(params, &s.w)?;
    let h2 = s.h * s.h;
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for i in 0..n {
        let cl = if i > 0 { 1.0 / (ff[i - 1] * h2 * fc[i]) } else { 0.0 };
        let cr = if i + 1 < n { 1.0 / (ff[i] * h2 * fc[i]) } else { 0.0 };
        lo[i] = cl;
        up[i] = cr;
        di[i] = -(cl + cr);
    }
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let mut d = di[i] * s.u[i];
        if i > 0 {
            d += lo[i] * s.u[i - 1];
        }
        if i + 1 < n {
            d += up[i] * s.u[i + 1];
        }
        rhs[i] = s.u[i] + 0.5 * dt * d;
    }
    // (I - dt/2 D) U_new = rhs, Thomas algorithm.
    let a: Vec<f64> = lo.iter().map(|v| -0.5 * dt * v).collect();
    let b: Vec<f64> = di.iter().map(|v| 1.0 - 0.5 * dt * v).collect();
    let c: Vec<f64> = up.iter().map(|v| -0.5 * dt * v).collect();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = rhs[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
    }
    s.u[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        s.u[i] = dp[i] - cp[i] * s.u[i + 1];
    }
    Ok(())
}

fn step(params: &ModelParams, s: &mut PdeState, dt: f64, scheme: Scheme) -> Result<()> {
    match scheme {
        Scheme::Rk4 => rk4(params, s, dt, false)?,
        Scheme::SemiImplicit => {
            rk4(params, s, 0.5 * dt, true)?;
            crank_nicolson(params, s, dt)?;
            rk4(params, s, 0.5 * dt, true)?;
        }
    }
    s.t += dt;
    Ok(())
}

/// Integrates to t_end; records the orbital distance to `reference` (if given)
/// every `record_every` time units.
pub fn evolve(
    params: &ModelParams,
    initial: &PdeState,
    opts: &EvolveOptions,
    reference: Option<&PulseSolution>,
) -> Result<Trajectory> {
    if !(opts.t_end > 0.0) || !(opts.record_every > 0.0) {
        return Err(Error::InvalidParameter("t_end and record_every must be positive".into()));
    }
    initial.validate(params)?;
    let bound = explicit_dt(params, initial)?;
    let dt_req = match (opts.dt, opts.scheme) {
        (Some(dt), Scheme::Rk4) if dt > bound => {
            return Err(Error::InvalidParameter(format!("dt = {dt} exceeds the explicit bound {bound}")));
        }
        (Some(dt), _) => dt,
        (None, Scheme::Rk4) => bound,
        (None, Scheme::SemiImplicit) => 10.0 * bound,
    };
    let steps_per_record = (opts.record_every / dt_req).ceil().max(1.0) as usize;
    let dt = opts.record_every / steps_per_record as f64;
    let n_records = (opts.t_end / opts.record_every).round().max(1.0) as usize;
    let snap_stride = opts.snapshot_every.map(|s| ((s / opts.record_every).round() as usize).max(1));

    let mut s = initial.clone();
    let mut times = vec![s.t];
    let mut distances = Vec::new();
    let mut shifts = Vec::new();
    let mut snapshots = Vec::new();
    let mut guess = 0.0;
    if let Some(p) = reference {
        let (d, sh) = orbital_distance(&s, p, guess, 40)?;
        distances.push(d);
        shifts.push(sh);
        guess = sh;
    }
    if snap_stride.is_some() {
        snapshots.push(s.clone());
    }
    let mut steps = 0;
    for r in 1..=n_records {
        for _ in 0..steps_per_record {
            step(params, &mut s, dt, opts.scheme)?;
            steps += 1;
        }
        if s.u.iter().any(|v| !v.is_finite() || v.abs() > opts.blow_up) {
            return Err(Error::BlowUp { t: s.t });
        }
        s.validate(params)?;
        times.push(s.t);
        if let Some(p) = reference {
            let predicted = guess - p.speed * opts.record_every;
            let (d, sh) = orbital_distance(&s, p, predicted, 40)?;
            distances.push(d);
            shifts.push(sh);
            guess = sh;
        }
        if let Some(k) = snap_stride {
            if r % k == 0 {
                snapshots.push(s.clone());
            }
        }
    }
    Ok(Trajectory { dt, steps, times, distances, shifts, snapshots, final_state: s })
}

fn sup_distance(state: &PdeState, pulse: &PulseSolution, shift: f64) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..state.len() {
        let p = pulse.state_extended(state.x[i] - shift);
        d = d.max((state.u[i] - p.u).abs()).max((state.w[i] - p.w).abs());
    }
    d
}

/// min over shifts s of max_i max(|U_i - u(x_i - s)|, |W_i - w(x_i - s)|).
/// Shifts are scanned in whole cells within `window` cells of `guess`; the
/// best cell is refined at the vertex of a quadratic through its neighbours.
/// Returns (distance, shift).
pub fn orbital_distance(state: &PdeState, pulse: &PulseSolution, guess: f64, window: usize) -> Result<(f64, f64)> {
    if state.len() < 3 {
        return Err(Error::InvalidParameter("state grid too small".into()));
    }
    let h = state.h;
    let w = window as i64;
    let shifts: Vec<f64> = (-w..=w).map(|j| guess + j as f64 * h).collect();
    let vals: Vec<f64> = shifts.iter().map(|&s| sup_distance(state, pulse, s)).collect();
    let (jb, &db) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty window");
    let mut best = (db, shifts[jb]);
    if jb > 0 && jb + 1 < vals.len() {
        let (d0, d1, d2) = (vals[jb - 1], vals[jb], vals[jb + 1]);
        let curv = d0 - 2.0 * d1 + d2;
        if curv > 0.0 {
            let off = 0.5 * (d0 - d2) / curv;
            let s = shifts[jb] + off * h;
            let d = sup_distance(state, pulse, s);
            if d < best.0 {
                best = (d, s);
            }
        }
    }
    Ok(best)
}

/// Laboratory domain that holds the pulse for t in [0, t_end]: the front
/// travels left by c t_end, and the slow W tail is kept until it drops
/// below `tail_level`.
pub fn domain_for(pulse: &PulseSolution, t_end: f64, tail_level: f64) -> (f64, f64) {
    let p = &pulse.params;
    let left = pulse.left_end().min(-12.0) - pulse.speed * t_end - 5.0;
    let last = pulse.states.last().expect("nonempty pulse");
    let right = if last.w > tail_level {
        pulse.right_end() + pulse.speed / (p.eps * p.gamma) * (last.w / tail_level).ln()
    } else {
        pulse.right_end()
    };
    (left, right)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub n: usize,
    pub amplitude: f64,
    pub domain: (f64, f64),
    pub d_initial: f64,
    pub d_final: f64,
    pub d_min: f64,
    pub contraction: f64,
    pub trajectory: Trajectory,
}

/// Perturbs the pulse by a Gaussian bump of the given amplitude on its
/// excited plateau and tracks the orbital distance.
pub fn stability_probe(pulse: &PulseSolution, n: usize, amplitude: f64, opts: &EvolveOptions) -> Result<ProbeResult> {
    let domain = domain_for(pulse, opts.t_end, 1e-3);
    let mut s = PdeState::from_pulse(pulse, domain.0, domain.1, n, 0.0)?;
    if amplitude != 0.0 {
        s.add_bump(amplitude, 3.0, 1.0);
    }
    let tr = evolve(&pulse.params, &s, opts, Some(pulse))?;
    let d_initial = tr.distances[0];
    let d_final = *tr.distances.last().expect("records");
    let d_min = tr.distances.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProbeResult {
        n,
        amplitude,
        domain,
        d_initial,
        d_final,
        d_min,
        contraction: d_initial / d_final,
        trajectory: tr,
    })
}
