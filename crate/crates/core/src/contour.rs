//! Closed contours in the spectral plane and argument-principle zero
//! counting for an analytic function sampled along them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    R1,
    R2,
    R3,
    OmegaPlus,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Segment(C, C),
    /// Arc traversed from theta0 to theta1 (either direction).
    Arc { center: C, radius: f64, theta0: f64, theta1: f64 },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Segment(a, b) => (b - a).norm(),
            Piece::Arc { radius, theta0, theta1, .. } => radius * (theta1 - theta0).abs(),
        }
    }

    fn point(&self, s: f64) -> C {
        match *self {
            Piece::Segment(a, b) => a + (b - a) * s,
            Piece::Arc { center, radius, theta0, theta1 } => center + C::from_polar(radius, theta0 + s * (theta1 - theta0)),
        }
    }
}

/// Positively oriented closed path parametrized by t in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub region: Region,
    pieces: Vec<Piece>,
    cumulative: Vec<f64>,
}

impl Contour {
    fn from_pieces(region: Region, pieces: Vec<Piece>) -> Self {
        let mut cumulative = vec![0.0];
        let mut acc = 0.0;
        for p in &pieces {
            acc += p.length();
            cumulative.push(acc);
        }
        Self { region, pieces, cumulative }
    }

    pub fn circle(center: C, radius: f64, region: Region) -> Self {
        Self::from_pieces(
            region,
            vec![Piece::Arc { center, radius, theta0: -std::f64::consts::PI, theta1: std::f64::consts::PI }],
        )
    }

    pub fn rectangle(re0: f64, re1: f64, im0: f64, im1: f64, region: Region) -> Self {
        let v = [C::new(re0, im0), C::new(re1, im0), C::new(re1, im1), C::new(re0, im1)];
        Self::polygon(&v, region)
    }

    pub fn polygon(vertices: &[C], region: Region) -> Self {
        let n = vertices.len();
        let pieces = (0..n).map(|i| Piece::Segment(vertices[i], vertices[(i + 1) % n])).collect();
        Self::from_pieces(region, pieces)
    }

    /// Boundary of {r_in <= |z| <= r_out, Re z >= re_min}, with |re_min| < r_in.
    pub fn annular_sector(r_in: f64, r_out: f64, re_min: f64, region: Region) -> Self {
        let to = (re_min / r_out).acos();
        let ti = (re_min / r_in).acos();
        let z0 = C::new(0.0, 0.0);
        Self::from_pieces(
            region,
            vec![
                Piece::Arc { center: z0, radius: r_out, theta0: -to, theta1: to },
                Piece::Segment(C::from_polar(r_out, to), C::from_polar(r_in, ti)),
                Piece::Arc { center: z0, radius: r_in, theta0: ti, theta1: -ti },
                Piece::Segment(C::from_polar(r_in, -ti), C::from_polar(r_out, -to)),
            ],
        )
    }

    /// Boundary of {|z| <= radius, Re z >= re_min}, with |re_min| < radius.
    pub fn disk_segment(radius: f64, re_min: f64, region: Region) -> Self {
        let t = (re_min / radius).acos();
        Self::from_pieces(
            region,
            vec![
                Piece::Arc { center: C::new(0.0, 0.0), radius, theta0: -t, theta1: t },
                Piece::Segment(C::from_polar(radius, t), C::from_polar(radius, -t)),
            ],
        )
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("nonempty contour")
    }

    pub fn point(&self, t: f64) -> C {
        let s = t.rem_euclid(1.0) * self.length();
        let i = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1).min(self.pieces.len() - 1);
        let len = self.pieces[i].length();
        let local = if len > 0.0 { (s - self.cumulative[i]) / len } else { 0.0 };
        self.pieces[i].point(local.clamp(0.0, 1.0))
    }

    /// Largest |z| on the contour (sampled).
    pub fn scale(&self) -> f64 {
        (0..512).map(|i| self.point(i as f64 / 512.0).norm()).fold(0.0, f64::max)
    }

    /// Winding number of the contour itself about z (geometric inside test).
    pub fn contains(&self, z: C) -> bool {
        let n = 4096;
        let mut total = 0.0;
        let mut prev = self.point(0.0) - z;
        for i in 1..=n {
            let cur = self.point(i as f64 / n as f64) - z;
            total += (cur / prev).arg();
            prev = cur;
        }
        (total / std::f64::consts::TAU).round() as i64 != 0
    }

    pub fn sample(&self, n: usize) -> Vec<C> {
        (0..n).map(|i| self.point(i as f64 / n as f64)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSample {
    pub t: f64,
    pub z: C,
    pub value: C,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingResult {
    pub winding: i64,
    pub total_phase: f64,
    pub samples: Vec<PhaseSample>,
}

pub const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_2;
const MAX_LOG_STEP: f64 = 5.0;

fn needs_split(a: &PhaseSample, b: &PhaseSample) -> bool {
    let r = b.value / a.value;
    r.arg().abs() >= MAX_PHASE_STEP || r.norm().ln().abs() > MAX_LOG_STEP
}

/// Adaptive argument principle: samples are bisected until consecutive phase
/// increments are below pi/2, then every interval is halved once more until
/// the total phase is stable.
pub fn winding<F>(f: &F, contour: &Contour, n_points: usize, max_points: usize) -> Result<WindingResult>
where
    F: Fn(C) -> Result<C> + Sync,
{
    let eval = |ts: &[f64]| -> Result<Vec<PhaseSample>> {
        ts.par_iter()
            .map(|&t| {
                let z = contour.point(t);
                let v = f(z)?;
                if !(v.norm() > 0.0) || !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Contour(format!("function vanishes or is not finite at {z}")));
                }
                Ok(PhaseSample { t, z, value: v })
            })
            .collect()
    };
    let n0 = n_points.max(8);
    let ts: Vec<f64> = (0..n0).map(|i| i as f64 / n0 as f64).collect();
    let mut samples = eval(&ts)?;
    let refine = |samples: &mut Vec<PhaseSample>, all: bool| -> Result<()> {
        let mut first = true;
        loop {
            let n = samples.len();
            let mut mids = Vec::new();
            for i in 0..n {
                let a = &samples[i];
                let b = &samples[(i + 1) % n];
                if (all && first) || needs_split(a, b) {
                    let tb = if i + 1 == n { 1.0 } else { b.t };
                    if tb - a.t < 1e-12 {
                        return Err(Error::Contour(format!(
                            "phase increment unresolved near {} (contour too close to a zero or to the essential spectrum)",
                            a.z
                        )));
                    }
                    mids.push(0.5 * (a.t + tb));
                }
            }
            first = false;
            if mids.is_empty() {
                return Ok(());
            }
            if n + mids.len() > max_points {
                return Err(Error::Contour(format!("phase resolution needs more than {max_points} samples")));
            }
            let new = eval(&mids)?;
            samples.extend(new);
            samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
    };
    let total_phase = |s: &[PhaseSample]| -> f64 {
        let n = s.len();
        (0..n).map(|i| (s[(i + 1) % n].value / s[i].value).arg()).sum()
    };
    refine(&mut samples, false)?;
    // A full turn can hide between two samples; halve every interval and
    // accept only when the total phase no longer changes.
    let mut total = total_phase(&samples);
    loop {
        refine(&mut samples, true)?;
        let next = total_phase(&samples);
        let same = (next - total).abs() < 0.5 * std::f64::consts::TAU;
        total = next;
        if same {
            break;
        }
    }
    let w = total / std::f64::consts::TAU;
    let winding = w.round() as i64;
    if (w - winding as f64).abs() > 0.05 {
        return Err(Error::Contour(format!("non-integer winding {w}")));
    }
    Ok(WindingResult { winding, total_phase: total, samples })
}

/// Initial zero estimates from the discrete moments (1/2 pi i) sum z^p dlog f.
pub fn moment_estimates(wr: &WindingResult) -> Vec<C> {
    let n = wr.winding;
    if n <= 0 {
        return Vec::new();
    }
    let n = n as usize;
    let s = &wr.samples;
    let m = s.len();
    let center = s.iter().map(|p| p.z).sum::<C>() / m as f64;
    let mut moments = vec![C::new(0.0, 0.0); n + 1];
    for i in 0..m {
        let a = &s[i];
        let b = &s[(i + 1) % m];
        let r = b.value / a.value;
        let dlog = C::new(r.norm().ln(), r.arg());
        let zm = 0.5 * (a.z + b.z) - center;
        let mut zp = C::new(1.0, 0.0);
        for mom in moments.iter_mut() {
            *mom += zp * dlog;
            zp *= zm;
        }
    }
    let two_pi_i = C::new(0.0, std::f64::consts::TAU);
    for mom in moments.iter_mut() {
        *mom /= two_pi_i;
    }
    // Newton identities: elementary symmetric polynomials from power sums.
    let mut e = vec![C::new(1.0, 0.0); n + 1];
    for k in 1..=n {
        let mut acc = C::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[k - i] * moments[i] * sign;
        }
        e[k] = acc / k as f64;
    }
    // Companion matrix of z^n - e1 z^{n-1} + e2 z^{n-2} - ...
    let mut comp = DMatrix::<C>::zeros(n, n);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        comp[(0, k)] = e[k + 1] * sign;
        if k + 1 < n {
            comp[(k + 1, k)] = C::new(1.0, 0.0);
        }
    }
    let roots: Vec<C> = if n == 1 {
        vec![comp[(0, 0)]]
    } else {
        comp.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
    };
    roots.into_iter().map(|r| r + center).collect()
}

/// Secant iteration from z0.
pub fn secant<F>(f: &F, z0: C, scale: f64) -> Result<C>
where
    F: Fn(C) -> Result<C>,
{
    let h = 1e-6 * scale.max(z0.norm()).max(1e-12);
    let mut a = z0;
    let mut b = z0 + C::new(h, 0.5 * h);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    for _ in 0..80 {
        if fb.norm() == 0.0 {
            return Ok(b);
        }
        let denom = fb - fa;
        if denom.norm() == 0.0 {
            return Ok(b);
        }
        let c = b - fb * (b - a) / denom;
        if !(c.re.is_finite() && c.im.is_finite()) {
            break;
        }
        a = b;
        fa = fb;
        b = c;
        fb = f(b)?;
        if (b - a).norm() < 1e-14 * scale.max(b.norm()).max(1e-300) + 1e-300 {
            return Ok(b);
        }
    }
    if (b - a).norm() < 1e-9 * scale {
        return Ok(b);
    }
    Err(Error::Contour(format!("secant refinement did not converge from {z0}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedZero {
    pub re: f64,
    pub im: f64,
    pub order: i64,
}

impl RefinedZero {
    pub fn z(&self) -> C {
        C::new(self.re, self.im)
    }
}

/// Refines the moment estimates, merges duplicates and measures local orders
/// by the winding of a small circle.
pub fn refine_zeros<F>(f: &F, contour: &Contour, wr: &WindingResult) -> Result<Vec<RefinedZero>>
where
    F: Fn(C) -> Result<C> + Sync,
{
    let scale = contour.scale();
    let mut distinct: Vec<C> = Vec::new();
    for g in moment_estimates(wr) {
        let z = secant(f, g, scale)?;
        if !distinct.iter().any(|d| (d - z).norm() < 1e-6 * scale) {
            distinct.push(z);
        }
    }
    let mut out = Vec::new();
    for (i, &z) in distinct.iter().enumerate() {
        let mut r: f64 = 1e-3 * scale;
        for (j, &o) in distinct.iter().enumerate() {
            if i != j {
                r = r.min(0.25 * (o - z).norm());
            }
        }
        let small = Contour::circle(z, r.max(1e-9 * scale), Region::Custom);
        let order = winding(f, &small, 32, 4096)?.winding;
        if contour.contains(z) {
            out.push(RefinedZero { re: z.re, im: z.im, order });
        }
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}
