//! Adaptive Gauss-Kronrod (7/15) quadrature, with a whole-line driver for
//! integrands that decay exponentially at both ends.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub tail_bound: f64,
    pub cutoff: (f64, f64),
}

/// One Kronrod panel: (K15 value, |K15 - G7|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection on [a, b]; stops when the summed error
/// estimate is below max(abs_tol, rel_tol * |I|).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let n0 = 8;
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for i in 0..n0 {
        let pa = a + (b - a) * i as f64 / n0 as f64;
        let pb = a + (b - a) * (i + 1) as f64 / n0 as f64;
        let (v, e) = gk15(f, pa, pb);
        total += v;
        err += e;
        heap.push(Panel { a: pa, b: pb, value: v, error: e });
    }
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_panels {
            return Err(Error::Integration(format!(
                "quadrature panel budget exhausted (error {err:e}, value {total:e})"
            )));
        }
        let p = heap.pop().expect("nonempty heap");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }
    // Re-sum to drop accumulated cancellation in the running totals.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, panels: panels.len(), tail_bound: 0.0, cutoff: (a, b) })
}

/// Exponential decay rates of |g| at -inf and +inf.
#[derive(Debug, Clone, Copy)]
pub struct TailRates {
    pub left: f64,
    pub right: f64,
}

/// Integral over the real line of g with |g(x)| ~ A e^{-rate |x|} in both tails.
/// Cut-offs are pushed out until the exponential tail bound is below
/// `tail_rel * |I|`; the bound is returned alongside the value.
pub fn integrate_line<F: Fn(f64) -> f64>(g: &F, rates: TailRates, rel_tol: f64, tail_rel: f64) -> Result<QuadResult> {
    if !(rates.left > 0.0) || !(rates.right > 0.0) {
        return Err(Error::Integrability(format!(
            "tail exponents must be positive (left {}, right {})",
            rates.left, rates.right
        )));
    }
    let rough = adaptive(g, -8.0, 8.0, 1e-6, 1e-300, 4000)?.value.abs();
    let scale = if rough > 0.0 { rough } else { 1.0 };
    let bound = |x: f64, rate: f64| 2.0 * g(x).abs() / rate;
    let step_r = 1.0_f64.max(1.0 / rates.right);
    let step_l = 1.0_f64.max(1.0 / rates.left);
    let mut xr = 8.0;
    while bound(xr, rates.right) > tail_rel * scale || g(xr + step_r).abs() > g(xr).abs() {
        xr += step_r;
        if xr > 1e5 {
            return Err(Error::Integrability("right tail does not decay".into()));
        }
    }
    let mut xl = -8.0;
    while bound(xl, rates.left) > tail_rel * scale || g(xl - step_l).abs() > g(xl).abs() {
        xl -= step_l;
        if xl < -1e5 {
            return Err(Error::Integrability("left tail does not decay".into()));
        }
    }
    let mut r = adaptive(g, xl, xr, rel_tol, 1e-300, 200_000)?;
    r.tail_bound = bound(xl, rates.left) + bound(xr, rates.right);
    Ok(r)
}

/// Integral over [a, inf) of g with |g(x)| ~ A e^{-rate x} as x -> inf.
pub fn integrate_from<F: Fn(f64) -> f64>(g: &F, a: f64, rate: f64, rel_tol: f64, tail_rel: f64) -> Result<QuadResult> {
    if !(rate > 0.0) {
        return Err(Error::Integrability(format!("tail exponent must be positive (got {rate})")));
    }
    let rough = adaptive(g, a, a + 16.0, 1e-6, 1e-300, 4000)?.value.abs();
    let scale = if rough > 0.0 { rough } else { 1.0 };
    let bound = |x: f64| 2.0 * g(x).abs() / rate;
    let step = 1.0_f64.max(1.0 / rate);
    let mut xr = a + 8.0;
    while bound(xr) > tail_rel * scale || g(xr + step).abs() > g(xr).abs() {
        xr += step;
        if xr > a + 1e5 {
            return Err(Error::Integrability("tail does not decay".into()));
        }
    }
    let mut r = adaptive(g, a, xr, rel_tol, 1e-300, 200_000)?;
    r.tail_bound = bound(xr);
    Ok(r)
}
