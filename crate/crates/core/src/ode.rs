//! Embedded Dormand-Prince 5(4) integrator with stabilised step control.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// Integrates y' = f(t, y) from t0 to t1 (either direction). The observer
    /// sees every accepted point (t, y, f(t, y)), including the initial one.
    pub fn integrate<F, O>(&self, mut f: F, t0: f64, t1: f64, y0: &[f64], mut observer: O) -> Result<(Vec<f64>, Stats)>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64], &[f64]),
    {
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut stats = Stats::default();
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        let mut k1 = vec![0.0; n];
        f(t0, &y, &mut k1);
        observer(t0, &y, &k1);
        if span == 0.0 {
            return Ok((y, stats));
        }
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut yt = vec![0.0; n];
        let mut ynew = vec![0.0; n];

        let mut h = self.initial_step(&mut f, t0, &y, &k1, dir, span).min(span).min(self.h_max);
        let mut t = t0;
        let mut facold: f64 = 1e-4;
        let mut last_rejected = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Integration(format!("step budget exhausted at t = {t}")));
            }
            let remaining = (t1 - t) * dir;
            if remaining <= 1e-14 * span.max(1.0) {
                break;
            }
            if h >= remaining {
                h = remaining;
            }
            let hs = h * dir;

            for i in 0..n {
                yt[i] = y[i] + hs * A21 * k1[i];
            }
            f(t + C2 * hs, &yt, &mut k2);
            for i in 0..n {
                yt[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * hs, &yt, &mut k3);
            for i in 0..n {
                yt[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * hs, &yt, &mut k4);
            for i in 0..n {
                yt[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * hs, &yt, &mut k5);
            for i in 0..n {
                yt[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + hs, &yt, &mut k6);
            for i in 0..n {
                ynew[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t + hs, &ynew, &mut k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                stats.rejected += 1;
                h *= 0.1;
                if h < 1e-14 * span.max(1.0) {
                    return Err(Error::Integration(format!("non-finite state near t = {t}")));
                }
                last_rejected = true;
                continue;
            }

            // Lund-stabilised controller (beta = 0.04) as in the classical code.
            let fac11 = err.powf(0.2 - 0.04 * 0.75);
            let mut fac = fac11 / facold.powf(0.04);
            fac = (fac / 0.9).clamp(0.1, 5.0);
            let hnew = h / fac;

            if err <= 1.0 {
                facold = err.max(1e-4);
                stats.accepted += 1;
                t += hs;
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                observer(t, &y, &k1);
                h = if last_rejected { hnew.min(h) } else { hnew };
                h = h.min(self.h_max);
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h /= (fac11 / 0.9).min(10.0);
                last_rejected = true;
                if h < 1e-14 * span.max(1.0) {
                    return Err(Error::Integration(format!("step size underflow at t = {t}")));
                }
            }
        }
        Ok((y, stats))
    }

    fn initial_step<F>(&self, f: &mut F, t0: f64, y: &[f64], f0: &[f64], dir: f64, span: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(span);
        let y1: Vec<f64> = (0..n).map(|i| y[i] + dir * h0 * f0[i]).collect();
        let mut f1 = vec![0.0; n];
        f(t0 + dir * h0, &y1, &mut f1);
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.atol + self.rtol * y[i].abs();
            d2 += ((f1[i] - f0[i]) / sc).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }
}

/// Classical fixed-step fourth-order Runge-Kutta step.
pub fn rk4_step<F>(mut f: F, t: f64, y: &mut [f64], h: f64)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut yt = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        yt[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &yt, &mut k2);
    for i in 0..n {
        yt[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &yt, &mut k3);
    for i in 0..n {
        yt[i] = y[i] + h * k3[i];
    }
    f(t + h, &yt, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}
