//! Essential spectrum: asymptotic matrix at the rest state, dispersion
//! curves, and the spatial Morse index to the right of the curves.

use std::io::Write;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticMatrix {
    pub entries: Matrix3<Complex64>,
    pub lambda: Complex64,
    pub params: ModelParams,
    pub speed: f64,
}

pub fn asymptotic_matrix(params: &ModelParams, c: f64, lambda: Complex64) -> AsymptoticMatrix {
    let f0 = params.f_zero();
    let ka = params.k * params.a;
    let z = Complex64::new(0.0, 0.0);
    let r = |x: f64| Complex64::new(x, 0.0);
    let entries = Matrix3::new(
        z,
        r(f0),
        z,
        (lambda + ka) * f0,
        r(c * f0 * f0),
        z,
        r(params.eps / c),
        z,
        -(lambda + params.eps * params.gamma) / c,
    );
    AsymptoticMatrix { entries, lambda, params: *params, speed: c }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Line,
    Parabola,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub l: f64,
    pub lambda: Complex64,
    pub branch: Branch,
}

/// Line lambda = -icl - eps*gamma and parabola lambda = -icl - ka - l^2/F(0)^2.
pub fn essential_curves(params: &ModelParams, c: f64, l_grid: &[f64]) -> (Vec<CurvePoint>, Vec<CurvePoint>) {
    let f0 = params.f_zero();
    let ka = params.k * params.a;
    let eg = params.eps * params.gamma;
    let line = l_grid
        .iter()
        .map(|&l| CurvePoint { l, lambda: Complex64::new(-eg, -c * l), branch: Branch::Line })
        .collect();
    let parabola = l_grid
        .iter()
        .map(|&l| CurvePoint { l, lambda: Complex64::new(-ka - l * l / (f0 * f0), -c * l), branch: Branch::Parabola })
        .collect();
    (line, parabola)
}

/// Explicit right-of-spectrum test: Re(eps*gamma + lambda) > 0 and Re(lambda + ka) > 0.
pub fn right_of_essential(params: &ModelParams, lambda: Complex64) -> bool {
    (params.eps * params.gamma + lambda.re) > 0.0 && (lambda.re + params.k * params.a) > 0.0
}

/// Spatial eigenvalues (mu_1, mu_2, mu_3) of the asymptotic matrix, mu_2 taking
/// the principal square root.
pub fn spatial_eigenvalues(params: &ModelParams, c: f64, lambda: Complex64) -> [Complex64; 3] {
    let f0 = params.f_zero();
    let b = c * f0 * f0;
    let mu1 = -(lambda + params.eps * params.gamma) / c;
    let disc = (Complex64::new(b * b, 0.0) + (lambda + params.k * params.a) * (4.0 * f0 * f0)).sqrt();
    [mu1, (disc + b) * 0.5, (-disc + b) * 0.5]
}

pub fn morse_index(params: &ModelParams, c: f64, lambda: Complex64) -> Result<usize> {
    if !right_of_essential(params, lambda) {
        return Err(Error::NonHyperbolic(format!(
            "lambda = {lambda} is not right of the essential spectrum"
        )));
    }
    let mu = spatial_eigenvalues(params, c, lambda);
    if mu.iter().any(|m| m.re.abs() < 1e-14) {
        return Err(Error::NonHyperbolic(format!("spatial eigenvalue on the imaginary axis at {lambda}")));
    }
    Ok(mu.iter().filter(|m| m.re > 0.0).count())
}

/// CSV columns l, re_lambda, im_lambda, branch.
pub fn write_curves_csv<W: Write>(mut out: W, line: &[CurvePoint], parabola: &[CurvePoint]) -> Result<()> {
    writeln!(out, "l,re_lambda,im_lambda,branch")?;
    for p in line.iter().chain(parabola) {
        let b = match p.branch {
            Branch::Line => "line",
            Branch::Parabola => "parabola",
        };
        writeln!(out, "{},{},{},{}", fmt17(p.l), fmt17(p.lambda.re), fmt17(p.lambda.im), b)?;
    }
    Ok(())
}
