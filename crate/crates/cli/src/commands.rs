use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use fhn_rdm::config::RunConfig;
use fhn_rdm::contour::RefinedZero;
use fhn_rdm::essential::{essential_curves, morse_index, write_curves_csv};
use fhn_rdm::evans::{
    count_zeros, r3_exclusion_check, r3_sample_grid, reduced_front_back_spectrum, ContourReport, SpectralConfig,
    StandardContours,
};
use fhn_rdm::io::{fmt17, write_json};
use fhn_rdm::melnikov::{melnikov_closed_form, melnikov_report, MelnikovReport};
use fhn_rdm::model::LayerKind;
use fhn_rdm::pdesim::stability_probe;
use fhn_rdm::pulse::{shoot_pulse, PulseOptions, PulseSolution};
use fhn_rdm::{Error, ModelParams, Result};

use crate::plot;

pub type Artifacts = Vec<String>;

fn create(dir: &Path, name: &str, list: &mut Artifacts) -> Result<BufWriter<File>> {
    list.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn json_out<T: Serialize>(dir: &Path, name: &str, value: &T, list: &mut Artifacts) -> Result<()> {
    list.push(name.to_string());
    write_json(&dir.join(name), value)
}

fn solve(params: &ModelParams) -> Result<PulseSolution> {
    shoot_pulse(params, None, &PulseOptions::default())
}

pub fn pulse(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let mut arts = Vec::new();
    let p = match solve(&cfg.params) {
        Ok(p) => p,
        Err(e) => {
            let diag = json!({ "params": cfg.params, "error": e.to_string() });
            json_out(out, "pulse_diagnostics.json", &diag, &mut arts)?;
            return Err(e);
        }
    };
    let mut w = create(out, "pulse.csv", &mut arts)?;
    p.write_csv(&mut w)?;
    w.flush()?;
    let body = json!({
        "header": p.header_json(),
        "c0": cfg.params.wave_speed_c0(),
        "jump": p.jump,
        "xi_cut": p.xi_cut,
        "markers": p.markers,
        "diagnostics": p.diagnostics,
        "max_defect": p.max_defect(),
        "front_deviation": p.front_deviation(),
        "slow_branch_deviation": p.slow_branch_deviation(),
    });
    json_out(out, "pulse.json", &body, &mut arts)?;
    plot::write(out, "pulse.plt", plot::PULSE, &mut arts)?;
    Ok(arts)
}

/// (lambda_0, lambda_1): the refined zero of smallest modulus and the other one.
pub fn small_eigenvalues(report: &ContourReport) -> Option<(RefinedZero, RefinedZero)> {
    let mut z = report.zeros.clone();
    if z.len() < 2 {
        return None;
    }
    z.sort_by(|a, b| a.z().norm().total_cmp(&b.z().norm()));
    Some((z[0], z[z.len() - 1]))
}

#[derive(Serialize)]
struct ContourSummary<'a> {
    report: &'a ContourReport,
    zero_count: i64,
}

fn summary(r: &ContourReport) -> ContourSummary<'_> {
    ContourSummary { report: r, zero_count: r.zero_count() }
}

fn scan_csv(out: &Path, name: &str, r: &ContourReport, arts: &mut Artifacts) -> Result<()> {
    let mut w = create(out, name, arts)?;
    r.write_scan_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let mut arts = Vec::new();
    let params = &cfg.params;
    let pulse = solve(params)?;
    let sc = cfg.spectral_for(&pulse)?;
    let l_grid: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
    let (line, parabola) = essential_curves(params, pulse.speed, &l_grid);
    let mut w = create(out, "essential.csv", &mut arts)?;
    write_curves_csv(&mut w, &line, &parabola)?;
    w.flush()?;

    let n = cfg.contour_points;
    let mut body = serde_json::Map::new();
    body.insert("spectral".into(), json!(sc));
    body.insert("speed".into(), json!(pulse.speed));
    body.insert("morse_index_at_delta".into(), json!(morse_index(params, pulse.speed, Complex64::new(sc.delta, 0.0)).ok()));
    if params.a > 0.0 {
        let r1 = count_zeros(&pulse, &sc, &StandardContours::r1(&sc), n)?;
        scan_csv(out, "r1_scan.csv", &r1, &mut arts)?;
        if let Some((l0, l1)) = small_eigenvalues(&r1) {
            body.insert("lambda0".into(), json!(l0));
            body.insert("lambda1".into(), json!(l1));
        }
        body.insert("r1".into(), json!(summary(&r1)));
        let r2 = count_zeros(&pulse, &sc, &StandardContours::r2_rectangle(&sc), n)?;
        scan_csv(out, "r2_scan.csv", &r2, &mut arts)?;
        body.insert("r2_rectangle".into(), json!(summary(&r2)));
        let r3 = count_zeros(&pulse, &sc, &StandardContours::r3(&sc), n)?;
        body.insert("r3_clipped".into(), json!(summary(&r3)));
        let chk = r3_exclusion_check(&pulse, &sc, &r3_sample_grid(&sc, 10, 41))?;
        body.insert(
            "r3_check".into(),
            json!({
                "all_ok": chk.all_ok, "bound": chk.bound, "case1": chk.case1, "case2": chk.case2,
                "min_re_sqrt_unit": chk.min_re_sqrt_unit, "min_re_mu23": chk.min_re_mu23,
                "arc_min_abs_e": chk.arc_min_abs_e, "arc_max_abs_e": chk.arc_max_abs_e,
            }),
        );
        let mut reduced = Vec::new();
        for kind in [LayerKind::Front, LayerKind::Back] {
            match reduced_front_back_spectrum(params, &sc, kind) {
                Ok(r) => reduced.push(json!(r)),
                Err(e) => reduced.push(json!({ "kind": kind, "error": e.to_string() })),
            }
        }
        body.insert("reduced".into(), json!(reduced));
    } else {
        let om = count_zeros(&pulse, &sc, &StandardContours::omega_plus(&sc), n)?;
        scan_csv(out, "omega_plus_scan.csv", &om, &mut arts)?;
        body.insert("omega_plus".into(), json!(summary(&om)));
    }
    json_out(out, "contours.json", &body, &mut arts)?;
    plot::write(out, "spectrum.plt", plot::SPECTRUM, &mut arts)?;
    Ok(arts)
}

pub fn melnikov(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let mut arts = Vec::new();
    let report = match solve(&cfg.params) {
        Ok(p) => {
            let sc = cfg.spectral_for(&p)?;
            melnikov_report(&p, &sc)?
        }
        Err(e) => {
            eprintln!("pulse unavailable ({e}); using closed-form inputs only");
            melnikov_closed_form(&cfg.params)?
        }
    };
    json_out(out, "melnikov.json", &report, &mut arts)?;
    Ok(arts)
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let mut arts = Vec::new();
    let pulse = solve(&cfg.params)?;
    let sim = &cfg.simulation;
    let opts = sim.evolve_options()?;
    let res = stability_probe(&pulse, sim.n, sim.amplitude, &opts)?;
    let mut w = create(out, "distance.csv", &mut arts)?;
    res.trajectory.write_distance_csv(&mut w)?;
    w.flush()?;
    for (i, s) in res.trajectory.snapshots.iter().enumerate() {
        let mut w = create(out, &format!("snapshot_{i:04}.csv"), &mut arts)?;
        s.write_csv(&mut w)?;
        w.flush()?;
    }
    let body = json!({
        "n": res.n, "amplitude": res.amplitude, "domain": res.domain,
        "dt": res.trajectory.dt, "steps": res.trajectory.steps,
        "d_initial": res.d_initial, "d_final": res.d_final, "d_min": res.d_min,
        "contraction": res.contraction, "speed": pulse.speed,
        "boundary_deviation": res.trajectory.final_state.boundary_deviation(),
    });
    json_out(out, "simulate.json", &body, &mut arts)?;
    plot::write(out, "simulate.plt", plot::SIMULATE, &mut arts)?;
    Ok(arts)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub status: String,
    pub c: f64,
    pub z_ae: f64,
    pub lambda1_evans: f64,
    pub melnikov: Option<MelnikovReport>,
}

fn sweep_row(params: &ModelParams, cfg: &RunConfig) -> Result<SweepRow> {
    let pulse = solve(params)?;
    let sc: SpectralConfig = cfg.spectral_for(&pulse)?;
    let r1 = count_zeros(&pulse, &sc, &StandardContours::r1(&sc), cfg.contour_points)?;
    let (_, l1) = small_eigenvalues(&r1).ok_or_else(|| Error::Contour(format!("winding {} on R1", r1.winding)))?;
    let mel = melnikov_report(&pulse, &sc)?;
    Ok(SweepRow {
        eps: params.eps,
        status: "ok".into(),
        c: pulse.speed,
        z_ae: pulse.z_ae,
        lambda1_evans: l1.re,
        melnikov: Some(mel),
    })
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let mut arts = Vec::new();
    let list = cfg.sweep.clone().unwrap_or_else(|| vec![0.02, 0.01, 0.005]);
    if list.len() < 3 {
        return Err(Error::Config(format!("sweep needs at least 3 eps values, got {}", list.len())));
    }
    let rows: Vec<SweepRow> = list
        .par_iter()
        .map(|&eps| {
            let failed = |e: Error| SweepRow {
                eps,
                status: format!("error: {e}").replace(',', ";"),
                c: f64::NAN,
                z_ae: f64::NAN,
                lambda1_evans: f64::NAN,
                melnikov: None,
            };
            match cfg.params.with_eps(eps) {
                Ok(p) => sweep_row(&p, cfg).unwrap_or_else(failed),
                Err(e) => failed(e),
            }
        })
        .collect();
    let c0 = cfg.params.wave_speed_c0();
    let mut w = create(out, "sweep.csv", &mut arts)?;
    writeln!(
        w,
        "eps,status,c,z_ae,lambda1_evans,lambda1_pred,m_f,m_b1,m_b2_full,m_b2_leading,c_dev_over_eps,eps_z_ae,lambda1_over_eps,pred_err_ratio,mb2_err_ratio"
    )?;
    for r in &rows {
        let e = r.eps;
        let le = e * e.ln().abs();
        let (pred, mf, mb1, full, lead) = match &r.melnikov {
            Some(m) => (m.lambda1_pred, m.m_f, m.m_b1, m.m_b2_full.unwrap_or(f64::NAN), m.m_b2_leading),
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        let cols = [
            r.c,
            r.z_ae,
            r.lambda1_evans,
            pred,
            mf,
            mb1,
            full,
            lead,
            (r.c - c0) / e,
            e * r.z_ae,
            r.lambda1_evans / e,
            (r.lambda1_evans - pred).abs() / (le * le),
            (full - lead).abs() / (e * le),
        ];
        let body: Vec<String> = cols.iter().map(|&x| fmt17(x)).collect();
        writeln!(w, "{},{},{}", fmt17(e), r.status, body.join(","))?;
    }
    w.flush()?;
    json_out(out, "sweep.json", &rows, &mut arts)?;
    plot::write(out, "sweep.plt", plot::SWEEP, &mut arts)?;
    let failures = rows.iter().filter(|r| r.status != "ok").count();
    if failures == rows.len() {
        return Err(Error::Shooting("every sweep row failed".into()));
    }
    Ok(arts)
}
