use std::sync::OnceLock;

use fhn_rdm::contour::{Contour, Region};
use fhn_rdm::evans::{
    compound2, count_zeros, evans_function, linearization_from_state, r3_exclusion_check, r3_sample_grid,
    reduced_front_back_spectrum, wedge, EvansFunction, ReducedProblem, SpectralConfig, StandardContours,
};
use fhn_rdm::model::LayerKind;
use fhn_rdm::quad;
use fhn_rdm::pulse::{shoot_pulse, PulseOptions, PulseSolution};
use fhn_rdm::{Error, ModelParams, SlowFastState};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn pulse() -> &'static PulseSolution {
    static P: OnceLock<PulseSolution> = OnceLock::new();
    P.get_or_init(|| shoot_pulse(&ModelParams::demo(0.01), None, &PulseOptions::default()).unwrap())
}

fn plucker(x: &Vector3<C>, y: &Vector3<C>) -> Vector3<C> {
    Vector3::new(x[0] * y[1] - x[1] * y[0], x[0] * y[2] - x[2] * y[0], x[1] * y[2] - x[2] * y[1])
}

fn cplx() -> impl Strategy<Value = C> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| C::new(a, b))
}

fn mat() -> impl Strategy<Value = Matrix3<C>> {
    prop::collection::vec(cplx(), 9).prop_map(Matrix3::from_iterator)
}

fn vec3() -> impl Strategy<Value = Vector3<C>> {
    prop::collection::vec(cplx(), 3).prop_map(Vector3::from_iterator)
}

proptest! {
    #[test]
    fn compound_acts_as_derivation_on_wedges(a in mat(), x in vec3(), y in vec3()) {
        let lhs = compound2(&a) * plucker(&x, &y);
        let rhs = plucker(&(a * x), &y) + plucker(&x, &(a * y));
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        prop_assert!((compound2(&a).trace() - a.trace() * 2.0).norm() < 1e-12);
    }

    #[test]
    fn wedge_is_a_determinant(phi in vec3(), x in vec3(), y in vec3()) {
        let m = Matrix3::from_columns(&[phi, x, y]);
        let d = m.determinant();
        prop_assert!((wedge(&phi, &plucker(&x, &y)) - d).norm() < 1e-11 * (1.0 + d.norm()));
    }
}

// Kernel at lambda = 0 in the variables (u', u''/F, w').
fn kernel(p: &PulseSolution, xi: f64) -> [f64; 3] {
    let s = p.state_at(xi).unwrap();
    let g = p.derivative_at(xi).unwrap();
    let d = p.params.deformation(s.w).unwrap();
    [g.u, g.v + d.f_w * g.w * s.v / d.f, g.w]
}

#[test]
fn pulse_derivative_solves_linearization_at_zero() {
    let p = pulse();
    let zero = C::new(0.0, 0.0);
    let h = 1e-4;
    for xi in [-5.0, 0.0, 3.0, p.z_ae - 1.0, p.z_ae, p.z_ae + 2.0] {
        let (kp, km) = (kernel(p, xi + h), kernel(p, xi - h));
        let a = linearization_from_state(&p.params, p.speed, p.state_at(xi).unwrap(), zero).unwrap();
        let k = kernel(p, xi);
        let r = a * Vector3::new(C::new(k[0], 0.0), C::new(k[1], 0.0), C::new(k[2], 0.0));
        for m in 0..3 {
            let fd = (kp[m] - km[m]) / (2.0 * h);
            assert!((r[m].re - fd).abs() < 1e-6 * (1.0 + fd.abs()), "xi = {xi}, row {m}: {} vs {fd}", r[m].re);
            assert_eq!(r[m].im, 0.0);
        }
    }
}

#[test]
fn linearization_is_affine_in_lambda() {
    let p = ModelParams::demo(0.01);
    let s = SlowFastState::new(0.4, -0.1, 0.05);
    let a0 = linearization_from_state(&p, 0.23, s, C::new(0.0, 0.0)).unwrap();
    let a1 = linearization_from_state(&p, 0.23, s, C::new(1.0, 0.0)).unwrap();
    let a2 = linearization_from_state(&p, 0.23, s, C::new(0.3, 2.0)).unwrap();
    let pred = a0 + (a1 - a0) * C::new(0.3, 2.0);
    assert!((a2 - pred).norm() < 1e-13);
}

#[test]
fn default_config_follows_eps() {
    let cfg = SpectralConfig::for_pulse(pulse());
    assert_eq!(cfg.delta, 0.1);
    assert_eq!(cfg.m_tilde, 30.0);
    assert_eq!(cfg.nu, 1.0);
    assert!(cfg.eta >= SpectralConfig::lemma_eta(&pulse().params, cfg.k1));
    cfg.validate().unwrap();
    for bad in [
        SpectralConfig { eta: 0.0, ..cfg },
        SpectralConfig { delta: 1.5, ..cfg },
        SpectralConfig { m_tilde: 0.5, ..cfg },
        SpectralConfig { nu: -1.0, ..cfg },
    ] {
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter(_))));
    }
}

#[test]
fn translation_eigenvalue_makes_e_vanish() {
    let p = pulse();
    let cfg = SpectralConfig::for_pulse(p);
    let e0 = evans_function(p, &cfg, C::new(0.0, 0.0)).unwrap();
    let e1 = evans_function(p, &cfg, C::new(cfg.delta, 0.0)).unwrap();
    assert!(e0.admissible && e1.admissible);
    assert!(e0.value.norm() < 1e-8 * e1.value.norm(), "{} vs {}", e0.value, e1.value);
}

#[test]
fn matching_point_obeys_abel_identity() {
    let p = pulse();
    let cfg = SpectralConfig { trace_normalize: false, ..SpectralConfig::for_pulse(p) };
    let ev = EvansFunction::new(p, cfg).unwrap();
    let (x0, x1) = (-2.0, 4.0);
    for lam in [C::new(0.05, 0.02), C::new(0.5, -1.0)] {
        let a = ev.evaluate_at(lam, x0).unwrap().value;
        let b = ev.evaluate_at(lam, x1).unwrap().value;
        // d/dxi (phi ^ psi) = tr A (phi ^ psi), so the ratio is exp(-int tr A).
        let tr = |x: f64, part: fn(C) -> f64| part(ev.matrix(x, lam).unwrap().trace());
        let re = quad::adaptive(&|x| tr(x, |z| z.re), x0, x1, 1e-12, 1e-14, 1000).unwrap().value;
        let im = quad::adaptive(&|x| tr(x, |z| z.im), x0, x1, 1e-12, 1e-14, 1000).unwrap().value;
        let expect = (-C::new(re, im)).exp();
        assert!((a / b / expect - 1.0).norm() < 1e-6, "{} vs {expect}", a / b);
    }
    assert!(matches!(ev.evaluate_at(C::new(0.1, 0.0), 1e6), Err(Error::OutOfRange(_))));
}

#[test]
fn small_disk_holds_two_simple_eigenvalues() {
    let p = pulse();
    let cfg = SpectralConfig::for_pulse(p);
    let r = count_zeros(p, &cfg, &StandardContours::r1(&cfg), 64).unwrap();
    assert_eq!(r.winding, 2);
    assert_eq!(r.zero_count(), 2);
    let mut z = r.zeros.clone();
    z.sort_by(|a, b| a.z().norm().total_cmp(&b.z().norm()));
    assert!(z[0].z().norm() < 1e-8 * cfg.delta);
    assert!(z[1].re < 0.0 && z[1].im.abs() < 1e-8);
    let small = Contour::circle(z[0].z(), 0.5 * z[1].z().norm(), Region::Custom);
    assert_eq!(count_zeros(p, &cfg, &small, 32).unwrap().winding, 1);
}

#[test]
fn sector_samples_satisfy_rescaled_bounds() {
    let p = pulse();
    let cfg = SpectralConfig::for_pulse(p);
    let grid = r3_sample_grid(&cfg, 4, 9);
    assert_eq!(grid.len(), 36);
    assert!(grid.iter().all(|z| z.norm() > cfg.m_tilde && z.arg().abs() <= 2.0 * std::f64::consts::FRAC_PI_3));
    let rep = r3_exclusion_check(p, &cfg, &grid).unwrap();
    assert!(rep.all_ok);
    assert!(rep.case1 > 0 && rep.case2 > 0);
    assert!(rep.arc_min_abs_e > 0.0);
    assert!(matches!(r3_exclusion_check(p, &cfg, &[C::new(1.0, 0.0)]), Err(Error::OutOfRange(_))));
}

#[test]
fn reduced_layers_have_zero_top_eigenvalue() {
    let p = ModelParams::demo(0.01);
    let cfg = SpectralConfig::for_pulse(pulse());
    for kind in [LayerKind::Front, LayerKind::Back] {
        let r = reduced_front_back_spectrum(&p, &cfg, kind).unwrap();
        assert!(r.top_eigenvalue.abs() < 1e-8, "{kind:?}: {}", r.top_eigenvalue);
        assert_eq!(r.sign_changes, 0);
        assert!(r.r2_clear);
        assert!(r.eta <= cfg.eta);
    }
}

#[test]
fn reduced_evans_vanishes_at_zero() {
    let p = ModelParams::demo(0.01);
    let rp = ReducedProblem::new(&p, p.front_profile(), 0.5);
    let at0 = rp.evans(C::new(0.0, 0.0)).unwrap().norm();
    let at1 = rp.evans(C::new(0.5, 0.0)).unwrap().norm();
    assert!(at0 < 1e-8 * at1, "{at0} vs {at1}");
}
