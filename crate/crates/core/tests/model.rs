use approx::assert_relative_eq;
use fhn_rdm::model::{FieldMode, LayerKind, LayerOrbit};
use fhn_rdm::{Error, ModelParams, SlowFastState};
use proptest::prelude::*;

fn demo() -> ModelParams {
    ModelParams::demo(0.01)
}

// F(w) = 1/2 + M/(4 c1) + 1/2 sqrt((1 + M/(2 c1))^2 - 2 w / c1), written out directly.
fn f_direct(m: f64, c1: f64, w: f64) -> f64 {
    0.5 + m / (4.0 * c1) + 0.5 * ((1.0 + m / (2.0 * c1)).powi(2) - 2.0 * w / c1).sqrt()
}

fn layer_residual(p: &ModelParams, o: &LayerOrbit, xi: f64) -> f64 {
    let f = p.deformation(o.w_level).unwrap().f;
    let u = o.u(xi);
    let r1 = o.du(xi) - f * o.v(xi);
    let r2 = o.dv(xi) - (o.speed * f * f * o.v(xi) + f * p.reaction(u, o.w_level).f);
    r1.abs().max(r2.abs())
}

#[test]
fn deformation_matches_direct_formula() {
    let p = demo();
    for w in [0.0, 0.1, 0.5, 1.0, 1.9] {
        assert_relative_eq!(p.deformation(w).unwrap().f, f_direct(p.m, p.c1, w), max_relative = 1e-15);
    }
    assert_eq!(p.f_zero(), 2.0);
    assert_eq!(p.f_min(), 1.0);
}

#[test]
fn deformation_derivatives_match_finite_differences() {
    let p = demo();
    for w in [0.0, 0.3, 1.2, 1.8] {
        let d = p.deformation(w).unwrap();
        let h = 1e-5;
        let (fp, fm) = (f_direct(p.m, p.c1, w + h), f_direct(p.m, p.c1, w - h));
        let f0 = f_direct(p.m, p.c1, w);
        assert_relative_eq!(d.f_w, (fp - fm) / (2.0 * h), max_relative = 1e-8);
        assert_relative_eq!(d.f_ww, (fp - 2.0 * f0 + fm) / (h * h), max_relative = 1e-4);
    }
}

#[test]
fn deformation_outside_domain_is_rejected() {
    let p = demo();
    assert!(matches!(p.deformation(p.w_max()), Err(Error::DeformationDomain { .. })));
    assert!(matches!(p.deformation(10.0), Err(Error::DeformationDomain { .. })));
}

#[test]
fn demo_speed_is_one_quarter() {
    assert_relative_eq!(demo().wave_speed_c0(), 0.25, epsilon = 1e-15);
}

#[test]
fn layer_orbits_solve_the_layer_system() {
    let p = demo();
    let (front, back) = p.front_back_profiles().unwrap();
    for i in 0..=400 {
        let xi = -20.0 + 0.1 * i as f64;
        assert!(layer_residual(&p, &front, xi) < 1e-10, "front residual at {xi}");
        assert!(layer_residual(&p, &back, xi) < 1e-10, "back residual at {xi}");
    }
    assert!(front.du(0.0) > 0.0);
    assert!(back.du(0.0) < 0.0);
    assert_relative_eq!(front.u(0.0), 0.5, epsilon = 1e-15);
    assert_relative_eq!(back.u(0.0), 0.5 * back.amplitude, epsilon = 1e-15);
}

#[test]
fn layer_derivatives_match_finite_differences() {
    let p = demo();
    let (front, back) = p.front_back_profiles().unwrap();
    let h = 1e-5;
    for o in [front, back] {
        for xi in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            assert_relative_eq!(o.du(xi), (o.u(xi + h) - o.u(xi - h)) / (2.0 * h), epsilon = 1e-9);
            assert_relative_eq!(o.d2u(xi), (o.du(xi + h) - o.du(xi - h)) / (2.0 * h), epsilon = 1e-8);
            assert_relative_eq!(o.d3u(xi), (o.d2u(xi + h) - o.d2u(xi - h)) / (2.0 * h), epsilon = 1e-7);
        }
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m).signum() == glo.signum() {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn back_level_matches_independent_root() {
    let p = demo();
    let (k, a) = (p.k, p.a);
    let u12 = |w: f64| {
        let d = ((1.0 - a).powi(2) - 4.0 * w / k).sqrt();
        (0.5 * (1.0 + a) - 0.5 * d, 0.5 * (1.0 + a) + 0.5 * d)
    };
    let g = |w: f64| {
        let (u1, u2) = u12(w);
        (1.0 - 2.0 * a) * f_direct(p.m, p.c1, w) - (2.0 * u1 - u2) * f_direct(p.m, p.c1, 0.0)
    };
    let fold = k * (1.0 - a).powi(2) / 4.0;
    let w_ref = bisect(g, 0.0, fold * (1.0 - 1e-12));
    let b = p.solve_wb().unwrap();
    assert_relative_eq!(b.w_b, w_ref, epsilon = 1e-12);
    assert_relative_eq!(b.w_b, 0.27670972411, epsilon = 1e-10);
    assert_eq!(b.sign_changes, 1);
    assert_relative_eq!(b.u2, u12(w_ref).1, epsilon = 1e-11);
    // The back travels with the front speed at this level.
    assert_relative_eq!(p.back_speed(b.w_b).unwrap(), p.wave_speed_c0(), epsilon = 1e-11);
}

#[test]
fn back_level_lies_above_the_stated_bracket() {
    // The root sits between k(2a^2 - 5a + 2)/9 and the fold.
    let p = demo();
    let b = p.solve_wb().unwrap();
    let stated = p.k * (2.0 * p.a * p.a - 5.0 * p.a + 2.0) / 9.0;
    assert!(b.w_b > stated && b.w_b < p.fold_w());
}

#[test]
fn no_back_level_for_small_a() {
    for a in [0.0, 0.1] {
        let p = ModelParams { a, gamma: 0.5, ..demo() };
        assert!(matches!(p.solve_wb(), Err(Error::NoBackLayer(_))), "a = {a}");
        assert!(matches!(p.back_profile(), Err(Error::NoBackLayer(_))));
    }
}

#[test]
fn validation_guards() {
    assert!(ModelParams::new(0.5, 2.0, 1.0, 2.0, 1.0, 0.01).is_err());
    assert!(ModelParams::new(-0.1, 2.0, 1.0, 2.0, 1.0, 0.01).is_err());
    assert!(ModelParams::new(0.25, -2.0, 1.0, 2.0, 1.0, 0.01).is_err());
    assert!(ModelParams::new(0.25, 2.0, 1.0, 2.0, 1.0, -0.01).is_err());
    assert!(ModelParams::new(0.25, 2.0, 1.0, 2.0, 1.0, f64::NAN).is_err());
    // gamma large enough to create a second rest state on the right branch.
    assert!(ModelParams::new(0.25, 2.0, 5.0, 2.0, 1.0, 0.01).is_err());
    // At a = 0 a rest state sits at the fold when gamma = 1.
    assert!(ModelParams::new(0.0, 2.0, 1.0, 2.0, 1.0, 0.01).is_err());
    assert!(ModelParams::new(0.0, 2.0, 0.5, 2.0, 1.0, 0.01).is_ok());
}

#[test]
fn critical_branches_are_zeros_of_reaction() {
    let p = demo();
    for w in [0.0, 0.1, 0.27, 0.28] {
        let b = p.critical_branches(w).unwrap();
        assert!(p.reaction(b.u1, w).f.abs() < 1e-14);
        assert!(p.reaction(b.u2, w).f.abs() < 1e-14);
        assert!(b.u1 <= b.u2);
    }
    assert!(matches!(p.critical_branches(p.fold_w() + 1e-3), Err(Error::BeyondFold { .. })));
    assert!(p.critical_branches(-1e-3).is_err());
}

#[test]
fn fast_jacobian_matches_finite_differences() {
    let p = demo();
    let c = 0.23;
    let s = SlowFastState::new(0.6, -0.2, 0.15);
    let j = p.fast_jacobian(c, s).unwrap();
    let h = 1e-6;
    for col in 0..3 {
        let mut a = s.to_array();
        let mut b = s.to_array();
        a[col] += h;
        b[col] -= h;
        let ga = p.vector_field(c, SlowFastState::from_slice(&a), FieldMode::Fast).unwrap().to_array();
        let gb = p.vector_field(c, SlowFastState::from_slice(&b), FieldMode::Fast).unwrap().to_array();
        for row in 0..3 {
            assert_relative_eq!(j[row][col], (ga[row] - gb[row]) / (2.0 * h), epsilon = 1e-8);
        }
    }
    let dc = p.fast_dc(c, s).unwrap();
    let ga = p.vector_field(c + h, s, FieldMode::Fast).unwrap().to_array();
    let gb = p.vector_field(c - h, s, FieldMode::Fast).unwrap().to_array();
    for row in 0..3 {
        assert_relative_eq!(dc[row], (ga[row] - gb[row]) / (2.0 * h), epsilon = 1e-8);
    }
}

#[test]
fn reduced_field_requires_critical_set() {
    let p = demo();
    let off = SlowFastState::new(0.5, 0.0, 0.1);
    assert!(matches!(p.vector_field(0.25, off, FieldMode::Reduced), Err(Error::OffCriticalSet(_))));
    let w = 0.2;
    let u2 = p.critical_branches(w).unwrap().u2;
    let g = p.vector_field(0.25, SlowFastState::new(u2, 0.0, w), FieldMode::Reduced).unwrap();
    assert_relative_eq!(g.w, (u2 - p.gamma * w) / 0.25, epsilon = 1e-14);
    // Slaving du/dw on the right branch: u2'(w) = -1/(k(2u2 - 1 - a)).
    let h = 1e-6;
    let du = (p.critical_branches(w + h).unwrap().u2 - p.critical_branches(w - h).unwrap().u2) / (2.0 * h);
    assert_relative_eq!(g.u, du * g.w, max_relative = 1e-7);
}

#[test]
fn layer_field_freezes_w() {
    let p = demo();
    let g = p.vector_field(0.25, SlowFastState::new(0.3, 0.1, 0.2), FieldMode::Layer).unwrap();
    assert_eq!(g.w, 0.0);
    assert_eq!(p.front_profile().kind, LayerKind::Front);
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (0.2..0.45f64, 0.5..4.0f64, 0.5..4.0f64, 0.5..2.0f64)
        .prop_map(|(a, k, m, c1)| ModelParams { a, k, gamma: 0.2, m, c1, eps: 0.01 })
}

proptest! {
    #[test]
    fn deformation_is_bounded_and_decreasing(p in params_strategy(), t in 0.0..0.999f64) {
        let w = t * p.w_max();
        let d = p.deformation(w).unwrap();
        prop_assert!(d.f >= p.f_min() - 1e-14 && d.f <= p.f_zero() + 1e-14);
        prop_assert!(d.f_w < 0.0 && d.f_ww < 0.0);
    }

    #[test]
    fn front_orbit_solves_layer_system(p in params_strategy(), xi in -20.0..20.0f64) {
        let f = p.front_profile();
        prop_assert!(layer_residual(&p, &f, xi) < 1e-10);
        prop_assert!(f.u(xi) >= 0.0 && f.u(xi) <= 1.0 && f.du(xi) >= 0.0);
    }

    #[test]
    fn back_orbit_solves_layer_system_when_it_exists(p in params_strategy(), xi in -20.0..20.0f64) {
        if let Ok(b) = p.back_profile() {
            prop_assert!(layer_residual(&p, &b, xi) < 1e-10);
            prop_assert!(b.du(xi) <= 0.0);
            prop_assert!((p.back_speed(b.w_level).unwrap() - p.wave_speed_c0()).abs() < 1e-9);
        }
    }

    #[test]
    fn critical_branches_bracket_midpoint(p in params_strategy(), t in 0.0..1.0f64) {
        let w = t * p.fold_w();
        let b = p.critical_branches(w).unwrap();
        let mid = 0.5 * (1.0 + p.a);
        prop_assert!(b.u1 <= mid + 1e-15 && b.u2 >= mid - 1e-15);
        prop_assert!(p.reaction(b.u2, w).f.abs() < 1e-12);
    }
}
