use approx::assert_relative_eq;
use fhn_rdm::contour::{self, Contour, Region};
use fhn_rdm::hermite;
use fhn_rdm::ode::{rk4_step, Dopri5};
use fhn_rdm::quad::{self, TailRates};
use fhn_rdm::Error;
use num_complex::Complex64 as C;
use proptest::prelude::*;

#[test]
fn dopri_harmonic_oscillator_forward_and_backward() {
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    let solver = Dopri5::new(1e-12, 1e-14);
    let (y, stats) = solver.integrate(f, 0.0, 10.0, &[1.0, 0.0], |_, _, _| {}).unwrap();
    assert!((y[0] - 10f64.cos()).abs() < 1e-10);
    assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    assert!(stats.accepted > 0);
    let (yb, _) = solver.integrate(f, 10.0, 0.0, &y, |_, _, _| {}).unwrap();
    assert!((yb[0] - 1.0).abs() < 1e-9 && yb[1].abs() < 1e-9);
}

#[test]
fn dopri_observer_sees_monotone_times_and_endpoints() {
    let mut ts = Vec::new();
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0];
    Dopri5::new(1e-10, 1e-12)
        .with_h_max(0.1)
        .integrate(f, 0.0, 3.0, &[1.0], |t, _, _| ts.push(t))
        .unwrap();
    assert_eq!(ts[0], 0.0);
    assert!((ts.last().unwrap() - 3.0).abs() < 1e-12);
    assert!(ts.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.1 + 1e-12));
}

#[test]
fn dopri_reports_step_budget() {
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0];
    let mut s = Dopri5::new(1e-12, 1e-14);
    s.max_steps = 3;
    assert!(matches!(s.integrate(f, 0.0, 50.0, &[1.0], |_, _, _| {}), Err(Error::Integration(_))));
}

#[test]
fn rk4_is_fourth_order() {
    let err = |n: usize| {
        let mut y = [1.0];
        let h = 1.0 / n as f64;
        for i in 0..n {
            rk4_step(|_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0], i as f64 * h, &mut y, h);
        }
        (y[0] - 1f64.exp()).abs()
    };
    let order = (err(20) / err(40)).log2();
    assert!(order > 3.8 && order < 4.2, "observed order {order}");
}

#[test]
fn gauss_kronrod_integrates_polynomials_exactly() {
    // Kronrod 15 is exact through degree 22.
    let (v, _) = quad::gk15(&|x: f64| x.powi(20) + 3.0 * x.powi(7), -1.0, 2.0);
    let exact = (2f64.powi(21) + 1.0) / 21.0 + 3.0 * (2f64.powi(8) - 1.0) / 8.0;
    assert_relative_eq!(v, exact, max_relative = 1e-13);
}

#[test]
fn adaptive_handles_peaked_integrand() {
    let g = |x: f64| 1.0 / (1e-4 + x * x);
    let r = quad::adaptive(&g, -1.0, 1.0, 1e-12, 1e-300, 10_000).unwrap();
    let exact = 2.0 * (1.0 / 1e-2) * (1.0 / 1e-2f64).atan();
    assert_relative_eq!(r.value, exact, max_relative = 1e-10);
    assert!(r.panels > 8);
}

#[test]
fn whole_line_gaussian_and_sech() {
    let r = quad::integrate_line(&|x: f64| (-x * x).exp(), TailRates { left: 1.0, right: 1.0 }, 1e-13, 1e-14).unwrap();
    assert_relative_eq!(r.value, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    // int sech^2(x) e^{-x/2} dx = pi/2 / sin(pi/4) * (1/2) ... via Beta: B(1 + 1/4, 1 - 1/4) * 2
    let g = |x: f64| (1.0 / x.cosh()).powi(2) * (-0.5 * x).exp();
    let r = quad::integrate_line(&g, TailRates { left: 1.5, right: 2.5 }, 1e-13, 1e-14).unwrap();
    // With y = logistic(2x): sech^2 x = 4 y (1 - y), dx = dy / (2 y (1 - y)), e^{-x/2} = ((1-y)/y)^{1/4}.
    // Integral = 2 B(3/4, 5/4) = 2 Gamma(3/4) Gamma(5/4) / Gamma(2) = (pi/4) / sin(3 pi/4) * 2.
    let exact = 2.0 * (0.25 * std::f64::consts::PI) / (0.75 * std::f64::consts::PI).sin();
    assert_relative_eq!(r.value, exact, max_relative = 1e-11);
    assert!(r.tail_bound < 1e-13 * exact);
}

#[test]
fn whole_line_rejects_nonpositive_rates() {
    let r = quad::integrate_line(&|x: f64| (-x * x).exp(), TailRates { left: 0.0, right: 1.0 }, 1e-10, 1e-12);
    assert!(matches!(r, Err(Error::Integrability(_))));
    let r = quad::integrate_from(&|x: f64| (-x).exp(), 0.0, -1.0, 1e-10, 1e-12);
    assert!(matches!(r, Err(Error::Integrability(_))));
}

#[test]
fn half_line_exponential() {
    let r = quad::integrate_from(&|x: f64| (-2.0 * x).exp(), -1.0, 2.0, 1e-13, 1e-14).unwrap();
    assert_relative_eq!(r.value, 0.5 * 2f64.exp(), max_relative = 1e-12);
}

#[test]
fn hermite_reproduces_quintics() {
    let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) - 0.1 * x.powi(5);
    let dp = |x: f64| -2.0 + 1.5 * x * x - 0.5 * x.powi(4);
    let ddp = |x: f64| 3.0 * x - 2.0 * x.powi(3);
    let (a, b) = (0.3, 1.7);
    for i in 0..=10 {
        let x = a + (b - a) * i as f64 / 10.0;
        let v = hermite::quintic(a, b, [p(a), dp(a), ddp(a)], [p(b), dp(b), ddp(b)], x);
        assert_relative_eq!(v, p(x), epsilon = 1e-13);
    }
}

#[test]
fn locate_clamps_and_brackets() {
    let g = [0.0, 1.0, 2.5, 4.0];
    assert_eq!(hermite::locate(&g, -1.0), 0);
    assert_eq!(hermite::locate(&g, 0.5), 0);
    assert_eq!(hermite::locate(&g, 1.0), 1);
    assert_eq!(hermite::locate(&g, 3.0), 2);
    assert_eq!(hermite::locate(&g, 9.0), 2);
}

fn poly(roots: Vec<C>) -> impl Fn(C) -> fhn_rdm::Result<C> + Sync {
    move |z: C| Ok(roots.iter().fold(C::new(1.0, 0.0), |acc, r| acc * (z - r)) * (0.3 * z).exp())
}

#[test]
fn winding_counts_polynomial_roots() {
    let f = poly(vec![C::new(0.1, 0.2), C::new(-0.3, 0.0), C::new(2.0, 0.0)]);
    let c = Contour::circle(C::new(0.0, 0.0), 1.0, Region::Custom);
    let w = contour::winding(&f, &c, 16, 10_000).unwrap();
    assert_eq!(w.winding, 2);
    let z = contour::refine_zeros(&f, &c, &w).unwrap();
    assert_eq!(z.len(), 2);
    assert!((z[0].z() - C::new(0.1, 0.2)).norm() < 1e-10);
    assert!((z[1].z() - C::new(-0.3, 0.0)).norm() < 1e-10);
    assert!(z.iter().all(|r| r.order == 1));
}

#[test]
fn double_root_has_order_two() {
    let f = poly(vec![C::new(0.2, -0.1), C::new(0.2, -0.1)]);
    let c = Contour::rectangle(-1.0, 1.0, -1.0, 1.0, Region::Custom);
    let w = contour::winding(&f, &c, 16, 10_000).unwrap();
    assert_eq!(w.winding, 2);
    let z = contour::refine_zeros(&f, &c, &w).unwrap();
    assert_eq!(z.iter().map(|r| r.order).sum::<i64>(), 2);
    assert!((z[0].z() - C::new(0.2, -0.1)).norm() < 1e-6);
}

#[test]
fn zero_on_contour_is_an_error() {
    let f = poly(vec![C::new(1.0, 0.0)]);
    let c = Contour::circle(C::new(0.0, 0.0), 1.0, Region::Custom);
    assert!(matches!(contour::winding(&f, &c, 16, 10_000), Err(Error::Contour(_))));
}

#[test]
fn sector_and_disk_segment_geometry() {
    let s = Contour::annular_sector(1.0, 2.0, -0.1, Region::R3);
    assert!(s.contains(C::new(1.5, 0.0)));
    assert!(s.contains(C::new(0.0, 1.5)));
    assert!(!s.contains(C::new(0.5, 0.0)));
    assert!(!s.contains(C::new(-1.5, 0.0)));
    let d = Contour::disk_segment(3.0, 0.5, Region::OmegaPlus);
    assert!(d.contains(C::new(1.0, 1.0)));
    assert!(!d.contains(C::new(0.0, 0.0)));
    assert_relative_eq!(Contour::circle(C::new(0.0, 0.0), 2.0, Region::R1).length(), 4.0 * std::f64::consts::PI, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn winding_matches_enclosed_root_count(
        roots in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..5)
    ) {
        let rs: Vec<C> = roots.iter().map(|&(a, b)| C::new(a, b)).collect();
        let r = 1.0;
        prop_assume!(rs.iter().all(|z| (z.norm() - r).abs() > 0.05));
        let inside = rs.iter().filter(|z| z.norm() < r).count() as i64;
        let c = Contour::circle(C::new(0.0, 0.0), r, Region::Custom);
        let w = contour::winding(&poly(rs), &c, 16, 20_000).unwrap();
        prop_assert_eq!(w.winding, inside);
    }

    #[test]
    fn contour_points_stay_on_circle(t in 0.0..1.0f64, r in 0.1..10.0f64) {
        let c = Contour::circle(C::new(0.5, -0.5), r, Region::Custom);
        prop_assert!(((c.point(t) - C::new(0.5, -0.5)).norm() - r).abs() < 1e-12 * r);
    }
}
