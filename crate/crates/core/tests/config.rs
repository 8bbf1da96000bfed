use std::path::PathBuf;

use fhn_rdm::config::{RunConfig, SimulationOptions, SpectralOverrides};
use fhn_rdm::evans::SpectralConfig;
use fhn_rdm::pdesim::Scheme;
use fhn_rdm::pulse::{shoot_pulse, PulseOptions};
use fhn_rdm::{Error, ModelParams};
use proptest::prelude::*;

#[test]
fn empty_file_gives_demo_defaults() {
    let c = RunConfig::parse("").unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.params, ModelParams::demo(0.01));
    assert_eq!(c.contour_points, 64);
    assert_eq!(c.output_dir, PathBuf::from("out"));
    c.validate().unwrap();
}

#[test]
fn every_key_is_read() {
    let text = r#"
        a = 0.3
        k = 2.5
        gamma = 1.0
        M = 1.5
        c1 = 1.2
        eps = 0.02
        eps_list = [0.02, 0.01, 0.005]
        k1 = 0.2
        eta = 1.5
        delta = 0.2
        m_tilde = 40.0
        nu = 1.5
        trace_normalize = false
        xi_match = 1.0
        contour_points = 128
        n = 1000
        amplitude = 0.02
        t_end = 20.0
        dt = 0.001
        scheme = "semi_implicit"
        record_every = 0.5
        snapshot_every = 5.0
        output_dir = "results"
    "#;
    let c = RunConfig::parse(text).unwrap();
    assert_eq!(c.params, ModelParams::new(0.3, 2.5, 1.0, 1.5, 1.2, 0.02).unwrap());
    assert_eq!(c.sweep, Some(vec![0.02, 0.01, 0.005]));
    assert_eq!(
        c.spectral,
        SpectralOverrides {
            k1: Some(0.2),
            eta: Some(1.5),
            delta: Some(0.2),
            m_tilde: Some(40.0),
            nu: Some(1.5),
            trace_normalize: Some(false),
            xi_match: Some(1.0),
        }
    );
    assert_eq!(c.contour_points, 128);
    assert_eq!(
        c.simulation,
        SimulationOptions {
            n: 1000,
            amplitude: 0.02,
            t_end: 20.0,
            dt: Some(0.001),
            scheme: "semi_implicit".into(),
            record_every: 0.5,
            snapshot_every: Some(5.0),
        }
    );
    assert_eq!(c.simulation.evolve_options().unwrap().scheme, Scheme::SemiImplicit);
    assert_eq!(c.output_dir, PathBuf::from("results"));
    c.validate().unwrap();
}

#[test]
fn unknown_keys_and_bad_types_are_config_errors() {
    for text in ["alpha = 1.0", "a = \"x\"", "a = ", "[section]\na = 0.2"] {
        assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn validation_rejects_out_of_range_values() {
    for text in [
        "eps = 0.0",
        "eps = -0.01",
        "a = 0.6",
        "eps_list = []",
        "eps_list = [0.01, -0.02]",
        "contour_points = 4",
        "n = 5",
        "t_end = 0.0",
        "scheme = \"euler\"",
    ] {
        let c = RunConfig::parse(text).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn overrides_apply_on_top_of_pulse_defaults() {
    let p = shoot_pulse(&ModelParams::demo(0.02), None, &PulseOptions::default()).unwrap();
    let base = SpectralConfig::for_pulse(&p);
    let c = RunConfig::parse("eps = 0.02\ndelta = 0.2\nnu = 2.0").unwrap();
    let s = c.spectral_for(&p).unwrap();
    assert_eq!(s.delta, 0.2);
    assert_eq!(s.nu, 2.0);
    assert_eq!(s.eta, base.eta);
    let bad = RunConfig::parse("delta = 2.0").unwrap();
    assert!(matches!(bad.spectral_for(&p), Err(Error::Config(_))));
}

#[test]
fn load_reads_from_disk() {
    let dir = std::env::temp_dir().join(format!("fhn-rdm-config-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, "a = 0.4\n").unwrap();
    assert_eq!(RunConfig::load(&path).unwrap().params.a, 0.4);
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(RunConfig::load(&path).is_err());
}

proptest! {
    #[test]
    fn numeric_keys_round_trip(a in 0.01..0.49f64, eps in 1e-4..0.1f64, n in 10usize..100_000) {
        let c = RunConfig::parse(&format!("a = {a:?}\neps = {eps:?}\nn = {n}")).unwrap();
        prop_assert_eq!(c.params.a, a);
        prop_assert_eq!(c.params.eps, eps);
        prop_assert_eq!(c.simulation.n, n);
    }
}
