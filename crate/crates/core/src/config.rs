//! Run configuration from a flat `key = value` file.
//!
//! Recognised keys (all optional; defaults are the demo parameters):
//!
//! ```text
//! a, k, gamma, M, c1, eps          model parameters
//! eps_list = [0.02, 0.01, 0.005]   sweep values
//! k1, eta, delta, m_tilde, nu      spectral overrides
//! trace_normalize, xi_match
//! contour_points                   initial samples per contour
//! n, amplitude, t_end, dt, scheme, record_every, snapshot_every
//! output_dir
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evans::SpectralConfig;
use crate::model::ModelParams;
use crate::pdesim::{EvolveOptions, Scheme};
use crate::pulse::PulseSolution;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralOverrides {
    pub k1: Option<f64>,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub m_tilde: Option<f64>,
    pub nu: Option<f64>,
    pub trace_normalize: Option<bool>,
    pub xi_match: Option<f64>,
}

impl SpectralOverrides {
    pub fn apply(&self, mut cfg: SpectralConfig) -> Result<SpectralConfig> {
        if let Some(v) = self.k1 {
            cfg.k1 = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.m_tilde {
            cfg.m_tilde = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.trace_normalize {
            cfg.trace_normalize = v;
        }
        if let Some(v) = self.xi_match {
            cfg.xi_match = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOptions {
    pub n: usize,
    pub amplitude: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub scheme: String,
    pub record_every: f64,
    pub snapshot_every: Option<f64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            n: 2000,
            amplitude: 0.01,
            t_end: 40.0,
            dt: None,
            scheme: "rk4".into(),
            record_every: 1.0,
            snapshot_every: Some(10.0),
        }
    }
}

impl SimulationOptions {
    pub fn evolve_options(&self) -> Result<EvolveOptions> {
        let scheme = match self.scheme.as_str() {
            "rk4" => Scheme::Rk4,
            "semi_implicit" => Scheme::SemiImplicit,
            s => return Err(Error::Config(format!("scheme = {s:?}; expected \"rk4\" or \"semi_implicit\""))),
        };
        Ok(EvolveOptions {
            t_end: self.t_end,
            dt: self.dt,
            scheme,
            record_every: self.record_every,
            snapshot_every: self.snapshot_every,
            ..EvolveOptions::default()
        })
    }
}

/// On-disk layout: every key at top level.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    a: Option<f64>,
    k: Option<f64>,
    gamma: Option<f64>,
    #[serde(rename = "M")]
    m: Option<f64>,
    c1: Option<f64>,
    eps: Option<f64>,
    eps_list: Option<Vec<f64>>,
    k1: Option<f64>,
    eta: Option<f64>,
    delta: Option<f64>,
    m_tilde: Option<f64>,
    nu: Option<f64>,
    trace_normalize: Option<bool>,
    xi_match: Option<f64>,
    contour_points: Option<usize>,
    n: Option<usize>,
    amplitude: Option<f64>,
    t_end: Option<f64>,
    dt: Option<f64>,
    scheme: Option<String>,
    record_every: Option<f64>,
    snapshot_every: Option<f64>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub spectral: SpectralOverrides,
    pub sweep: Option<Vec<f64>>,
    pub contour_points: usize,
    pub simulation: SimulationOptions,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::demo(0.01),
            spectral: SpectralOverrides::default(),
            sweep: None,
            contour_points: 64,
            simulation: SimulationOptions::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = RunConfig::default();
        let p = d.params;
        let sim = SimulationOptions {
            n: raw.n.unwrap_or(d.simulation.n),
            amplitude: raw.amplitude.unwrap_or(d.simulation.amplitude),
            t_end: raw.t_end.unwrap_or(d.simulation.t_end),
            dt: raw.dt,
            scheme: raw.scheme.unwrap_or(d.simulation.scheme),
            record_every: raw.record_every.unwrap_or(d.simulation.record_every),
            snapshot_every: raw.snapshot_every.or(d.simulation.snapshot_every),
        };
        let cfg = RunConfig {
            params: ModelParams {
                a: raw.a.unwrap_or(p.a),
                k: raw.k.unwrap_or(p.k),
                gamma: raw.gamma.unwrap_or(p.gamma),
                m: raw.m.unwrap_or(p.m),
                c1: raw.c1.unwrap_or(p.c1),
                eps: raw.eps.unwrap_or(p.eps),
            },
            spectral: SpectralOverrides {
                k1: raw.k1,
                eta: raw.eta,
                delta: raw.delta,
                m_tilde: raw.m_tilde,
                nu: raw.nu,
                trace_normalize: raw.trace_normalize,
                xi_match: raw.xi_match,
            },
            sweep: raw.eps_list,
            contour_points: raw.contour_points.unwrap_or(d.contour_points),
            simulation: sim,
            output_dir: raw.output_dir.unwrap_or(d.output_dir),
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Checks module preconditions: admissible parameters, eps > 0, a sweep of
    /// positive values, sane simulation options.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.params.validate().map_err(cfg_err)?;
        if !(self.params.eps > 0.0) {
            return Err(Error::Config(format!("eps = {} must be positive", self.params.eps)));
        }
        if let Some(list) = &self.sweep {
            if list.is_empty() {
                return Err(Error::Config("eps_list is empty".into()));
            }
            for &e in list {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(Error::Config(format!("eps_list entry {e} must be positive")));
                }
                self.params.with_eps(e).map_err(cfg_err)?;
            }
        }
        if self.contour_points < 8 {
            return Err(Error::Config("contour_points must be at least 8".into()));
        }
        let s = &self.simulation;
        if s.n < 10 || !(s.t_end > 0.0) || !(s.record_every > 0.0) || !s.amplitude.is_finite() {
            return Err(Error::Config("simulation options out of range".into()));
        }
        s.evolve_options()?;
        Ok(())
    }

    pub fn spectral_for(&self, pulse: &PulseSolution) -> Result<SpectralConfig> {
        self.spectral.apply(SpectralConfig::for_pulse(pulse)).map_err(|e| Error::Config(e.to_string()))
    }
}
