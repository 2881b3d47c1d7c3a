use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DisturbanceSpec, State};
use crate::error::{Error, Result};
use crate::lyapunov;

/// Default sampling step, 10 kHz.
pub const DEFAULT_DT: f64 = 1e-4;
/// Capture band multipliers: `|x1| <= 8 gamma dt^2`, `|x2| <= 4 gamma dt`.
///
/// Along the terminal curve `x2^2 = 2 gamma |x1|` these bound the states from
/// which one explicit step covers at least half the remaining `|x1|`.
pub const CAPTURE_X1_FACTOR: f64 = 8.0;
pub const CAPTURE_X2_FACTOR: f64 = 4.0;
pub const DELTA_CAP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub eta: f64,
    pub epsilon: f64,
}

impl ControlParams {
    pub fn lyapunov(&self) -> lyapunov::LyapunovParams {
        lyapunov::LyapunovParams {
            gamma: self.gamma,
            d: self.d,
            eta: self.eta,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostCapture {
    #[default]
    Hold,
    Chatter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Explicit first-order update with zero-order-held control.
    #[default]
    Euler,
    /// Classical fourth-order Runge-Kutta, control evaluated at every stage.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Specified,
    Default,
    /// Default rule could not be applied, a fixed fallback was used instead.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
}

/// On-disk scenario schema (JSON). Optional keys are defaulted by
/// [`ScenarioFile::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub x0: State,
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub capture: CaptureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_capture: Option<PostCapture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_cutoff_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Minimal scenario with every optional key left to its default.
    pub fn new(x0: State, gamma: f64, d: f64, t_end: f64) -> Self {
        ScenarioFile {
            x0,
            gamma,
            d,
            eta: None,
            epsilon: None,
            dt: None,
            t_end,
            disturbance: DisturbanceSpec::Zero,
            capture: CaptureSpec::default(),
            delta_cap: None,
            post_capture: None,
            filter_cutoff_hz: None,
            integrator: None,
        }
    }

    /// Applies defaults and validates, yielding a complete [`SimConfig`].
    pub fn resolve(&self) -> Result<SimConfig> {
        let mut prov = BTreeMap::new();
        let mut take = |key: &str, v: Option<f64>, default: f64| match v {
            Some(v) => {
                prov.insert(key.to_string(), Provenance::Specified);
                v
            }
            None => {
                prov.insert(key.to_string(), Provenance::Default);
                default
            }
        };

        // gamma/D must be sane before the derived defaults mean anything
        check_finite("gamma", self.gamma)?;
        check_finite("D", self.d)?;
        let gamma = self.gamma;
        let d = self.d;

        let dt = take("dt", self.dt, DEFAULT_DT);
        let eps1 = take(
            "capture.eps1",
            self.capture.eps1,
            CAPTURE_X1_FACTOR * gamma * dt * dt,
        );
        let eps2 = take(
            "capture.eps2",
            self.capture.eps2,
            CAPTURE_X2_FACTOR * gamma * dt,
        );
        let delta_cap = take("delta_cap", self.delta_cap, DELTA_CAP_FACTOR * gamma);
        let filter_cutoff = take("filter_cutoff_hz", self.filter_cutoff_hz, 0.0);

        let (eta, eta_prov) = match self.eta {
            Some(v) => (v, Provenance::Specified),
            None => {
                let rule = lyapunov::default_eta(d);
                // keep the default inside (0, gamma - D)
                if gamma - d > 0.0 && rule >= gamma - d {
                    (0.5 * (gamma - d), Provenance::Fallback)
                } else {
                    (rule, Provenance::Default)
                }
            }
        };
        prov.insert("eta".into(), eta_prov);

        let (epsilon, eps_prov) = match self.epsilon {
            Some(v) => (v, Provenance::Specified),
            None => default_epsilon(gamma, d, eta),
        };
        prov.insert("epsilon".into(), eps_prov);

        prov.insert(
            "post_capture".into(),
            if self.post_capture.is_some() {
                Provenance::Specified
            } else {
                Provenance::Default
            },
        );
        prov.insert(
            "integrator".into(),
            if self.integrator.is_some() {
                Provenance::Specified
            } else {
                Provenance::Default
            },
        );

        let cfg = SimConfig {
            x0: self.x0,
            params: ControlParams {
                gamma,
                d,
                eta,
                epsilon,
            },
            disturbance: self.disturbance.clone(),
            dt,
            t_end: self.t_end,
            capture_eps1: eps1,
            capture_eps2: eps2,
            delta_cap,
            post_capture: self.post_capture.unwrap_or_default(),
            filter_cutoff_hz: filter_cutoff,
            integrator: self.integrator.unwrap_or_default(),
            provenance: prov,
        };
        validate_config(cfg)
    }
}

fn default_epsilon(gamma: f64, d: f64, eta: f64) -> (f64, Provenance) {
    match lyapunov::default_epsilon(gamma, d, eta) {
        (e, false) => (e, Provenance::Default),
        (e, true) => (e, Provenance::Fallback),
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

/// Fully resolved simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub x0: State,
    pub params: ControlParams,
    pub disturbance: DisturbanceSpec,
    pub dt: f64,
    pub t_end: f64,
    pub capture_eps1: f64,
    pub capture_eps2: f64,
    pub delta_cap: f64,
    pub post_capture: PostCapture,
    pub filter_cutoff_hz: f64,
    pub integrator: Integrator,
    /// Which keys were specified and which were defaulted.
    pub provenance: BTreeMap<String, Provenance>,
}

impl SimConfig {
    /// The effective configuration in file schema, every key explicit.
    pub fn to_scenario_file(&self) -> ScenarioFile {
        ScenarioFile {
            x0: self.x0,
            gamma: self.params.gamma,
            d: self.params.d,
            eta: Some(self.params.eta),
            epsilon: Some(self.params.epsilon),
            dt: Some(self.dt),
            t_end: self.t_end,
            disturbance: self.disturbance.clone(),
            capture: CaptureSpec {
                eps1: Some(self.capture_eps1),
                eps2: Some(self.capture_eps2),
            },
            delta_cap: Some(self.delta_cap),
            post_capture: Some(self.post_capture),
            filter_cutoff_hz: Some(self.filter_cutoff_hz),
            integrator: Some(self.integrator),
        }
    }

    /// Same scenario started from `-x0` under `-d(t)`.
    pub fn mirrored(&self) -> SimConfig {
        SimConfig {
            x0: -self.x0,
            disturbance: self.disturbance.negated(),
            ..self.clone()
        }
    }
}

/// Checks every invariant of a resolved configuration and returns it unchanged.
pub fn validate_config(cfg: SimConfig) -> Result<SimConfig> {
    let p = &cfg.params;
    for (name, v) in [
        ("x0[0]", cfg.x0.x1),
        ("x0[1]", cfg.x0.x2),
        ("gamma", p.gamma),
        ("D", p.d),
        ("eta", p.eta),
        ("epsilon", p.epsilon),
        ("dt", cfg.dt),
        ("t_end", cfg.t_end),
        ("capture.eps1", cfg.capture_eps1),
        ("capture.eps2", cfg.capture_eps2),
        ("delta_cap", cfg.delta_cap),
        ("filter_cutoff_hz", cfg.filter_cutoff_hz),
    ] {
        check_finite(name, v)?;
    }
    if p.d < 0.0 {
        return Err(Error::InvalidConfig(format!("D = {} must be >= 0", p.d)));
    }
    if p.gamma <= p.d {
        return Err(Error::GammaTooSmall {
            gamma: p.gamma,
            bound: p.d,
        });
    }
    if p.eta <= 0.0 || p.eta >= p.gamma - p.d {
        return Err(Error::InvalidConfig(format!(
            "eta = {} must lie in (0, gamma - D = {})",
            p.eta,
            p.gamma - p.d
        )));
    }
    let pd_bound = (2.0 * (p.gamma - p.d - p.eta)).sqrt();
    if p.epsilon <= 0.0 || p.epsilon >= pd_bound {
        return Err(Error::EpsilonOutOfRange {
            epsilon: p.epsilon,
            lo: 0.0,
            hi: pd_bound,
        });
    }
    cfg.disturbance.check()?;
    let sup = cfg.disturbance.sup_norm();
    if sup > p.d {
        return Err(Error::DisturbanceExceedsBound { sup, bound: p.d });
    }
    if cfg.dt <= 0.0 || cfg.t_end <= 0.0 || cfg.dt > cfg.t_end {
        return Err(Error::InvalidConfig(format!(
            "need 0 < dt ({}) <= t_end ({})",
            cfg.dt, cfg.t_end
        )));
    }
    if cfg.capture_eps1 <= 0.0 || cfg.capture_eps2 <= 0.0 || cfg.delta_cap <= 0.0 {
        return Err(Error::InvalidConfig(
            "capture tolerances and delta_cap must be > 0".into(),
        ));
    }
    if cfg.filter_cutoff_hz < 0.0 {
        return Err(Error::InvalidConfig("filter_cutoff_hz must be >= 0".into()));
    }
    Ok(cfg)
}
