//! Seeded Monte Carlo sweeps over initial states and disturbances.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::compose_trajectory;
use crate::controller::Law;
use crate::error::{Error, Result};
use crate::lyapunov::vdot_along;
use crate::model::{DisturbanceSpec, ScenarioFile, SimConfig, State};
use crate::simulator::{max_abs_u_in_u, overshoot_check, simulate, u_exit_bracket_check};

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum X0Region {
    U,
    Ca,
    C,
    Any,
}

impl X0Region {
    fn contains(self, x: State, gamma: f64) -> bool {
        match self {
            X0Region::U => x.in_u(),
            X0Region::Ca => x.in_ca(gamma),
            X0Region::C => !x.in_u(),
            X0Region::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Family {
    One(DisturbanceSpec),
    Many(Vec<DisturbanceSpec>),
}

impl Family {
    fn members(&self) -> &[DisturbanceSpec] {
        match self {
            Family::One(d) => std::slice::from_ref(d),
            Family::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    /// Scenario template; its `x0` and `disturbance` are replaced per run.
    pub base: ScenarioFile,
    pub samples: usize,
    pub x0_region: X0Region,
    /// `[[x1_lo, x1_hi], [x2_lo, x2_hi]]`.
    pub x0_box: [[f64; 2]; 2],
    /// Scenario `i` uses member `i mod len`. Random members get a fresh seed
    /// per scenario.
    pub disturbance_family: Family,
    pub seed: u64,
    #[serde(default)]
    pub randomize_sinusoid_phase: bool,
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        for (axis, [lo, hi]) in self.x0_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "x0_box[{axis}] = [{lo}, {hi}] is degenerate"
                )));
            }
        }
        if self.disturbance_family.members().is_empty() {
            return Err(Error::InvalidConfig("disturbance_family is empty".into()));
        }
        Ok(())
    }

    /// Resolved scenarios in index order, drawn sequentially from one stream.
    pub fn scenarios(&self) -> Result<Vec<SimConfig>> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let family = self.disturbance_family.members();
        let [[a1, b1], [a2, b2]] = self.x0_box;
        (0..self.samples)
            .map(|i| {
                let x0 = (0..MAX_REJECTIONS)
                    .map(|_| State::new(rng.gen_range(a1..b1), rng.gen_range(a2..b2)))
                    .find(|x| self.x0_region.contains(*x, self.base.gamma))
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "x0_box has no points in region {:?}",
                            self.x0_region
                        ))
                    })?;
                let disturbance = match family[i % family.len()].clone() {
                    DisturbanceSpec::UniformRandom { bound, .. } => {
                        DisturbanceSpec::UniformRandom {
                            bound,
                            seed: rng.gen(),
                        }
                    }
                    DisturbanceSpec::Sinusoid {
                        amplitude,
                        frequency_hz,
                        phase,
                    } if self.randomize_sinusoid_phase => DisturbanceSpec::Sinusoid {
                        amplitude,
                        frequency_hz,
                        phase: phase + rng.gen_range(0.0..2.0 * PI),
                    },
                    other => other,
                };
                ScenarioFile {
                    x0,
                    disturbance,
                    ..self.base.clone()
                }
                .resolve()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub x0: State,
    pub disturbance: DisturbanceSpec,
    pub captured_at: Option<f64>,
    /// `(measured, lo, hi)` for every U phase.
    pub u_exits: Vec<(f64, f64, f64)>,
    pub bracket_ok: bool,
    /// `None` when the run never enters C.
    pub overshoot: Option<bool>,
    pub max_abs_u_in_u: Option<f64>,
    pub v_monotone: bool,
    /// Closed-form time to the origin for unperturbed runs from `U ∪ C_a`.
    pub analytic_reach_time: Option<f64>,
    pub diverged: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub captured: usize,
    pub bracket_ok: usize,
    pub overshoot_checked: usize,
    pub overshoot_free: usize,
    pub v_monotone: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweep: SweepFile,
    pub law: Law,
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

pub fn summarize(index: usize, cfg: &SimConfig, law: Law) -> RunSummary {
    let mut summary = RunSummary {
        index,
        x0: cfg.x0,
        disturbance: cfg.disturbance.clone(),
        captured_at: None,
        u_exits: Vec::new(),
        bracket_ok: false,
        overshoot: None,
        max_abs_u_in_u: None,
        v_monotone: false,
        analytic_reach_time: None,
        diverged: None,
    };
    if cfg.disturbance == DisturbanceSpec::Zero {
        summary.analytic_reach_time = compose_trajectory(cfg.x0, cfg.params.gamma, cfg.dt)
            .ok()
            .map(|s| s.total_time);
    }
    let traj = match simulate(cfg, law) {
        Ok(t) => t,
        Err(e) => {
            summary.diverged = Some(e.to_string());
            return summary;
        }
    };
    summary.captured_at = traj.captured_at;
    if let Ok(rep) = u_exit_bracket_check(&traj, cfg.params.gamma, cfg.params.d) {
        summary.bracket_ok = rep.all_within;
        summary.u_exits = rep
            .phases
            .iter()
            .zip(&rep.brackets)
            .map(|(p, (lo, hi))| (p.duration(), *lo, *hi))
            .collect();
    }
    summary.overshoot = overshoot_check(&traj).ok().map(|r| r.overshoot);
    summary.max_abs_u_in_u = max_abs_u_in_u(&traj);
    summary.v_monotone = vdot_along(&traj, &cfg.params.lyapunov()).monotone;
    summary
}

/// Runs every scenario in parallel; results are ordered by scenario index.
pub fn run_sweep(sweep: &SweepFile, law: Law) -> Result<SweepReport> {
    let scenarios = sweep.scenarios()?;
    let runs: Vec<RunSummary> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| summarize(i, cfg, law))
        .collect();
    let mut agg = Aggregate {
        runs: runs.len(),
        ..Aggregate::default()
    };
    for r in &runs {
        agg.captured += usize::from(r.captured_at.is_some());
        agg.bracket_ok += usize::from(r.bracket_ok);
        agg.overshoot_checked += usize::from(r.overshoot.is_some());
        agg.overshoot_free += usize::from(r.overshoot == Some(false));
        agg.v_monotone += usize::from(r.v_monotone);
        agg.diverged += usize::from(r.diverged.is_some());
    }
    Ok(SweepReport {
        sweep: sweep.clone(),
        law,
        runs,
        aggregate: agg,
    })
}
