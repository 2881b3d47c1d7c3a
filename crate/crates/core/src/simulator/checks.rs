use serde::{Deserialize, Serialize};

use super::{filter_alpha, simulate};
use crate::analytic::compose_trajectory;
use crate::controller::{sgn, Law};
use crate::error::{Error, Result};
use crate::model::{DisturbanceSpec, Domain, EventKind, SimConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub max_x1_err: f64,
    pub max_x2_err: f64,
    pub max_u_err: f64,
    /// Time of the largest state deviation.
    pub at_t: f64,
    pub compared_samples: usize,
}

impl ErrorReport {
    pub fn max_state_err(&self) -> f64 {
        self.max_x1_err.max(self.max_x2_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootReport {
    pub overshoot: bool,
    pub first_violation_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UExitPhase {
    pub t_enter: f64,
    pub x2_enter: f64,
    /// Time of the first sample in C after `t_enter`.
    pub t_exit: f64,
}

impl UExitPhase {
    pub fn duration(&self) -> f64 {
        self.t_exit - self.t_enter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub phases: Vec<UExitPhase>,
    /// `(lo, hi)` per phase, one step of slack included.
    pub brackets: Vec<(f64, f64)>,
    pub all_within: bool,
}

/// First-order exponential smoother, `y[0] = u[0]`.
pub fn filter_control(u: &[f64], cutoff_hz: f64, dt: f64) -> Vec<f64> {
    let alpha = filter_alpha(cutoff_hz, dt);
    let mut out = Vec::with_capacity(u.len());
    let mut y = 0.0;
    for (k, &v) in u.iter().enumerate() {
        y = if k == 0 { v } else { y + alpha * (v - y) };
        out.push(y);
    }
    out
}

/// Whether `x1` changes sign (beyond the capture band) between the first
/// entry into C and capture.
pub fn overshoot_check(traj: &Trajectory) -> Result<OvershootReport> {
    let t_c = traj
        .first_event(EventKind::EnterC)
        .ok_or(Error::NoCPhase)?
        .t;
    let pre = traj.pre_capture();
    let start = pre.partition_point(|s| s.t < t_c);
    let Some(first) = pre.get(start) else {
        return Ok(OvershootReport {
            overshoot: false,
            first_violation_t: None,
        });
    };
    let side = sgn(first.state.x1);
    let violation = pre[start..]
        .iter()
        .find(|s| sgn(s.state.x1) == -side && s.state.x1.abs() > traj.capture_eps1);
    Ok(OvershootReport {
        overshoot: violation.is_some(),
        first_violation_t: violation.map(|s| s.t),
    })
}

/// Each stay in U that ends with a transition into C before capture.
pub fn u_exit_phases(traj: &Trajectory) -> Vec<UExitPhase> {
    let mut phases = Vec::new();
    let mut open: Option<f64> = None;
    for e in &traj.events {
        match e.kind {
            EventKind::EnterU => open = Some(e.t),
            EventKind::EnterC => {
                if let Some(t_enter) = open.take() {
                    let k = ((t_enter / traj.dt).round() as usize).min(traj.samples.len() - 1);
                    phases.push(UExitPhase {
                        t_enter,
                        x2_enter: traj.samples[k].state.x2,
                        t_exit: e.t,
                    });
                }
            }
            EventKind::Capture => break,
            _ => {}
        }
    }
    phases
}

/// Checks every U phase against `[|x2|/(gamma + D) - dt, |x2|/(gamma - D) + dt]`.
pub fn u_exit_bracket_check(traj: &Trajectory, gamma: f64, d: f64) -> Result<BracketReport> {
    if gamma <= d {
        return Err(Error::GammaTooSmall { gamma, bound: d });
    }
    let phases = u_exit_phases(traj);
    let brackets: Vec<(f64, f64)> = phases
        .iter()
        .map(|p| {
            let v = p.x2_enter.abs();
            (v / (gamma + d) - traj.dt, v / (gamma - d) + traj.dt)
        })
        .collect();
    // event times sit on the grid; allow rounding in k * dt
    let tol = 1e-9 * traj.dt;
    let all_within = phases
        .iter()
        .zip(&brackets)
        .all(|(p, (lo, hi))| p.duration() >= lo - tol && p.duration() <= hi + tol);
    Ok(BracketReport {
        phases,
        brackets,
        all_within,
    })
}

/// Largest recorded `|u|` over pre-capture samples in U off the x2-axis.
pub fn max_abs_u_in_u(traj: &Trajectory) -> Option<f64> {
    traj.pre_capture()
        .iter()
        .filter(|s| s.region.domain == Domain::U && s.state.x1 != 0.0)
        .map(|s| s.u.abs())
        .reduce(f64::max)
}

/// Simulation against the closed-form solution on the simulation grid, over
/// the window where neither is captured, excluding samples in the capture band.
pub fn compare_with_analytic(cfg: &SimConfig) -> Result<ErrorReport> {
    if cfg.disturbance != DisturbanceSpec::Zero {
        return Err(Error::PreconditionViolated(
            "analytic comparison needs a zero disturbance".into(),
        ));
    }
    let gamma = cfg.params.gamma;
    if !(cfg.x0.in_u() || cfg.x0.in_ca(gamma)) {
        return Err(Error::NotCovered {
            x1: cfg.x0.x1,
            x2: cfg.x0.x2,
        });
    }
    let exact = compose_trajectory(cfg.x0, gamma, cfg.dt)?;
    let traj = simulate(cfg, Law::Modified)?;
    let end = traj
        .captured_at
        .unwrap_or(f64::INFINITY)
        .min(exact.total_time);
    Ok(accumulate(
        traj.samples
            .iter()
            .take_while(|s| s.t < end)
            .filter_map(|s| {
                let (x, u) = exact.eval(s.t);
                (!traj.in_capture_band(&x) && !traj.in_capture_band(&s.state)).then_some((
                    s.t,
                    s.state.x1 - x.x1,
                    s.state.x2 - x.x2,
                    s.u - u,
                ))
            }),
    ))
}

/// Simulation at `cfg.dt` against the same scenario at `ref_dt`, sampled on
/// the coarse grid before either run is captured.
pub fn compare_with_reference(cfg: &SimConfig, law: Law, ref_dt: f64) -> Result<ErrorReport> {
    let ratio = cfg.dt / ref_dt;
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio {
        return Err(Error::PreconditionViolated(format!(
            "dt = {} is not an integer multiple of ref_dt = {ref_dt}",
            cfg.dt
        )));
    }
    let r = r as usize;
    let coarse = simulate(cfg, law)?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.dt = ref_dt;
    fine_cfg.capture_eps1 = cfg.capture_eps1;
    fine_cfg.capture_eps2 = cfg.capture_eps2;
    let fine = simulate(&fine_cfg, law)?;
    let end = coarse
        .captured_at
        .unwrap_or(f64::INFINITY)
        .min(fine.captured_at.unwrap_or(f64::INFINITY));
    Ok(accumulate(
        coarse
            .samples
            .iter()
            .enumerate()
            .take_while(|(_, s)| s.t < end)
            .filter_map(|(k, s)| {
                let f = fine.samples.get(k * r)?;
                Some((
                    s.t,
                    s.state.x1 - f.state.x1,
                    s.state.x2 - f.state.x2,
                    s.u - f.u,
                ))
            }),
    ))
}

fn accumulate(diffs: impl Iterator<Item = (f64, f64, f64, f64)>) -> ErrorReport {
    let mut rep = ErrorReport {
        max_x1_err: 0.0,
        max_x2_err: 0.0,
        max_u_err: 0.0,
        at_t: 0.0,
        compared_samples: 0,
    };
    for (t, e1, e2, eu) in diffs {
        let worst = rep.max_state_err();
        rep.max_x1_err = rep.max_x1_err.max(e1.abs());
        rep.max_x2_err = rep.max_x2_err.max(e2.abs());
        rep.max_u_err = rep.max_u_err.max(eu.abs());
        if rep.max_state_err() > worst {
            rep.at_t = t;
        }
        rep.compared_samples += 1;
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ScenarioFile, State};

    fn cfg(x0: (f64, f64), gamma: f64, d: f64, t_end: f64) -> SimConfig {
        ScenarioFile::new(State::new(x0.0, x0.1), gamma, d, t_end)
            .resolve()
            .unwrap()
    }

    #[test]
    fn filter_examples() {
        assert!(filter_control(&[150.0; 50], 500.0, 1e-4)
            .iter()
            .all(|&y| y == 150.0));
        let u = [1.0, -3.0, 7.0, 2.0];
        let y = filter_control(&u, 1e12, 1e-4);
        assert_eq!(y, u);

        let alt: Vec<f64> = (0..2000)
            .map(|k| if k % 2 == 0 { 100.0 } else { -100.0 })
            .collect();
        let y = filter_control(&alt, 500.0, 1e-4);
        let alpha = filter_alpha(500.0, 1e-4);
        let bound = 100.0 * alpha / (2.0 - alpha);
        assert!(y[1000..].iter().all(|v| v.abs() <= bound * (1.0 + 1e-9)));
        assert!(y[1000..].iter().any(|v| v.abs() > 0.99 * bound));
    }

    #[test]
    fn overshoot_examples() {
        let traj = simulate(&cfg((1.0, 2.0), 100.0, 0.0, 0.5), Law::Modified).unwrap();
        assert_eq!(
            overshoot_check(&traj).unwrap(),
            OvershootReport {
                overshoot: false,
                first_violation_t: None
            }
        );

        let mut adv = cfg((1.0, -10.0), 101.0, 100.0, 2.0);
        adv.disturbance = DisturbanceSpec::Constant { value: -100.0 };
        let traj = simulate(&adv, Law::Modified).unwrap();
        assert!(overshoot_check(&traj).is_ok());

        let mut u_only = cfg((1.0, 2.0), 100.0, 0.0, 0.001);
        u_only.t_end = 0.001;
        let traj = simulate(&u_only, Law::Modified).unwrap();
        assert!(matches!(overshoot_check(&traj), Err(Error::NoCPhase)));
    }

    #[test]
    fn bracket_unperturbed_is_tight() {
        let traj = simulate(&cfg((1.0, 2.0), 100.0, 0.0, 0.5), Law::Modified).unwrap();
        let rep = u_exit_bracket_check(&traj, 100.0, 0.0).unwrap();
        assert_eq!(rep.phases.len(), 1);
        assert!(rep.all_within);
        assert!((rep.phases[0].duration() - 0.02).abs() <= 1.0001e-4);
    }

    #[test]
    fn analytic_comparison() {
        let rep = compare_with_analytic(&cfg((1.0, -10.0), 100.0, 0.0, 0.3)).unwrap();
        assert!(rep.compared_samples > 1000);
        assert!(rep.max_state_err() < 0.1);

        assert!(matches!(
            compare_with_analytic(&cfg((0.1, -10.0), 100.0, 0.0, 0.3)),
            Err(Error::NotCovered { .. })
        ));
    }

    #[test]
    fn max_u_in_u_is_gamma() {
        let traj = simulate(&cfg((1.0, 2.0), 100.0, 0.0, 0.5), Law::Modified).unwrap();
        assert_eq!(max_abs_u_in_u(&traj), Some(100.0));
    }
}
