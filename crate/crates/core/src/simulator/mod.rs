//! Fixed-step closed-loop simulation.

mod checks;

pub use checks::{
    compare_with_analytic, compare_with_reference, filter_control, max_abs_u_in_u, overshoot_check,
    u_exit_bracket_check, u_exit_phases, BracketReport, ErrorReport, OvershootReport, UExitPhase,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{classify, Law};
use crate::error::{Error, Result};
use crate::lyapunov;
use crate::model::{
    DisturbanceSpec, Domain, Event, EventKind, Integrator, PostCapture, SimConfig, State,
    Trajectory, TrajectorySample,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next: State,
    /// Control at the left endpoint of the step.
    pub u: f64,
    /// Disturbance at the left endpoint of the step.
    pub d: f64,
    pub clamped: bool,
}

/// Realizes a [`DisturbanceSpec`]. Random variants draw one value per step
/// index, in order, and hold it over the step.
#[derive(Debug, Clone)]
pub struct DisturbanceSource {
    spec: DisturbanceSpec,
    rng: Option<ChaCha8Rng>,
    held: Option<(u64, f64)>,
}

impl DisturbanceSource {
    pub fn new(spec: &DisturbanceSpec) -> Self {
        let rng = match spec {
            DisturbanceSpec::UniformRandom { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        DisturbanceSource {
            spec: spec.clone(),
            rng,
            held: None,
        }
    }

    /// Value for step `step_index` at time `t`. Random draws are advanced
    /// until `step_index` is reached; asking for an earlier step returns the
    /// currently held value.
    pub fn value(&mut self, t: f64, step_index: u64) -> f64 {
        if let Some(v) = self.spec.deterministic_value(t) {
            return v;
        }
        let DisturbanceSpec::UniformRandom { bound, .. } = self.spec else {
            unreachable!("only random specs lack a deterministic value")
        };
        let rng = self.rng.as_mut().expect("random spec has an rng");
        loop {
            match self.held {
                Some((k, v)) if k >= step_index => return v,
                Some((k, _)) => {
                    let r: f64 = rng.gen();
                    self.held = Some((k + 1, bound * (2.0 * r - 1.0)));
                }
                None => {
                    let r: f64 = rng.gen();
                    self.held = Some((0, bound * (2.0 * r - 1.0)));
                }
            }
        }
    }
}

pub fn eval_disturbance(
    spec: &DisturbanceSpec,
    t: f64,
    step_index: u64,
    source: &mut DisturbanceSource,
) -> f64 {
    debug_assert_eq!(spec, &source.spec);
    source.value(t, step_index)
}

/// Vector field at `(x, t)` inside step `k`: random draws stay held,
/// deterministic signals are evaluated at `t`.
fn rhs(
    x: State,
    t: f64,
    k: u64,
    cfg: &SimConfig,
    law: Law,
    src: &mut DisturbanceSource,
) -> Result<(State, f64, f64, bool)> {
    let c = law.evaluate(x, cfg.params.gamma, cfg.delta_cap)?;
    let d = src.value(t, k);
    Ok((State::new(x.x2, c.u + d), c.u, d, c.clamped))
}

/// One integration step of length `cfg.dt` from `x` at `t = k dt`.
pub fn step(
    x: State,
    t: f64,
    k: u64,
    cfg: &SimConfig,
    law: Law,
    source: &mut DisturbanceSource,
) -> Result<StepOutcome> {
    let dt = cfg.dt;
    let (f1, u, d, clamped) = rhs(x, t, k, cfg, law, source)?;
    let next = match cfg.integrator {
        Integrator::Euler => State::new(x.x1 + dt * x.x2, x.x2 + dt * (u + d)),
        Integrator::Rk4 => {
            let h = dt / 2.0;
            let at = |f: State, w: f64| State::new(x.x1 + w * f.x1, x.x2 + w * f.x2);
            let (f2, ..) = rhs(at(f1, h), t + h, k, cfg, law, source)?;
            let (f3, ..) = rhs(at(f2, h), t + h, k, cfg, law, source)?;
            let (f4, ..) = rhs(at(f3, dt), t + dt, k, cfg, law, source)?;
            let w = dt / 6.0;
            State::new(
                x.x1 + w * (f1.x1 + 2.0 * f2.x1 + 2.0 * f3.x1 + f4.x1),
                x.x2 + w * (f1.x2 + 2.0 * f2.x2 + 2.0 * f3.x2 + f4.x2),
            )
        }
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState {
            t: t + dt,
            partial: Box::default(),
        });
    }
    Ok(StepOutcome {
        next,
        u,
        d,
        clamped,
    })
}

/// Runs the closed loop from `cfg.x0` over `[0, t_end]` on the grid `k dt`.
pub fn simulate(cfg: &SimConfig, law: Law) -> Result<Trajectory> {
    let n = (cfg.t_end / cfg.dt).round() as u64;
    let gamma = cfg.params.gamma;
    let lp = cfg.params.lyapunov();
    let alpha = filter_alpha(cfg.filter_cutoff_hz, cfg.dt);
    let mut source = DisturbanceSource::new(&cfg.disturbance);

    let mut traj = Trajectory {
        samples: Vec::with_capacity(n as usize + 1),
        events: Vec::new(),
        captured_at: None,
        dt: cfg.dt,
        capture_eps1: cfg.capture_eps1,
        capture_eps2: cfg.capture_eps2,
    };
    let mut x = cfg.x0;
    let mut domain: Option<Domain> = None;
    let mut clamping = false;
    let mut u_filt = 0.0;

    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        if traj.captured_at.is_none() && traj.in_capture_band(&x) {
            traj.captured_at = Some(t);
            traj.events.push(Event {
                t,
                kind: EventKind::Capture,
            });
            if cfg.post_capture == PostCapture::Hold {
                x = State::ORIGIN;
            }
        }
        let held = traj.captured_at.is_some() && cfg.post_capture == PostCapture::Hold;

        if traj.captured_at.is_none() {
            let now = if x.in_u() { Domain::U } else { Domain::C };
            if domain != Some(now) {
                traj.events.push(Event {
                    t,
                    kind: match now {
                        Domain::U => EventKind::EnterU,
                        Domain::C => EventKind::EnterC,
                    },
                });
                domain = Some(now);
            }
        }

        let outcome = if held {
            StepOutcome {
                next: State::ORIGIN,
                u: 0.0,
                d: source.value(t, k),
                clamped: false,
            }
        } else {
            match step(x, t, k, cfg, law, &mut source) {
                Ok(o) => o,
                Err(Error::NonFiniteState { t: t_bad, .. }) => {
                    traj.events.push(Event {
                        t: t_bad,
                        kind: EventKind::Diverged,
                    });
                    return Err(Error::NonFiniteState {
                        t: t_bad,
                        partial: Box::new(traj),
                    });
                }
                Err(e) => return Err(e),
            }
        };

        if outcome.clamped && !clamping {
            traj.events.push(Event {
                t,
                kind: EventKind::DeltaClamped,
            });
        }
        clamping = outcome.clamped;

        u_filt = if k == 0 {
            outcome.u
        } else {
            u_filt + alpha * (outcome.u - u_filt)
        };
        traj.samples.push(TrajectorySample {
            t,
            state: x,
            u: outcome.u,
            u_filt,
            d: outcome.d,
            region: classify(x, gamma),
            v_new: lyapunov::v_new(x, &lp),
            energy: lyapunov::energy(x, gamma),
        });
        x = outcome.next;
    }
    Ok(traj)
}

/// Smoothing factor of the first-order filter; cutoff 0 disables filtering.
pub(crate) fn filter_alpha(cutoff_hz: f64, dt: f64) -> f64 {
    if cutoff_hz == 0.0 {
        1.0
    } else {
        1.0 - (-2.0 * std::f64::consts::PI * cutoff_hz * dt).exp()
    }
}
