//! Closed-form solutions of the unperturbed closed loop.
//!
//! In U the control is the constant `-gamma sgn(x1)` and trajectories are
//! parabolas that leave U when `x2` reaches zero, after `|x2(0)| / gamma`.
//! In C_a (quadrant IV, `x2^2 < 2 gamma x1`) the damped dynamics
//! `x2' - x2^2/x1 + gamma = 0` admit the harmonic solution
//!
//! ```text
//! x1(t) = B - (gamma / omega^2) cos(omega t + phi)
//! x2(t) = (gamma / omega) sin(omega t + phi)
//! u(t)  = gamma cos(omega t + phi)
//! B = gamma x1^2 / (2 gamma x1 - x2^2),  omega = sqrt(gamma / B),
//! phi = pi + acos(1 - x2^2 / (gamma x1))
//! ```
//!
//! which reaches the origin when `omega t + phi = 2 pi`. Quadrant II follows by
//! point symmetry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::{classify, sgn};
use crate::error::{Error, Result};
use crate::lyapunov::{self, LyapunovParams};
use crate::model::{Event, EventKind, State, Trajectory, TrajectorySample};

const ACOS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicArc {
    pub x0: State,
    pub gamma: f64,
    /// +1 in quadrant I (and on the positive half-axes), -1 in quadrant III.
    pub sign_branch: i8,
    pub t_exit: f64,
}

impl ParabolicArc {
    pub fn eval(&self, t: f64) -> Result<(State, f64)> {
        if !(0.0..=self.t_exit).contains(&t) {
            return Err(Error::OutOfWindow {
                t,
                end: self.t_exit,
            });
        }
        let s = f64::from(self.sign_branch);
        let x1 = self.x0.x1 + self.x0.x2 * t - s * self.gamma * t * t / 2.0;
        let x2 = self.x0.x2 - s * self.gamma * t;
        Ok((State::new(x1, x2), -s * self.gamma))
    }

    pub fn end_state(&self) -> State {
        let s = f64::from(self.sign_branch);
        let t = self.t_exit;
        State::new(
            self.x0.x1 + self.x0.x2 * t - s * self.gamma * t * t / 2.0,
            0.0,
        )
    }
}

pub fn parabolic_arc(x0: State, gamma: f64) -> Result<ParabolicArc> {
    if !x0.in_u() {
        return Err(Error::NotInU {
            x1: x0.x1,
            x2: x0.x2,
        });
    }
    if x0.is_origin() {
        return Err(Error::DegenerateOrigin);
    }
    // on the x2-axis the branch follows the velocity
    let sign_branch = if x0.x1 != 0.0 { sgn(x0.x1) } else { sgn(x0.x2) };
    Ok(ParabolicArc {
        x0,
        gamma,
        sign_branch,
        t_exit: reach_time_u(x0, gamma)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicArc {
    #[serde(rename = "B")]
    pub b: f64,
    pub omega: f64,
    pub phi: f64,
    pub gamma: f64,
    pub x0: State,
    pub t_reach: f64,
    /// Computed on `-x0` and negated (quadrant II start).
    pub mirrored: bool,
}

/// `x0` must be in C_a or on its closure at the x1-axis (`x2 = 0`, `x1 != 0`).
fn check_ca(x0: State, gamma: f64) -> Result<()> {
    let on_c_or_junction = x0.x1 * x0.x2 < 0.0 || (x0.x2 == 0.0 && x0.x1 != 0.0);
    if on_c_or_junction && x0.x2 * x0.x2 < 2.0 * gamma * x0.x1.abs() {
        Ok(())
    } else {
        Err(Error::NotInCa {
            x1: x0.x1,
            x2: x0.x2,
        })
    }
}

/// Quadrant-IV representative of `x0` and whether it was mirrored.
fn fold(x0: State) -> (State, bool) {
    if x0.x1 < 0.0 {
        (-x0, true)
    } else {
        (x0, false)
    }
}

fn clamped_acos(arg: f64) -> f64 {
    debug_assert!(
        (-1.0 - ACOS_SLACK..=1.0 + ACOS_SLACK).contains(&arg),
        "{arg}"
    );
    arg.clamp(-1.0, 1.0).acos()
}

fn ca_angle(x1: f64, x2: f64, gamma: f64) -> f64 {
    clamped_acos(1.0 - x2 * x2 / (gamma * x1))
}

pub fn harmonic_params(x0: State, gamma: f64) -> Result<HarmonicArc> {
    check_ca(x0, gamma)?;
    let (x, mirrored) = fold(x0);
    let b = gamma * x.x1 * x.x1 / (2.0 * gamma * x.x1 - x.x2 * x.x2);
    let omega = (gamma / b).sqrt();
    let phi = PI + ca_angle(x.x1, x.x2, gamma);
    Ok(HarmonicArc {
        b,
        omega,
        phi,
        gamma,
        x0,
        t_reach: reach_time_ca(x0, gamma)?,
        mirrored,
    })
}

impl HarmonicArc {
    pub fn eval(&self, t: f64) -> Result<(State, f64)> {
        if !(0.0..=self.t_reach).contains(&t) {
            return Err(Error::OutOfWindow {
                t,
                end: self.t_reach,
            });
        }
        let theta = self.omega * t + self.phi;
        let amp = self.gamma / self.omega;
        let x1 = -(amp / self.omega) * theta.cos() + self.b;
        let x2 = amp * theta.sin();
        let u = self.gamma * theta.cos();
        let s = if self.mirrored { -1.0 } else { 1.0 };
        Ok((State::new(s * x1, s * x2), s * u))
    }

    /// Closed-form `x2'` at `t`, equal to the control on the arc.
    pub fn x2_rate(&self, t: f64) -> f64 {
        let s = if self.mirrored { -1.0 } else { 1.0 };
        s * self.gamma * (self.omega * t + self.phi).cos()
    }
}

/// Time to reach the origin from `x0` in C_a, the first root of
/// `cos(omega T + phi) = 1`.
pub fn reach_time_ca(x0: State, gamma: f64) -> Result<f64> {
    check_ca(x0, gamma)?;
    let (x, _) = fold(x0);
    let angle = ca_angle(x.x1, x.x2, gamma);
    Ok(x.x1 * (PI - angle) / (2.0 * gamma * x.x1 - x.x2 * x.x2).sqrt())
}

/// The reach-time expression with `sqrt(gamma x1 - x2^2)` in the denominator.
/// Returns `None` where that denominator is not a positive real. Kept only to
/// compare against [`reach_time_ca`] and simulation.
pub fn reach_time_ca_alt_denominator(x0: State, gamma: f64) -> Result<Option<f64>> {
    check_ca(x0, gamma)?;
    let (x, _) = fold(x0);
    let radicand = gamma * x.x1 - x.x2 * x.x2;
    if radicand <= 0.0 {
        return Ok(None);
    }
    let angle = ca_angle(x.x1, x.x2, gamma);
    Ok(Some(x.x1 * (PI - angle) / radicand.sqrt()))
}

pub fn reach_time_u(x0: State, gamma: f64) -> Result<f64> {
    if !x0.in_u() {
        return Err(Error::NotInU {
            x1: x0.x1,
            x2: x0.x2,
        });
    }
    Ok(x0.x2.abs() / gamma)
}

/// Bracket on the U-exit time under any disturbance with `|d| <= D`.
pub fn reach_time_u_bounds(x0: State, gamma: f64, d: f64) -> Result<(f64, f64)> {
    if !x0.in_u() {
        return Err(Error::NotInU {
            x1: x0.x1,
            x2: x0.x2,
        });
    }
    if gamma <= d {
        return Err(Error::GammaTooSmall { gamma, bound: d });
    }
    let v = x0.x2.abs();
    Ok((v / (gamma + d), v / (gamma - d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arc {
    Parabolic { start: f64, arc: ParabolicArc },
    Harmonic { start: f64, arc: HarmonicArc },
}

impl Arc {
    fn start(&self) -> f64 {
        match self {
            Arc::Parabolic { start, .. } | Arc::Harmonic { start, .. } => *start,
        }
    }

    fn duration(&self) -> f64 {
        match self {
            Arc::Parabolic { arc, .. } => arc.t_exit,
            Arc::Harmonic { arc, .. } => arc.t_reach,
        }
    }

    fn eval_local(&self, t: f64) -> Result<(State, f64)> {
        match self {
            Arc::Parabolic { arc, .. } => arc.eval(t),
            Arc::Harmonic { arc, .. } => arc.eval(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSolution {
    pub arcs: Vec<Arc>,
    pub total_time: f64,
    pub trajectory: Trajectory,
}

impl AnalyticSolution {
    /// State and control at `t`; the origin with `u = 0` after `total_time`.
    pub fn eval(&self, t: f64) -> (State, f64) {
        for arc in &self.arcs {
            let local = t - arc.start();
            if local <= arc.duration() {
                return arc
                    .eval_local(local.max(0.0))
                    .expect("local time inside arc window");
            }
        }
        (State::ORIGIN, 0.0)
    }
}

/// Piecewise closed-form trajectory from `x0` in `U ∪ C_a` to the origin.
pub fn compose_trajectory(x0: State, gamma: f64, sample_dt: f64) -> Result<AnalyticSolution> {
    if sample_dt.is_nan() || sample_dt <= 0.0 {
        return Err(Error::PreconditionViolated("sample_dt must be > 0".into()));
    }
    let mut arcs = Vec::new();
    if !x0.is_origin() {
        if x0.in_u() {
            let para = parabolic_arc(x0, gamma)?;
            let junction = para.end_state();
            if para.t_exit > 0.0 {
                arcs.push(Arc::Parabolic {
                    start: 0.0,
                    arc: para,
                });
            }
            let harm = harmonic_params(junction, gamma)?;
            arcs.push(Arc::Harmonic {
                start: para.t_exit,
                arc: harm,
            });
        } else if x0.in_ca(gamma) {
            arcs.push(Arc::Harmonic {
                start: 0.0,
                arc: harmonic_params(x0, gamma)?,
            });
        } else {
            return Err(Error::NotCovered {
                x1: x0.x1,
                x2: x0.x2,
            });
        }
    }
    let total_time = arcs.last().map_or(0.0, |a| a.start() + a.duration());

    let eta = lyapunov::default_eta(0.0).min(0.5 * gamma);
    let (epsilon, _) = lyapunov::default_epsilon(gamma, 0.0, eta);
    let lp = LyapunovParams {
        gamma,
        d: 0.0,
        eta,
        epsilon,
    };

    let mut solution = AnalyticSolution {
        arcs,
        total_time,
        trajectory: Trajectory {
            samples: Vec::new(),
            events: Vec::new(),
            captured_at: Some(total_time),
            dt: sample_dt,
            capture_eps1: 0.0,
            capture_eps2: 0.0,
        },
    };

    let n = (total_time / sample_dt).floor() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * sample_dt;
        let (state, u) = solution.eval(t);
        samples.push(TrajectorySample {
            t,
            state,
            u,
            u_filt: u,
            d: 0.0,
            region: classify(state, gamma),
            v_new: lyapunov::v_new(state, &lp),
            energy: lyapunov::energy(state, gamma),
        });
    }
    let mut events = Vec::new();
    if x0.in_u() {
        events.push(Event {
            t: 0.0,
            kind: EventKind::EnterU,
        });
    }
    for arc in &solution.arcs {
        if let Arc::Harmonic { start, .. } = arc {
            events.push(Event {
                t: *start,
                kind: EventKind::EnterC,
            });
        }
    }
    events.push(Event {
        t: total_time,
        kind: EventKind::Capture,
    });
    solution.trajectory.samples = samples;
    solution.trajectory.events = events;
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Reach time by quadrature of dt = dx1 / |x2| along the level set
    /// `2 gamma x1 - x2^2 = gamma x1^2 / B` (B conserved on the damped
    /// dynamics), substituting x1 = s^2 to remove the endpoint singularity.
    fn reach_time_quadrature(x1: f64, x2: f64, gamma: f64) -> f64 {
        let inv_b = (2.0 * gamma * x1 - x2 * x2) / (gamma * x1 * x1);
        let f = |s: f64| 2.0 / (2.0 * gamma - gamma * s * s * inv_b).sqrt();
        let upper = x1.sqrt();
        let n = 20_000;
        let h = upper / n as f64;
        let mut acc = f(0.0) + f(upper);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn parabolic_examples() {
        let arc = parabolic_arc(State::new(1.0, 2.0), 100.0).unwrap();
        let (s, u) = arc.eval(0.01).unwrap();
        assert!(close(s.x1, 1.015, 1e-12) && close(s.x2, 1.0, 1e-12));
        assert_eq!(u, -100.0);
        assert_eq!(arc.t_exit, 0.02);
        let (s, _) = arc.eval(0.02).unwrap();
        assert!(close(s.x1, 1.02, 1e-12) && close(s.x2, 0.0, 1e-12));

        let arc = parabolic_arc(State::new(-1.0, -2.0), 100.0).unwrap();
        let (s, u) = arc.eval(0.01).unwrap();
        assert!(close(s.x1, -1.015, 1e-12) && close(s.x2, -1.0, 1e-12));
        assert_eq!(u, 100.0);

        assert!(matches!(
            parabolic_arc(State::new(1.0, -2.0), 100.0),
            Err(Error::NotInU { .. })
        ));
        assert!(matches!(
            parabolic_arc(State::ORIGIN, 100.0),
            Err(Error::DegenerateOrigin)
        ));
        assert!(matches!(arc.eval(0.5), Err(Error::OutOfWindow { .. })));
    }

    #[test]
    fn harmonic_examples() {
        let arc = harmonic_params(State::new(1.0, -10.0), 100.0).unwrap();
        assert!(close(arc.b, 1.0, 1e-15));
        assert!(close(arc.omega, 10.0, 1e-14));
        assert!(close(arc.phi, 1.5 * PI, 1e-14));

        let arc = harmonic_params(State::new(2.0, -10.0), 100.0).unwrap();
        assert!(close(arc.b, 4.0 / 3.0, 1e-14));
        assert!(close(arc.omega, 75f64.sqrt(), 1e-12));
        assert!(close(arc.phi, 4.0 * PI / 3.0, 1e-14));
        let (s, _) = arc.eval(0.0).unwrap();
        assert!(close(s.x1, 2.0, 1e-12) && close(s.x2, -10.0, 1e-12));

        let arc = harmonic_params(State::new(1.02, 0.0), 100.0).unwrap();
        assert!(close(arc.b, 0.51, 1e-15));
        assert!(close(arc.omega, (100.0f64 / 0.51).sqrt(), 1e-12));
        assert!(close(arc.omega, 14.0028, 1e-4));
        assert_eq!(arc.phi, PI);
        let (_, u) = arc.eval(0.0).unwrap();
        assert_eq!(u, -100.0);

        assert!(matches!(
            harmonic_params(State::new(0.1, -10.0), 100.0),
            Err(Error::NotInCa { .. })
        ));
        assert!(matches!(
            harmonic_params(State::new(1.0, 10.0), 100.0),
            Err(Error::NotInCa { .. })
        ));
    }

    #[test]
    fn harmonic_eval_examples() {
        let arc = harmonic_params(State::new(1.0, -10.0), 100.0).unwrap();
        let (s, u) = arc.eval(0.0).unwrap();
        assert!(close(s.x1, 1.0, 1e-12) && close(s.x2, -10.0, 1e-12));
        assert!(close(u, 0.0, 1e-12));

        assert!(close(arc.t_reach, PI / 20.0, 1e-15));
        let (s, u) = arc.eval(arc.t_reach).unwrap();
        assert!(s.norm_inf() < 1e-9);
        assert!(close(u, 100.0, 1e-9));

        let (s, _) = arc.eval(PI / 40.0).unwrap();
        assert!(close(s.x1, 1.0 - 0.5f64.sqrt(), 1e-12));
        assert!(close(s.x2, -10.0 * 0.5f64.sqrt(), 1e-12));

        assert!(matches!(arc.eval(1.0), Err(Error::OutOfWindow { .. })));
    }

    #[test]
    fn reach_time_examples() {
        let t = reach_time_ca(State::new(1.0, -10.0), 100.0).unwrap();
        assert!(close(t, PI / 20.0, 1e-15));
        assert!(close(t, reach_time_quadrature(1.0, -10.0, 100.0), 1e-6));

        let t = reach_time_ca(State::new(2.0, -10.0), 100.0).unwrap();
        assert!(close(t, (2.0 * PI / 3.0) / 75f64.sqrt(), 1e-14));
        assert!(close(t, 0.24184, 1e-5));
        assert!(close(t, reach_time_quadrature(2.0, -10.0, 100.0), 1e-6));

        let t = reach_time_ca(State::new(1.0, 0.0), 100.0).unwrap();
        assert!(close(t, PI / 200f64.sqrt(), 1e-15));
        // limit x2 -> 0-
        let t_near = reach_time_ca(State::new(1.0, -1e-7), 100.0).unwrap();
        assert!(close(t, t_near, 1e-8));
    }

    #[test]
    fn alternative_denominator_disagrees() {
        // zero denominator where the trajectory still converges
        assert_eq!(
            reach_time_ca_alt_denominator(State::new(1.0, -10.0), 100.0).unwrap(),
            None
        );
        let alt = reach_time_ca_alt_denominator(State::new(2.0, -10.0), 100.0)
            .unwrap()
            .unwrap();
        let quad = reach_time_quadrature(2.0, -10.0, 100.0);
        assert!((alt - quad).abs() > 0.1);
    }

    #[test]
    fn reach_time_u_examples() {
        assert_eq!(reach_time_u(State::new(1.0, 2.0), 100.0).unwrap(), 0.02);
        assert_eq!(reach_time_u(State::new(5.0, 0.0), 100.0).unwrap(), 0.0);
        assert_eq!(reach_time_u(State::new(-1.0, -15.0), 150.0).unwrap(), 0.1);
        assert!(reach_time_u(State::new(1.0, -1.0), 150.0).is_err());

        let (lo, hi) = reach_time_u_bounds(State::new(1.0, 15.0), 150.0, 100.0).unwrap();
        assert!(close(lo, 0.06, 1e-15) && close(hi, 0.3, 1e-15));
        assert_eq!(
            reach_time_u_bounds(State::new(1.0, 15.0), 150.0, 0.0).unwrap(),
            (0.1, 0.1)
        );
        assert_eq!(
            reach_time_u_bounds(State::new(1.0, 0.0), 150.0, 100.0).unwrap(),
            (0.0, 0.0)
        );
        assert!(matches!(
            reach_time_u_bounds(State::new(1.0, 1.0), 100.0, 100.0),
            Err(Error::GammaTooSmall { .. })
        ));
    }

    #[test]
    fn composition_examples() {
        let sol = compose_trajectory(State::new(1.0, 2.0), 100.0, 1e-4).unwrap();
        assert_eq!(sol.arcs.len(), 2);
        let expected = 0.02 + PI * (0.51f64 / 100.0).sqrt();
        assert!(close(sol.total_time, expected, 1e-14));
        assert!(close(sol.total_time, 0.24436, 1e-5));
        // junction control continuous
        let (_, u_before) = sol.eval(0.02 - 1e-12);
        let (_, u_after) = sol.eval(0.02 + 1e-12);
        assert!(close(u_before, u_after, 1e-6));
        let umax = sol
            .trajectory
            .samples
            .iter()
            .map(|s| s.u.abs())
            .fold(0.0, f64::max);
        assert_eq!(umax, 100.0);

        let sol = compose_trajectory(State::new(1.0, -10.0), 100.0, 1e-4).unwrap();
        assert_eq!(sol.arcs.len(), 1);
        assert!(close(sol.total_time, PI / 20.0, 1e-15));

        assert!(matches!(
            compose_trajectory(State::new(0.1, -10.0), 100.0, 1e-4),
            Err(Error::NotCovered { .. })
        ));

        let sol = compose_trajectory(State::new(-1.0, -2.0), 100.0, 1e-3).unwrap();
        let (end, u) = sol.eval(sol.total_time);
        assert!(end.norm_inf() < 1e-9);
        assert!(close(u, -100.0, 1e-9));
    }

    #[test]
    fn ode_residual_along_arcs() {
        for x0 in [
            State::new(1.0, -10.0),
            State::new(2.0, -10.0),
            State::new(-0.3, 5.0),
            State::new(1.02, 0.0),
        ] {
            let arc = harmonic_params(x0, 100.0).unwrap();
            for k in 1..200 {
                let t = arc.t_reach * k as f64 / 200.0;
                let (x, _) = arc.eval(t).unwrap();
                let rhs = -100.0 * x.x1.signum() - x.x2.abs() * x.x2 / x.x1.abs();
                let residual = arc.x2_rate(t) - rhs;
                assert!(residual.abs() < 1e-9 * 100.0, "{x0:?} t={t} r={residual}");
            }
        }
    }
}
