//! Lyapunov machinery for the perturbed closed loop.
//!
//! The candidate used for the modified law is
//!
//! ```text
//! V(x) = 1/2 xi^T [[2(gamma - D - eta), eps(x)], [eps(x), 1]] xi,
//! xi = (sqrt|x1| sgn x1, x2),   eps(x) = epsilon if x1 x2 < 0, else 0
//! ```
//!
//! positive definite for `epsilon < sqrt(2(gamma - D - eta))` and continuous
//! because the coupling vanishes on both axes. The older candidate keeps the
//! coupling everywhere and uses `2 gamma` on the diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::sgn;
use crate::error::{Error, Result};
use crate::model::{State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub eta: f64,
    pub epsilon: f64,
}

impl LyapunovParams {
    /// Checks `epsilon` in `(0, sqrt(2(gamma - D - eta)))`.
    pub fn new(gamma: f64, d: f64, eta: f64, epsilon: f64) -> Result<Self> {
        if gamma.is_nan() || gamma <= d + eta || eta <= 0.0 {
            return Err(Error::PreconditionViolated(format!(
                "need eta > 0 and gamma > D + eta (gamma = {gamma}, D = {d}, eta = {eta})"
            )));
        }
        let hi = positive_definite_bound(gamma, d, eta);
        if !(epsilon > 0.0 && epsilon < hi) {
            return Err(Error::EpsilonOutOfRange {
                epsilon,
                lo: 0.0,
                hi,
            });
        }
        Ok(LyapunovParams {
            gamma,
            d,
            eta,
            epsilon,
        })
    }

    fn diagonal(&self) -> f64 {
        2.0 * (self.gamma - self.d - self.eta)
    }
}

/// Upper bound on `epsilon` for positive definiteness of the new candidate.
pub fn positive_definite_bound(gamma: f64, d: f64, eta: f64) -> f64 {
    (2.0 * (gamma - d - eta)).max(0.0).sqrt()
}

/// Coupling used when the admissible interval is empty.
pub const FALLBACK_EPSILON: f64 = 0.6;

/// Midpoint of [`epsilon_interval`] when it exists; otherwise
/// [`FALLBACK_EPSILON`] (or half the positive-definiteness bound if that is
/// smaller). The flag reports whether the fallback was used.
pub fn default_epsilon(gamma: f64, d: f64, eta: f64) -> (f64, bool) {
    if let Ok(Some((lo, hi))) = epsilon_interval(gamma, d, eta) {
        return (0.5 * (lo + hi), false);
    }
    let bound = positive_definite_bound(gamma, d, eta);
    if FALLBACK_EPSILON < bound {
        (FALLBACK_EPSILON, true)
    } else {
        (0.5 * bound, true)
    }
}

/// `eta = 1e-3 max(1, D)`.
pub fn default_eta(d: f64) -> f64 {
    1e-3 * d.max(1.0)
}

pub fn xi(x: State) -> [f64; 2] {
    [x.x1.abs().sqrt() * f64::from(sgn(x.x1)), x.x2]
}

pub fn v_new(x: State, p: &LyapunovParams) -> f64 {
    let [a, b] = xi(x);
    let coupling = if x.x1 * x.x2 < 0.0 { p.epsilon } else { 0.0 };
    0.5 * (p.diagonal() * a * a + 2.0 * coupling * a * b + b * b)
}

pub fn v_old(x: State, gamma: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 2.0 / 3.0) {
        return Err(Error::EpsilonOutOfRange {
            epsilon,
            lo: 0.0,
            hi: 2.0 / 3.0,
        });
    }
    let [a, b] = xi(x);
    Ok(0.5 * (2.0 * gamma * a * a + 2.0 * epsilon * a * b + b * b))
}

/// Energy-like function `gamma |x1| + x2^2 / 2`.
pub fn energy(x: State, gamma: f64) -> f64 {
    gamma * x.x1.abs() + 0.5 * x.x2 * x.x2
}

/// Gain threshold of the original law: `D^1.5 + D + 1/2`.
pub fn gamma_min_old(d: f64) -> f64 {
    d.powf(1.5) + d + 0.5
}

/// Gain threshold of the modified law: `2 sqrt(2) D^1.5 + D + 1/2`.
pub fn gamma_min_new(d: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * d.powf(1.5) + d + 0.5
}

/// Admissible `(lo, hi)` for the coupling parameter, `None` if empty.
pub fn epsilon_interval(gamma: f64, d: f64, eta: f64) -> Result<Option<(f64, f64)>> {
    if !(gamma > d + eta && gamma > 0.5 + d) {
        return Err(Error::PreconditionViolated(format!(
            "epsilon interval needs gamma > D + eta and gamma > D + 1/2 \
             (gamma = {gamma}, D = {d}, eta = {eta})"
        )));
    }
    let lo = (2.0 / 3.0) * (2.0 * d + eta).powf(1.5) / (gamma - 0.5 - d);
    let hi = (2.0_f64 / 3.0).min(positive_definite_bound(gamma, d, eta));
    Ok((lo < hi).then_some((lo, hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdotReport {
    /// `(V[k+1] - V[k]) / dt` for every consecutive pair.
    pub series: Vec<f64>,
    pub monotone: bool,
    /// Largest increase `V[k+1] - V[k]` over the checked pairs, 0 if none.
    pub max_positive_jump: f64,
    pub checked_pairs: usize,
    pub violations: usize,
}

/// Whether step `a -> b` is excluded from the decrease check: it touches or
/// crosses an axis, or touches the capture band.
fn exempt(traj: &Trajectory, a: &State, b: &State) -> bool {
    a.x1 * b.x1 <= 0.0 || a.x2 * b.x2 <= 0.0 || traj.in_capture_band(a) || traj.in_capture_band(b)
}

/// Finite-difference decrease check of `V_new` along a sampled trajectory.
pub fn vdot_along(traj: &Trajectory, p: &LyapunovParams) -> VdotReport {
    let pre = traj.pre_capture();
    let values: Vec<f64> = traj.samples.iter().map(|s| v_new(s.state, p)).collect();
    let series: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / traj.dt).collect();

    let mut max_jump = 0.0_f64;
    let mut checked = 0;
    let mut violations = 0;
    // pairs lying wholly before capture
    for k in 0..pre.len().saturating_sub(1) {
        let (a, b) = (&pre[k].state, &pre[k + 1].state);
        if exempt(traj, a, b) {
            continue;
        }
        checked += 1;
        let jump = values[k + 1] - values[k];
        max_jump = max_jump.max(jump);
        if jump > 1e-9 * values[k].max(1.0) {
            violations += 1;
        }
    }
    VdotReport {
        series,
        monotone: violations == 0,
        max_positive_jump: max_jump,
        checked_pairs: checked,
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRateReport {
    pub checked_pairs: usize,
    pub violations: usize,
    /// Largest `Vdot + eta |x2|` observed in the open U region.
    pub worst_excess: f64,
}

/// Checks `Vdot <= -eta |x2| + slack` on steps inside the open U region.
pub fn u_region_decay(traj: &Trajectory, p: &LyapunovParams, slack: f64) -> DecayRateReport {
    let pre = traj.pre_capture();
    let mut report = DecayRateReport {
        checked_pairs: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    for w in pre.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        if a.x1 * a.x2 <= 0.0 || b.x1 * b.x2 <= 0.0 || exempt(traj, a, b) {
            continue;
        }
        let vdot = (v_new(*b, p) - v_new(*a, p)) / traj.dt;
        let excess = vdot + p.eta * a.x2.abs();
        report.checked_pairs += 1;
        report.worst_excess = report.worst_excess.max(excess);
        if excess > slack {
            report.violations += 1;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub resolution: usize,
    /// `values[i][j] = V(x1_i, x2_j)`.
    pub values: Vec<Vec<f64>>,
}

/// `n` points from `lo` to `hi`; symmetric ranges hit zero exactly at odd `n`.
pub fn grid_axis(range: (f64, f64), n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = i as f64 / m;
            range.0 * (1.0 - w) + range.1 * w
        })
        .collect()
}

impl GridMap {
    pub fn x1_axis(&self) -> Vec<f64> {
        grid_axis(self.x1_range, self.resolution)
    }

    pub fn x2_axis(&self) -> Vec<f64> {
        grid_axis(self.x2_range, self.resolution)
    }

    /// Rows of `(x1, x2, V)`, x1-major.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let x1s = self.x1_axis();
        let x2s = self.x2_axis();
        x1s.into_iter().enumerate().flat_map(move |(i, a)| {
            let x2s = x2s.clone();
            x2s.into_iter()
                .enumerate()
                .map(move |(j, b)| (a, b, self.values[i][j]))
        })
    }
}

pub fn grid_map(
    p: &LyapunovParams,
    x1_range: (f64, f64),
    x2_range: (f64, f64),
    resolution: usize,
) -> Result<GridMap> {
    if resolution < 2 {
        return Err(Error::PreconditionViolated(format!(
            "grid resolution must be >= 2, got {resolution}"
        )));
    }
    if !(x1_range.0 < x1_range.1 && x2_range.0 < x2_range.1) {
        return Err(Error::PreconditionViolated(
            "grid ranges must be non-empty".into(),
        ));
    }
    let x1s = grid_axis(x1_range, resolution);
    let x2s = grid_axis(x2_range, resolution);
    let values = x1s
        .par_iter()
        .map(|&a| x2s.iter().map(|&b| v_new(State::new(a, b), p)).collect())
        .collect();
    Ok(GridMap {
        x1_range,
        x2_range,
        resolution,
        values,
    })
}
