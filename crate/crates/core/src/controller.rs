//! Pointwise evaluation of the modified quasi-continuous law, the original
//! (everywhere-damped) comparison law, and state-space classification.
//!
//! The modified law is
//!
//! ```text
//! u = -gamma sgn(x1) - delta,   delta = |x2| x2 / |x1|  if x1 x2 < 0, else 0
//! ```
//!
//! so no damping acts in quadrants I and III. `sgn(0) = 0`: on the x2-axis
//! the law outputs `u = 0` for that instant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, Quadrant, Region, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub u: f64,
    pub delta: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    #[default]
    Modified,
    Original,
}

impl Law {
    pub fn evaluate(self, x: State, gamma: f64, delta_cap: f64) -> Result<ControlOutput> {
        match self {
            Law::Modified => Ok(control_modified(x, gamma, delta_cap)),
            Law::Original => control_original(x, gamma, delta_cap),
        }
    }
}

impl std::str::FromStr for Law {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "modified" => Ok(Law::Modified),
            "original" => Ok(Law::Original),
            other => Err(format!("unknown law `{other}` (modified|original)")),
        }
    }
}

pub fn sgn(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn nonlinear_damping(x: State, delta_cap: f64) -> (f64, bool) {
    let raw = x.x2.abs() * x.x2 / x.x1.abs();
    if raw.abs() > delta_cap {
        (delta_cap.copysign(raw), true)
    } else {
        (raw, false)
    }
}

/// Damping term: active only in C, sign-preserving clamp at `delta_cap`.
pub fn damping_delta(x: State, delta_cap: f64) -> (f64, bool) {
    if x.x1 * x.x2 >= 0.0 {
        (0.0, false)
    } else {
        nonlinear_damping(x, delta_cap)
    }
}

pub fn control_modified(x: State, gamma: f64, delta_cap: f64) -> ControlOutput {
    let (delta, clamped) = damping_delta(x, delta_cap);
    ControlOutput {
        u: -gamma * f64::from(sgn(x.x1)) - delta,
        delta,
        clamped,
    }
}

/// Original law: damping in all quadrants, undefined on the x2-axis off the origin.
pub fn control_original(x: State, gamma: f64, delta_cap: f64) -> Result<ControlOutput> {
    if x.x1 == 0.0 {
        if x.x2 == 0.0 {
            return Ok(ControlOutput {
                u: 0.0,
                delta: 0.0,
                clamped: false,
            });
        }
        return Err(Error::UndefinedOnAxis { x2: x.x2 });
    }
    let (delta, clamped) = nonlinear_damping(x, delta_cap);
    Ok(ControlOutput {
        u: -gamma * f64::from(sgn(x.x1)) - delta,
        delta,
        clamped,
    })
}

pub fn classify(x: State, gamma: f64) -> Region {
    let quadrant = match (sgn(x.x1), sgn(x.x2)) {
        (0, 0) => Quadrant::Origin,
        (0, _) => Quadrant::AxisX2,
        (_, 0) => Quadrant::AxisX1,
        (1, 1) => Quadrant::I,
        (-1, 1) => Quadrant::II,
        (-1, -1) => Quadrant::III,
        _ => Quadrant::IV,
    };
    let domain = if x.in_u() { Domain::U } else { Domain::C };
    Region {
        domain,
        quadrant,
        in_ca: x.in_ca(gamma),
    }
}
