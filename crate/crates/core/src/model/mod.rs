//! Domain types shared by every other module: plant state, region taxonomy,
//! disturbance descriptions, scenario configuration and trajectory records.

mod config;
mod disturbance;

pub use config::{
    validate_config, CaptureSpec, ControlParams, Integrator, PostCapture, Provenance, ScenarioFile,
    SimConfig,
};
pub use disturbance::DisturbanceSpec;

use serde::{Deserialize, Serialize};

/// Plant state `(x1, x2)`: position-like and velocity-like coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct State {
    pub x1: f64,
    pub x2: f64,
}

impl State {
    pub const ORIGIN: State = State { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        State { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn is_origin(&self) -> bool {
        self.x1 == 0.0 && self.x2 == 0.0
    }

    /// `x1 * x2 >= 0`, the undamped set.
    pub fn in_u(&self) -> bool {
        self.x1 * self.x2 >= 0.0
    }

    /// Convergence set C plus the C_a bound `x2^2 < 2 gamma |x1|`.
    pub fn in_ca(&self, gamma: f64) -> bool {
        !self.in_u() && self.x2 * self.x2 < 2.0 * gamma * self.x1.abs()
    }

    pub fn norm_inf(&self) -> f64 {
        self.x1.abs().max(self.x2.abs())
    }
}

impl std::ops::Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.x1, -self.x2)
    }
}

impl From<[f64; 2]> for State {
    fn from(v: [f64; 2]) -> Self {
        State::new(v[0], v[1])
    }
}

impl From<State> for [f64; 2] {
    fn from(s: State) -> Self {
        [s.x1, s.x2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    U,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    I,
    II,
    III,
    IV,
    AxisX1,
    AxisX2,
    Origin,
}

impl Quadrant {
    /// Quadrant of `-x`.
    pub fn mirrored(self) -> Quadrant {
        match self {
            Quadrant::I => Quadrant::III,
            Quadrant::II => Quadrant::IV,
            Quadrant::III => Quadrant::I,
            Quadrant::IV => Quadrant::II,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub domain: Domain,
    pub quadrant: Quadrant,
    /// Only meaningful for `Domain::C`.
    pub in_ca: bool,
}

impl Region {
    /// Short label used in CSV output, e.g. `C-IV`.
    pub fn label(&self) -> &'static str {
        match (self.domain, self.quadrant) {
            (_, Quadrant::Origin) => "U-origin",
            (_, Quadrant::AxisX1) => "U-axis_x1",
            (_, Quadrant::AxisX2) => "U-axis_x2",
            (Domain::U, Quadrant::I) => "U-I",
            (Domain::U, Quadrant::III) => "U-III",
            (Domain::C, Quadrant::II) => "C-II",
            (Domain::C, Quadrant::IV) => "C-IV",
            // unreachable for classified regions, kept total
            (Domain::U, _) => "U",
            (Domain::C, _) => "C",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: State,
    pub u: f64,
    pub u_filt: f64,
    pub d: f64,
    pub region: Region,
    pub v_new: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    EnterU,
    EnterC,
    Capture,
    DeltaClamped,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<Event>,
    pub captured_at: Option<f64>,
    pub dt: f64,
    pub capture_eps1: f64,
    pub capture_eps2: f64,
}

impl Trajectory {
    pub fn first_event(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == kind)
    }

    pub fn in_capture_band(&self, x: &State) -> bool {
        x.x1.abs() <= self.capture_eps1 && x.x2.abs() <= self.capture_eps2
    }

    /// Samples strictly before the capture instant (all samples if never captured).
    pub fn pre_capture(&self) -> &[TrajectorySample] {
        match self.captured_at {
            Some(tc) => {
                let n = self.samples.partition_point(|s| s.t < tc);
                &self.samples[..n]
            }
            None => &self.samples,
        }
    }

    pub fn max_abs_disturbance(&self) -> f64 {
        self.samples.iter().map(|s| s.d.abs()).fold(0.0, f64::max)
    }

    /// Returns the trajectory with every state, control and disturbance negated.
    pub fn negated(&self) -> Trajectory {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.state = -s.state;
            s.u = -s.u;
            s.u_filt = -s.u_filt;
            s.d = -s.d;
            s.region.quadrant = s.region.quadrant.mirrored();
        }
        out
    }
}
