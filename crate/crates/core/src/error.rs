use thiserror::Error;

use crate::model::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma = {gamma} must exceed the disturbance bound D = {bound}")]
    GammaTooSmall { gamma: f64, bound: f64 },

    #[error("disturbance sup-norm {sup} exceeds the declared bound D = {bound}")]
    DisturbanceExceedsBound { sup: f64, bound: f64 },

    #[error("non-finite value in `{0}`")]
    NonFinite(String),

    #[error("bad disturbance table: {0}")]
    BadTable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to parse `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("state ({x1}, {x2}) is not in U (x1*x2 >= 0)")]
    NotInU { x1: f64, x2: f64 },

    #[error("state ({x1}, {x2}) is not in C_a (x1*x2 < 0 and x2^2 < 2*gamma*|x1|)")]
    NotInCa { x1: f64, x2: f64 },

    #[error("state ({x1}, {x2}) lies in C but not in C_a: no closed-form solution")]
    NotCovered { x1: f64, x2: f64 },

    #[error("the origin has no parabolic arc")]
    DegenerateOrigin,

    #[error("t = {t} is outside the arc window [0, {end}]")]
    OutOfWindow { t: f64, end: f64 },

    #[error("original law is undefined on the x2-axis (x1 = 0, x2 = {x2})")]
    UndefinedOnAxis { x2: f64 },

    #[error("epsilon = {epsilon} is outside ({lo}, {hi})")]
    EpsilonOutOfRange { epsilon: f64, lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("trajectory never enters C")]
    NoCPhase,

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64, partial: Box<Trajectory> },

    #[error("{count} sweep run(s) diverged")]
    SweepDiverged { count: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteState { .. } | Error::SweepDiverged { .. } => 3,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
