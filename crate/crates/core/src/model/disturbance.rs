use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of the matched disturbance `d(t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * sin(2 pi frequency_hz t + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise constant per integration step, uniform in `[-|bound|, |bound|]`.
    /// A negative bound yields the exact negation of the positive-bound signal.
    UniformRandom {
        bound: f64,
        seed: u64,
    },
    /// Zero-order hold of `values[i]` from `times[i]` on; zero before `times[0]`.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl DisturbanceSpec {
    /// Declared sup-norm of the produced signal.
    pub fn sup_norm(&self) -> f64 {
        match self {
            DisturbanceSpec::Zero => 0.0,
            DisturbanceSpec::Constant { value } => value.abs(),
            DisturbanceSpec::Sinusoid { amplitude, .. } => amplitude.abs(),
            DisturbanceSpec::UniformRandom { bound, .. } => bound.abs(),
            DisturbanceSpec::Table { values, .. } => {
                values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// The signal `-d(t)`, bit-exact.
    pub fn negated(&self) -> DisturbanceSpec {
        match self.clone() {
            DisturbanceSpec::Zero => DisturbanceSpec::Zero,
            DisturbanceSpec::Constant { value } => DisturbanceSpec::Constant { value: -value },
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => DisturbanceSpec::Sinusoid {
                amplitude: -amplitude,
                frequency_hz,
                phase,
            },
            DisturbanceSpec::UniformRandom { bound, seed } => DisturbanceSpec::UniformRandom {
                bound: -bound,
                seed,
            },
            DisturbanceSpec::Table { times, values } => DisturbanceSpec::Table {
                times,
                values: values.into_iter().map(|v| -v).collect(),
            },
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite(format!("disturbance.{name}")))
            }
        };
        match self {
            DisturbanceSpec::Zero => Ok(()),
            DisturbanceSpec::Constant { value } => finite("value", *value),
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => {
                finite("amplitude", *amplitude)?;
                finite("frequency_hz", *frequency_hz)?;
                finite("phase", *phase)
            }
            DisturbanceSpec::UniformRandom { bound, .. } => finite("bound", *bound),
            DisturbanceSpec::Table { times, values } => {
                if times.len() != values.len() {
                    return Err(Error::BadTable(format!(
                        "{} times but {} values",
                        times.len(),
                        values.len()
                    )));
                }
                if times.is_empty() {
                    return Err(Error::BadTable("empty table".into()));
                }
                for (i, (t, v)) in times.iter().zip(values).enumerate() {
                    finite(&format!("times[{i}]"), *t)?;
                    finite(&format!("values[{i}]"), *v)?;
                }
                if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(Error::BadTable(format!(
                        "times not strictly increasing at index {}",
                        i + 1
                    )));
                }
                Ok(())
            }
        }
    }

    /// Value of a deterministic variant at time `t`. Random variants need a
    /// [`crate::simulator::DisturbanceSource`] and return `None` here.
    pub fn deterministic_value(&self, t: f64) -> Option<f64> {
        match self {
            DisturbanceSpec::Zero => Some(0.0),
            DisturbanceSpec::Constant { value } => Some(*value),
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => Some(amplitude * (2.0 * PI * frequency_hz * t + phase).sin()),
            DisturbanceSpec::Table { times, values } => {
                let n = times.partition_point(|&tk| tk <= t);
                Some(if n == 0 { 0.0 } else { values[n - 1] })
            }
            DisturbanceSpec::UniformRandom { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_norms() {
        assert_eq!(
            DisturbanceSpec::Sinusoid {
                amplitude: -150.0,
                frequency_hz: 10.0,
                phase: 0.0
            }
            .sup_norm(),
            150.0
        );
        let table = DisturbanceSpec::Table {
            times: vec![0.0, 1.0],
            values: vec![5.0, -7.0],
        };
        assert_eq!(table.sup_norm(), 7.0);
    }

    #[test]
    fn table_hold() {
        let table = DisturbanceSpec::Table {
            times: vec![0.0, 1.0],
            values: vec![5.0, -5.0],
        };
        assert_eq!(table.deterministic_value(0.5), Some(5.0));
        assert_eq!(table.deterministic_value(1.0), Some(-5.0));
        assert_eq!(table.deterministic_value(-0.1), Some(0.0));
    }

    #[test]
    fn table_must_increase() {
        let table = DisturbanceSpec::Table {
            times: vec![0.0, 1.0, 1.0],
            values: vec![1.0, 2.0, 3.0],
        };
        assert!(matches!(table.check(), Err(Error::BadTable(_))));
        let short = DisturbanceSpec::Table {
            times: vec![0.0],
            values: vec![1.0, 2.0],
        };
        assert!(matches!(short.check(), Err(Error::BadTable(_))));
    }

    #[test]
    fn parses_tagged_json() {
        let d: DisturbanceSpec =
            serde_json::from_str(r#"{"type":"sinusoid","amplitude":100,"frequency_hz":10}"#)
                .unwrap();
        assert_eq!(
            d,
            DisturbanceSpec::Sinusoid {
                amplitude: 100.0,
                frequency_hz: 10.0,
                phase: 0.0
            }
        );
        let v = d.deterministic_value(0.025).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
    }
}
