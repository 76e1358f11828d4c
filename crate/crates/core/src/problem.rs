//! Long-run LQ control problem: periodic target, state weight and control weight.
//!
//! The running cost is
//!
//! ```text
//! w′(s) (X_s − X̂_s)² / 2 + w u_s² / 2
//! ```

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SupOUModel;
use crate::presets;

/// Periodic target discharge X̂(t), m³/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Constant { value: f64 },
    /// mean + cos_amp·cos(2πt/P) + sin_amp·sin(2πt/P)
    Sinusoid { mean: f64, cos_amp: f64, sin_amp: f64 },
    /// Samples at `times` (h, within [0, P)), linearly interpolated with wrap-around.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Target {
    pub fn eval(&self, t: f64, period: f64) -> f64 {
        match self {
            Target::Constant { value } => *value,
            Target::Sinusoid { mean, cos_amp, sin_amp } => {
                let (s, c) = (TAU * t / period).sin_cos();
                mean + cos_amp * c + sin_amp * s
            }
            Target::Tabulated { times, values } => periodic_interp(times, values, t, period),
        }
    }

    fn validate(&self, period: f64) -> Result<()> {
        if let Target::Tabulated { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(Error::Config("tabulated target needs equal, non-empty times/values".into()));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 || *times.last().unwrap() >= period {
                return Err(Error::Config("tabulated target times must increase within [0, P)".into()));
            }
        }
        Ok(())
    }
}

fn periodic_interp(times: &[f64], values: &[f64], t: f64, period: f64) -> f64 {
    let n = times.len();
    if n == 1 {
        return values[0];
    }
    let t = t.rem_euclid(period);
    let idx = times.partition_point(|&x| x <= t);
    let (t0, v0, t1, v1) = if idx == 0 {
        (times[n - 1] - period, values[n - 1], times[0], values[0])
    } else if idx == n {
        (times[n - 1], values[n - 1], times[0] + period, values[0])
    } else {
        (times[idx - 1], values[idx - 1], times[idx], values[idx])
    };
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Bell-shaped weight driven by a sinusoidal water temperature
///
/// ```text
/// W_t  = mean + shift + cos_coef·cos(2πt/P) + sin_coef·sin(2πt/P)
/// w′_t = floor + 4 (upper − lower)^{−2} max{(upper − W_t)(W_t − lower), 0}
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureWeight {
    pub mean: f64,
    pub cos_coef: f64,
    pub sin_coef: f64,
    pub upper: f64,
    pub lower: f64,
    pub floor: f64,
    /// Uniform warming (°C) added to W_t.
    #[serde(default)]
    pub shift: f64,
}

impl Default for TemperatureWeight {
    fn default() -> Self {
        Self {
            mean: presets::TEMPERATURE_MEAN,
            cos_coef: presets::TEMPERATURE_COS,
            sin_coef: presets::TEMPERATURE_SIN,
            upper: presets::TEMPERATURE_UPPER,
            lower: presets::TEMPERATURE_LOWER,
            floor: presets::TEMPERATURE_FLOOR,
            shift: 0.0,
        }
    }
}

impl TemperatureWeight {
    pub fn temperature(&self, t: f64, period: f64) -> f64 {
        let (s, c) = (TAU * t / period).sin_cos();
        self.mean + self.shift + self.cos_coef * c + self.sin_coef * s
    }

    pub fn eval(&self, t: f64, period: f64) -> f64 {
        let w = self.temperature(t, period);
        let span = self.upper - self.lower;
        self.floor + 4.0 / (span * span) * ((self.upper - w) * (w - self.lower)).max(0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.upper > self.lower) {
            return Err(Error::Config("temperature bounds need upper > lower".into()));
        }
        if !(self.floor > 0.0) {
            return Err(Error::Config("temperature weight floor must be > 0".into()));
        }
        Ok(())
    }
}

/// State weight w′(t) > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateWeight {
    Constant { value: f64 },
    Temperature(TemperatureWeight),
}

impl StateWeight {
    pub fn unit() -> Self {
        StateWeight::Constant { value: 1.0 }
    }

    pub fn eval(&self, t: f64, period: f64) -> f64 {
        match self {
            StateWeight::Constant { value } => *value,
            StateWeight::Temperature(tw) => tw.eval(t, period),
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, StateWeight::Constant { value } if *value == 1.0)
    }
}

/// Control problem on the lifted supOU dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    /// Period P, h.
    pub period: f64,
    pub target: Target,
    pub state_weight: StateWeight,
    /// Control weight w.
    pub w: f64,
    pub model: SupOUModel,
}

impl ControlProblem {
    pub fn new(model: SupOUModel, period: f64, target: Target, state_weight: StateWeight, w: f64) -> Result<Self> {
        let p = Self {
            period,
            target,
            state_weight,
            w,
            model,
        };
        p.validate()?;
        Ok(p)
    }

    /// Problem used for the station application: X̂ = 20 m³/s, temperature weight.
    pub fn application(model: SupOUModel, w: f64, temperature_shift: f64) -> Result<Self> {
        Self::new(
            model,
            presets::YEAR_HOURS,
            Target::Constant {
                value: presets::APPLICATION_TARGET,
            },
            StateWeight::Temperature(TemperatureWeight {
                shift: temperature_shift,
                ..TemperatureWeight::default()
            }),
            w,
        )
    }

    pub fn with_w(&self, w: f64) -> Self {
        Self { w, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Config(format!("period must be > 0, got {}", self.period)));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::Config(format!("control weight w must be > 0, got {}", self.w)));
        }
        self.target.validate(self.period)?;
        if let StateWeight::Temperature(tw) = &self.state_weight {
            tw.validate()?;
        }
        // sample both periodic functions densely enough to catch sign problems
        for k in 0..1024 {
            let t = self.period * k as f64 / 1024.0;
            let xbar = self.xbar(t);
            if !(xbar > 0.0) {
                return Err(Error::Config(format!(
                    "target must exceed the floor {} (X̂ − X̲ = {xbar} at t = {t} h)",
                    self.model.x_floor
                )));
            }
            let wp = self.wprime(t);
            if !(wp > 0.0) {
                return Err(Error::Config(format!("state weight must be > 0 (got {wp} at t = {t} h)")));
            }
        }
        Ok(())
    }

    /// X̄_t = X̂_t − X̲.
    pub fn xbar(&self, t: f64) -> f64 {
        self.target.eval(t, self.period) - self.model.x_floor
    }

    pub fn wprime(&self, t: f64) -> f64 {
        self.state_weight.eval(t, self.period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_range() {
        let tw = TemperatureWeight::default();
        for k in 0..1000 {
            let v = tw.eval(8766.0 * k as f64 / 1000.0, 8766.0);
            assert!(v >= tw.floor && v <= 1.0 + tw.floor);
        }
        // W = 15 maximizes the bell
        let peak = TemperatureWeight {
            mean: 15.0,
            cos_coef: 0.0,
            sin_coef: 0.0,
            ..tw
        };
        assert!((peak.eval(0.0, 1.0) - 1.0 - tw.floor).abs() < 1e-15);
    }

    #[test]
    fn tabulated_wraps() {
        let t = Target::Tabulated {
            times: vec![0.0, 5.0],
            values: vec![1.0, 3.0],
        };
        assert_eq!(t.eval(2.5, 10.0), 2.0);
        assert_eq!(t.eval(7.5, 10.0), 2.0);
        assert_eq!(t.eval(12.5, 10.0), 2.0);
    }
}
