//! Unit-annotated quantities and conversion to the internal hour-based units.
//!
//! Discharge is always m³/s. Every time is stored in hours and every rate in
//! 1/h; the source unit is kept alongside so outputs can report it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar with an explicit unit label, as found in model and run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: impl Into<String>) -> Self {
        Self {
            value,
            unit: unit.into(),
        }
    }
}

/// Hours per unit of the named time base.
pub fn hours_per(unit: &str) -> Option<f64> {
    match unit.trim() {
        "h" | "hr" | "hour" | "hours" => Some(1.0),
        "s" | "sec" | "second" | "seconds" => Some(1.0 / 3600.0),
        "min" | "minute" | "minutes" => Some(1.0 / 60.0),
        "d" | "day" | "days" => Some(24.0),
        "yr" | "year" | "years" => Some(24.0 * 365.25),
        _ => None,
    }
}

/// Converts a duration to hours.
pub fn time_to_hours(q: &Quantity, field: &str) -> Result<f64> {
    let f = hours_per(&q.unit)
        .ok_or_else(|| Error::Config(format!("field `{field}`: unknown time unit `{}`", q.unit)))?;
    Ok(q.value * f)
}

/// Converts a rate (`1/h`, `1/day`, `h^-1`, ...) to 1/h.
pub fn rate_to_per_hour(q: &Quantity, field: &str) -> Result<f64> {
    let base = rate_base(&q.unit)
        .ok_or_else(|| Error::Config(format!("field `{field}`: unknown rate unit `{}`", q.unit)))?;
    Ok(q.value / base)
}

fn rate_base(unit: &str) -> Option<f64> {
    let u = unit.trim();
    if let Some(rest) = u.strip_prefix("1/") {
        return hours_per(rest);
    }
    if let Some(rest) = u.strip_suffix("^-1") {
        return hours_per(rest);
    }
    None
}

/// Converts the jump-measure amplitude to a per-hour intensity.
///
/// Accepted labels are `(m3/s)^alpha/<time>`; only the time base matters
/// because discharge is fixed to m³/s.
pub fn amplitude_to_per_hour(q: &Quantity, field: &str) -> Result<f64> {
    let u = q.unit.trim();
    let base = u
        .strip_prefix("(m3/s)^alpha/")
        .and_then(hours_per)
        .ok_or_else(|| {
            Error::Config(format!(
                "field `{field}`: amplitude unit must look like `(m3/s)^alpha/h`, got `{u}`"
            ))
        })?;
    Ok(q.value / base)
}

/// Checks that a quantity carries one of the allowed labels and returns its value.
pub fn expect_unit(q: &Quantity, field: &str, allowed: &[&str]) -> Result<f64> {
    if allowed.iter().any(|a| *a == q.unit.trim()) {
        Ok(q.value)
    } else {
        Err(Error::Config(format!(
            "field `{field}`: unit `{}` not one of {allowed:?}",
            q.unit
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_in_days() {
        let p = Quantity::new(365.25, "day");
        assert_eq!(time_to_hours(&p, "P").unwrap(), 8766.0);
    }

    #[test]
    fn rates() {
        let b = Quantity::new(0.0344, "1/h");
        assert_eq!(rate_to_per_hour(&b, "B_pi").unwrap(), 0.0344);
        let e = Quantity::new(0.48, "1/day");
        assert!((rate_to_per_hour(&e, "eta_bar").unwrap() - 0.02).abs() < 1e-15);
        assert!(rate_to_per_hour(&Quantity::new(1.0, ""), "eta_bar").is_err());
    }

    #[test]
    fn amplitude() {
        let a = Quantity::new(0.24, "(m3/s)^alpha/day");
        assert!((amplitude_to_per_hour(&a, "a_nu").unwrap() - 0.01).abs() < 1e-15);
        assert!(amplitude_to_per_hour(&Quantity::new(1.0, "m3/s"), "a_nu").is_err());
    }
}
