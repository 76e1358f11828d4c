//! Published station parameter sets and data statistics.
//!
//! Values are as printed; see the README for the known inconsistency between
//! the Station Y generalized-tempered-stable row and its listed statistics.

use serde::{Deserialize, Serialize};

use crate::model::{JumpMeasureParams, MixingParams, StationaryStats, SupOUModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Station {
    Y,
    D,
    U,
}

impl Station {
    pub const ALL: [Station; 3] = [Station::Y, Station::D, Station::U];

    pub fn name(&self) -> &'static str {
        match self {
            Station::Y => "Y",
            Station::D => "D",
            Station::U => "U",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Y" => Some(Station::Y),
            "D" => Some(Station::D),
            "U" => Some(Station::U),
            _ => None,
        }
    }
}

/// Identified model with the generalized tempered stable jump measure (p_ν = 2).
pub fn station_model(s: Station) -> SupOUModel {
    let (b_pi, alpha_pi, x_floor, alpha_nu, a_nu, b_nu) = match s {
        Station::Y => (0.0344, 2.17, 1.28, 0.408, 1.27e-2, 2.33e-6),
        Station::D => (0.0201, 2.97, 1.00, 0.525, 5.18e-3, 7.73e-6),
        Station::U => (0.0315, 2.53, 0.00, 0.705, 1.34e-2, 4.59e-6),
    };
    SupOUModel {
        x_floor,
        jump: JumpMeasureParams {
            a_nu,
            b_nu,
            p_nu: 2.0,
            alpha_nu,
        },
        mixing: MixingParams { b_pi, alpha_pi },
    }
}

/// Identified model with the classical tempered stable jump measure (p_ν = 1).
pub fn station_model_tempered(s: Station) -> SupOUModel {
    let base = station_model(s);
    let (alpha_nu, a_nu, b_nu) = match s {
        Station::Y => (0.668, 2.43e-2, 3.43e-3),
        Station::D => (0.102, 7.49e-3, 1.85e-3),
        Station::U => (0.4601, 5.176e-3, 9.155e-3),
    };
    SupOUModel {
        jump: JumpMeasureParams {
            a_nu,
            b_nu,
            p_nu: 1.0,
            alpha_nu,
        },
        ..base
    }
}

/// Empirical statistics of the hourly discharge records (Ave, Std, Skew, Kurt).
pub fn station_data_stats(s: Station) -> StationaryStats {
    match s {
        Station::Y => StationaryStats::from_std(12.1, 22.6, 12.8, 243.0),
        Station::D => StationaryStats::from_std(5.13, 15.4, 11.9, 195.0),
        Station::U => StationaryStats::from_std(5.40, 16.6, 12.7, 254.0),
    }
}

/// Reported least-squares errors of the two fitted families (p_ν = 2, p_ν = 1).
pub fn station_fit_errors(s: Station) -> (f64, f64) {
    match s {
        Station::Y => (0.00218, 0.0141),
        Station::D => (0.00238, 0.00885),
        Station::U => (0.000107, 0.00517),
    }
}

/// Target discharge used in the application problem, m³/s.
pub const APPLICATION_TARGET: f64 = 20.0;

/// Water temperature fit W_s = mean + cos_coef·cos(2πs/P) + sin_coef·sin(2πs/P), °C.
pub const TEMPERATURE_MEAN: f64 = 14.36;
pub const TEMPERATURE_COS: f64 = -7.70;
pub const TEMPERATURE_SIN: f64 = -4.00;
pub const TEMPERATURE_UPPER: f64 = 25.0;
pub const TEMPERATURE_LOWER: f64 = 5.0;
pub const TEMPERATURE_FLOOR: f64 = 1e-4;

/// One year, h.
pub const YEAR_HOURS: f64 = 8766.0;

/// Fraction of Std² defining the performance guarantee on the frontier.
pub const GUARANTEE_FACTOR: f64 = 0.05;
