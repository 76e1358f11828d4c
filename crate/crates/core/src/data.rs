//! Discharge series ingestion and empirical statistics.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StationaryStats;

/// Evenly sampled discharge record. Times are in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeSeries {
    /// First timestamp as it appeared in the file.
    pub start_time: String,
    pub step: f64,
    pub values: Vec<f64>,
    /// Missing spans that were filled by interpolation, as (from_h, to_h).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filled_gaps: Vec<(f64, f64)>,
}

impl DischargeSeries {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        let s = Self {
            start_time: "0".into(),
            step,
            values,
            filled_gaps: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::param("step", format!("must be > 0, got {}", self.step)));
        }
        if self.values.len() < 2 {
            return Err(Error::Degenerate("series needs at least 2 values".into()));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("value {} at index {i} is negative or not finite", self.values[i])));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How `load_series` treats missing timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Sampling step in hours; inferred as the smallest spacing when absent.
    pub step: Option<f64>,
    pub interpolate_gaps: bool,
    /// Longest gap (hours) that interpolation may bridge.
    pub max_gap_hours: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            step: None,
            interpolate_gaps: false,
            max_gap_hours: 6.0,
        }
    }
}

fn parse_time(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(h) = s.parse::<i64>() {
        return Some(h as f64);
    }
    let secs = if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        t.timestamp()
    } else if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        t.and_utc().timestamp()
    } else if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        t.and_utc().timestamp()
    } else if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M") {
        t.and_utc().timestamp()
    } else if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        d.and_hms_opt(0, 0, 0)?.and_utc().timestamp()
    } else {
        return None;
    };
    Some(secs as f64 / 3600.0)
}

/// Reads a `time,discharge` CSV. Time is an integer hour index or an ISO-8601 stamp.
pub fn load_series(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<DischargeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "time" || &headers[1] != "discharge" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `time,discharge`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut lines = Vec::new();
    let mut start_time = String::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let (ts, vs) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
        let t = parse_time(ts).ok_or_else(|| Error::Parse {
            line,
            msg: format!("unreadable timestamp `{ts}`"),
        })?;
        let v: f64 = vs.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("unreadable discharge `{vs}`"),
        })?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parse {
                line,
                msg: format!("discharge {v} is negative or not finite"),
            });
        }
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Parse {
                    line,
                    msg: format!("timestamp `{ts}` does not increase (duplicate or out of order)"),
                });
            }
        } else {
            start_time = ts.to_string();
        }
        times.push(t);
        values.push(v);
        lines.push(line);
    }
    if values.len() < 2 {
        return Err(Error::Degenerate(format!("{} has fewer than 2 rows", path.display())));
    }
    let step = match opts.step {
        Some(s) => s,
        None => times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
    };
    let slack = 1e-6 * step;
    let mut out = Vec::with_capacity(values.len());
    let mut gaps = Vec::new();
    out.push(values[0]);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let ratio = dt / step;
        if (ratio - ratio.round()).abs() * step > slack {
            return Err(Error::Parse {
                line: lines[k],
                msg: format!("spacing {dt} h is not a multiple of the step {step} h"),
            });
        }
        let missing = ratio.round() as usize - 1;
        if missing > 0 {
            gaps.push((times[k - 1], times[k]));
            for j in 1..=missing {
                let f = j as f64 / (missing + 1) as f64;
                out.push(values[k - 1] + f * (values[k] - values[k - 1]));
            }
        }
        out.push(values[k]);
    }
    if !gaps.is_empty() {
        let too_long: Vec<_> = gaps.iter().filter(|(a, b)| b - a - step > opts.max_gap_hours + slack).collect();
        if !opts.interpolate_gaps || !too_long.is_empty() {
            let list = if opts.interpolate_gaps { too_long } else { gaps.iter().collect() };
            let spans: Vec<String> = list.iter().map(|(a, b)| format!("({a} h, {b} h)")).collect();
            return Err(Error::Gap(format!("missing samples between {}", spans.join(", "))));
        }
    }
    let s = DischargeSeries {
        start_time,
        step,
        values: out,
        filled_gaps: gaps,
    };
    s.validate()?;
    Ok(s)
}

/// Population moments: mean, m₂, m₃/m₂^{3/2}, m₄/m₂² − 3.
pub fn empirical_moments(x: &[f64]) -> Result<StationaryStats> {
    if x.len() < 4 {
        return Err(Error::Degenerate(format!("need at least 4 samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) || m2 <= (1e-14 * mean.abs()).powi(2) {
        return Err(Error::Degenerate("sample variance is zero".into()));
    }
    Ok(StationaryStats {
        ave: mean,
        var: m2,
        skew: m3 / m2.powf(1.5),
        kurt: m4 / (m2 * m2) - 3.0,
        degenerate: false,
    })
}

/// Biased sample autocorrelation at lags 0..=max_lag (divides by N at every lag).
pub fn empirical_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 || 2 * max_lag >= x.len() {
        return Err(Error::param(
            "max_lag",
            format!("must satisfy 0 < max_lag < len/2 (len {})", x.len()),
        ));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>();
    if !(c0 > 0.0) {
        return Err(Error::Degenerate("sample variance is zero".into()));
    }
    let acf = (0..=max_lag)
        .into_par_iter()
        .map(|k| {
            let ck: f64 = d[..d.len() - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum();
            ck / c0
        })
        .collect();
    Ok(acf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinConfig {
    pub scale: BinScale,
    pub bins: usize,
    /// Histogram range; defaults to the sample range.
    pub range: Option<(f64, f64)>,
}

impl Default for BinConfig {
    fn default() -> Self {
        Self {
            scale: BinScale::Linear,
            bins: 50,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// ∫ density over all bins.
    pub fn mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// Total-variation distance to a histogram on the same edges.
    pub fn total_variation(&self, other: &Histogram) -> Result<f64> {
        if self.edges != other.edges {
            return Err(Error::Config("histograms have different bin edges".into()));
        }
        Ok(0.5
            * self
                .densities
                .iter()
                .zip(&other.densities)
                .zip(self.edges.windows(2))
                .map(|((a, b), e)| (a - b).abs() * (e[1] - e[0]))
                .sum::<f64>())
    }
}

/// Normalized density histogram. Samples outside an explicit range are dropped
/// and the remainder renormalized.
pub fn empirical_pdf(x: &[f64], cfg: &BinConfig) -> Result<Histogram> {
    if cfg.bins == 0 {
        return Err(Error::param("bins", "must be >= 1"));
    }
    let (lo, hi) = match cfg.range {
        Some(r) => r,
        None => x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
    };
    if !(hi > lo) {
        return Err(Error::Degenerate("series has fewer than 2 distinct values".into()));
    }
    let edges: Vec<f64> = match cfg.scale {
        BinScale::Linear => (0..=cfg.bins)
            .map(|i| lo + (hi - lo) * i as f64 / cfg.bins as f64)
            .collect(),
        BinScale::Log => {
            if !(lo > 0.0) {
                return Err(Error::Config(format!("log bins need a positive lower edge, got {lo}")));
            }
            let (l0, l1) = (lo.ln(), hi.ln());
            (0..=cfg.bins)
                .map(|i| (l0 + (l1 - l0) * i as f64 / cfg.bins as f64).exp())
                .collect()
        }
    };
    let mut counts = vec![0u64; cfg.bins];
    let mut total = 0u64;
    for &v in x {
        if v < lo || v > hi {
            continue;
        }
        let pos = match cfg.scale {
            BinScale::Linear => (v - lo) / (hi - lo),
            BinScale::Log => (v / lo).ln() / (hi / lo).ln(),
        };
        let mut i = ((pos * cfg.bins as f64) as usize).min(cfg.bins - 1);
        // guard against rounding at bin boundaries
        while i > 0 && v < edges[i] {
            i -= 1;
        }
        while i + 1 < cfg.bins && v >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Degenerate("no samples inside the histogram range".into()));
    }
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total as f64 * (e[1] - e[0])))
        .collect();
    Ok(Histogram { edges, densities })
}

/// Writes `lag_h,acf`.
pub fn write_acf_csv(path: impl AsRef<Path>, acf: &[f64], step: f64) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lag_h", "acf"])?;
    for (k, v) in acf.iter().enumerate() {
        w.write_record([(k as f64 * step).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `bin_lo,bin_hi,density`.
pub fn write_histogram_csv(path: impl AsRef<Path>, h: &Histogram) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_lo", "bin_hi", "density"])?;
    for (d, e) in h.densities.iter().zip(h.edges.windows(2)) {
        w.write_record([e[0].to_string(), e[1].to_string(), d.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}
