//! Two-step calibration: ACF fit for the mixing measure, then moment matching
//! for the jump measure.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{empirical_acf, empirical_moments, DischargeSeries};
use crate::error::{Error, Result};
use crate::model::{acf, stationary_stats, JumpMeasureParams, MixingParams, StationaryStats, SupOUModel};
use crate::simulate::path_rng;

/// Nelder–Mead outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// Simplex diameter at exit.
    pub diameter: f64,
    pub converged: bool,
}

/// Downhill simplex with standard coefficients. Stops when the largest vertex
/// distance from the best vertex drops below `tol`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> NmResult {
    let d = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let diameter = |pts: &[Vec<f64>]| {
        pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    };
    let mut it = 0;
    loop {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let diam = diameter(&pts);
        if diam <= tol || it >= max_iter {
            return NmResult {
                x: pts[0].clone(),
                f: vals[0],
                iterations: it,
                diameter: diam,
                converged: diam <= tol,
            };
        }
        it += 1;
        let centroid: Vec<f64> = (0..d).map(|j| pts[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (pts[d][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[d] {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < vals[d].min(fr) {
            pts[d] = xc;
            vals[d] = fc;
            continue;
        }
        for i in 1..=d {
            pts[i] = (0..d).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = eval(&pts[i]);
        }
    }
}

/// Repeats Nelder–Mead from its own optimum until the value stops improving,
/// which guards against a simplex collapsing away from the minimum.
fn nelder_mead_restarted<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], tol: f64, max_iter: usize) -> NmResult {
    let mut best = nelder_mead(f, x0, 1.0, tol, max_iter);
    let mut total = best.iterations;
    for step in [0.1, 0.01] {
        let next = nelder_mead(f, &best.x, step, tol, max_iter);
        total += next.iterations;
        let improved = next.f < best.f;
        if improved {
            best = next;
        }
        if !improved || best.f == 0.0 {
            break;
        }
    }
    best.iterations = total;
    best
}

/// Mixing-measure fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfFit {
    pub mixing: MixingParams,
    pub sse: f64,
    /// α_π ≤ 2: the reciprocal-moment variance bound used by the lift no longer holds.
    pub alpha_le_two: bool,
    pub iterations: usize,
}

/// Settings of the ACF fit; lags are in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcfFitOptions {
    pub max_lag: usize,
    /// Spacing between successive acf entries.
    pub step: f64,
    pub init: (f64, f64),
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AcfFitOptions {
    fn default() -> Self {
        Self {
            max_lag: 720,
            step: 1.0,
            init: (0.05, 2.5),
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

/// Least-squares fit of (1 + Bτ)^{−(α−1)} to `emp_acf[1..=max_lag]`, with
/// search in (ln B, ln(α − 1)).
pub fn fit_acf(emp_acf: &[f64], opts: &AcfFitOptions) -> Result<AcfFit> {
    if emp_acf.is_empty() || (emp_acf[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Config("empirical acf must start with 1 at lag 0".into()));
    }
    let max_lag = opts.max_lag.min(emp_acf.len() - 1);
    if max_lag < 10 {
        return Err(Error::Config(format!("need at least 10 lags, got {max_lag}")));
    }
    let sse = |b: f64, a: f64| -> f64 {
        let m = MixingParams { b_pi: b, alpha_pi: a };
        (1..=max_lag)
            .map(|k| {
                let r = acf(&m, k as f64 * opts.step) - emp_acf[k];
                r * r
            })
            .sum()
    };
    let obj = |x: &[f64]| sse(x[0].exp(), 1.0 + x[1].exp());
    let mut best: Option<NmResult> = None;
    for (b0, a0) in [opts.init, (opts.init.0 * 0.1, opts.init.1), (opts.init.0 * 10.0, 1.0 + 0.5 * (opts.init.1 - 1.0))] {
        let x0 = [b0.ln(), (a0 - 1.0).max(1e-3).ln()];
        let r = nelder_mead_restarted(&obj, &x0, opts.tol, opts.max_iter);
        if best.as_ref().is_none_or(|b| r.f < b.f) {
            best = Some(r);
        }
    }
    let r = best.expect("at least one start");
    let (b, a) = (r.x[0].exp(), 1.0 + r.x[1].exp());
    // a flat acf drives the decay parameters to the edge of the domain
    if !r.converged || b < 1e-10 || a - 1.0 < 1e-8 || b > 1e8 {
        return Err(Error::NonConvergence {
            what: "acf fit (best point at the parameter boundary)",
            iterations: r.iterations,
            last_change: r.diameter,
        });
    }
    Ok(AcfFit {
        mixing: MixingParams::new(b, a)?,
        sse: r.f,
        alpha_le_two: a <= 2.0,
        iterations: r.iterations,
    })
}

/// Sum of squared relative errors in (Ave, Std, Skew, Kurt), data in the denominators.
pub fn moment_objective(model: &StationaryStats, data: &StationaryStats) -> Result<f64> {
    let pairs = [
        ("Ave", model.ave, data.ave),
        ("Std", model.std(), data.std()),
        ("Skew", model.skew, data.skew),
        ("Kurt", model.kurt, data.kurt),
    ];
    let mut sum = 0.0;
    for (name, m, d) in pairs {
        if d == 0.0 {
            return Err(Error::Domain(format!("data {name} is zero")));
        }
        let r = (m - d) / d;
        sum += r * r;
    }
    Ok(sum)
}

/// Lévy-measure fit settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyFitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Box for random starts: (ln a range, ln b range).
    pub ln_a_range: (f64, f64),
    pub ln_b_range: (f64, f64),
}

impl Default for LevyFitOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 0,
            tol: 1e-10,
            max_iter: 20_000,
            ln_a_range: (-10.0, 1.0),
            ln_b_range: (-16.0, 0.0),
        }
    }
}

/// α_ν is searched through a logistic map onto (−2, 1).
const ALPHA_LO: f64 = -2.0;
const ALPHA_HI: f64 = 1.0;

fn alpha_of(t: f64) -> f64 {
    ALPHA_LO + (ALPHA_HI - ALPHA_LO) / (1.0 + (-t).exp())
}

fn alpha_to_t(a: f64) -> f64 {
    let s = (a - ALPHA_LO) / (ALPHA_HI - ALPHA_LO);
    (s / (1.0 - s)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub start: [f64; 3],
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyFit {
    pub jump: JumpMeasureParams,
    pub objective: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartTrace>,
}

/// Point in search coordinates for known parameters, useful as an extra start.
pub fn levy_search_point(jump: &JumpMeasureParams) -> [f64; 3] {
    [jump.a_nu.ln(), jump.b_nu.ln(), alpha_to_t(jump.alpha_nu)]
}

fn levy_objective(x: &[f64], data: &StationaryStats, mixing: MixingParams, x_floor: f64, p_nu: f64) -> f64 {
    let jump = JumpMeasureParams {
        a_nu: x[0].exp(),
        b_nu: x[1].exp(),
        p_nu,
        alpha_nu: alpha_of(x[2]),
    };
    let model = SupOUModel { x_floor, jump, mixing };
    match stationary_stats(&model) {
        Ok(s) if !s.degenerate => moment_objective(&s, data).unwrap_or(f64::INFINITY),
        _ => f64::INFINITY,
    }
}

/// Multi-start Nelder–Mead over (ln a_ν, ln b_ν, logit α_ν) minimizing
/// [`moment_objective`] with the mixing measure held fixed.
pub fn fit_levy(
    data: &StationaryStats,
    mixing: MixingParams,
    x_floor: f64,
    p_nu: f64,
    opts: &LevyFitOptions,
    extra_starts: &[[f64; 3]],
) -> Result<LevyFit> {
    mixing.validate()?;
    if !(p_nu > 0.0) {
        return Err(Error::param("p_nu", "must be > 0"));
    }
    for (name, v) in [("Ave", data.ave), ("Std", data.std()), ("Skew", data.skew), ("Kurt", data.kurt)] {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::Domain(format!("data {name} must be nonzero and finite")));
        }
    }
    if data.ave <= x_floor {
        return Err(Error::Config(format!(
            "data mean {} does not exceed the floor {x_floor}; no positive jump measure fits",
            data.ave
        )));
    }
    if opts.restarts == 0 && extra_starts.is_empty() {
        return Err(Error::param("restarts", "need at least one start"));
    }
    let mut starts: Vec<[f64; 3]> = (0..opts.restarts)
        .map(|r| {
            let mut rng = path_rng(opts.seed, r as u64);
            [
                rng.random_range(opts.ln_a_range.0..opts.ln_a_range.1),
                rng.random_range(opts.ln_b_range.0..opts.ln_b_range.1),
                rng.random_range(-3.0..3.0),
            ]
        })
        .collect();
    starts.extend_from_slice(extra_starts);
    let obj = |x: &[f64]| levy_objective(x, data, mixing, x_floor, p_nu);
    let results: Vec<NmResult> = starts
        .par_iter()
        .map(|s| nelder_mead_restarted(&obj, s, opts.tol, opts.max_iter))
        .collect();
    let (best_restart, best) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f))
        .expect("nonempty");
    if !best.f.is_finite() {
        return Err(Error::NonConvergence {
            what: "levy fit (no finite objective)",
            iterations: best.iterations,
            last_change: best.diameter,
        });
    }
    let jump = JumpMeasureParams::new(best.x[0].exp(), best.x[1].exp(), p_nu, alpha_of(best.x[2]))?;
    Ok(LevyFit {
        jump,
        objective: best.f,
        best_restart,
        restarts: starts
            .iter()
            .zip(&results)
            .map(|(s, r)| RestartTrace {
                start: *s,
                objective: r.f,
                iterations: r.iterations,
                converged: r.converged,
            })
            .collect(),
    })
}

/// Calibration outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: SupOUModel,
    pub acf_sse: f64,
    pub moment_objective: f64,
    pub data_stats: StationaryStats,
    pub model_stats: StationaryStats,
    pub alpha_pi_le_two: bool,
    pub acf_iterations: usize,
    pub levy: LevyFit,
}

/// Full two-step calibration from a discharge series; X̲ is the series minimum.
pub fn fit_series(
    series: &DischargeSeries,
    p_nu: f64,
    acf_opts: &AcfFitOptions,
    levy_opts: &LevyFitOptions,
) -> Result<FitReport> {
    let lag_steps = (acf_opts.max_lag as f64 / series.step).round() as usize;
    let emp = empirical_acf(&series.values, lag_steps)?;
    let acf_fit = fit_acf(
        &emp,
        &AcfFitOptions {
            max_lag: lag_steps,
            step: series.step,
            ..*acf_opts
        },
    )?;
    let data = empirical_moments(&series.values)?;
    let x_floor = series.values.iter().copied().fold(f64::INFINITY, f64::min);
    fit_from_stats(&data, acf_fit, x_floor, p_nu, levy_opts)
}

/// Second step given fitted mixing parameters and data statistics.
pub fn fit_from_stats(
    data: &StationaryStats,
    acf_fit: AcfFit,
    x_floor: f64,
    p_nu: f64,
    levy_opts: &LevyFitOptions,
) -> Result<FitReport> {
    let levy = fit_levy(data, acf_fit.mixing, x_floor, p_nu, levy_opts, &[])?;
    let model = SupOUModel::new(x_floor, levy.jump, acf_fit.mixing)?;
    let model_stats = stationary_stats(&model)?;
    Ok(FitReport {
        model,
        acf_sse: acf_fit.sse,
        moment_objective: levy.objective,
        data_stats: *data,
        model_stats,
        alpha_pi_le_two: acf_fit.alpha_le_two,
        acf_iterations: acf_fit.iterations,
        levy,
    })
}
