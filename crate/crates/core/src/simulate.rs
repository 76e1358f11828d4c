//! Monte-Carlo paths of the uncontrolled supOU process and of the controlled lift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use crate::data::{empirical_moments, empirical_pdf, BinConfig, Histogram};
use crate::error::{Error, Result};
use crate::lift::MarkovianLift;
use crate::model::{reciprocal_moment, JumpMeasureParams, StationaryStats, SupOUModel};
use crate::problem::ControlProblem;
use crate::riccati::{dot, RiccatiSolution};
use crate::special::{gamma, reg_lower_diff};

/// Upper bound on tilting rejections for one increment.
pub const REJECTION_CAP: usize = 1_000_000;

/// Independent stream for replicate `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, Copy)]
enum Increment {
    Zero,
    /// Gamma subordinator: shape per step, scale.
    Gamma(Gamma<f64>),
    /// Compound Poisson with Gamma-distributed jumps.
    CompoundPoisson(Poisson<f64>, Gamma<f64>),
    /// One-sided stable of index α′ and scale σ, tilted by exp(−b S).
    Tilted { alpha: f64, ln_sigma: f64, b: f64 },
}

/// Increments over `dt` of the subordinator with measure
/// ν′(dy) = (a/p) y^{−1−α/p} e^{−b y} dy. The z-space jump is ΔL^{1/p}.
#[derive(Debug, Clone, Copy)]
pub struct TemperedStableSampler {
    pub dt: f64,
    pub inv_p: f64,
    kind: Increment,
}

impl TemperedStableSampler {
    pub fn new(jump: &JumpMeasureParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        let inv_p = 1.0 / jump.p_nu;
        if jump.is_null() {
            return Ok(Self {
                dt,
                inv_p,
                kind: Increment::Zero,
            });
        }
        let ap = jump.alpha_nu / jump.p_nu;
        let scale = jump.a_nu / jump.p_nu;
        let b = jump.b_nu;
        if ap >= 1.0 {
            return Err(Error::param("alpha_nu", "alpha_nu/p_nu must be < 1 for a subordinator"));
        }
        let bad = |e: rand_distr::GammaError| Error::Domain(format!("jump distribution: {e}"));
        let kind = if ap.abs() < 1e-12 {
            Increment::Gamma(Gamma::new(scale * dt, 1.0 / b).map_err(bad)?)
        } else if ap < 0.0 {
            let intensity = scale * b.powf(ap) * gamma(-ap);
            let pois = Poisson::new(intensity * dt).map_err(|e| Error::Domain(format!("jump count: {e}")))?;
            Increment::CompoundPoisson(pois, Gamma::new(-ap, 1.0 / b).map_err(bad)?)
        } else {
            // Laplace exponent of the untempered part: dt (a/p) Γ(1−α′)/α′ s^{α′}
            let ln_sigma = (dt * scale * gamma(1.0 - ap) / ap).ln() / ap;
            Increment::Tilted { alpha: ap, ln_sigma, b }
        };
        Ok(Self { dt, inv_p, kind })
    }

    /// One increment ΔL.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sample_ln(rng)?.map_or(0.0, f64::exp))
    }

    /// ln ΔL, or None for a zero increment.
    fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<f64>> {
        let l = match self.kind {
            Increment::Zero => 0.0,
            Increment::Gamma(g) => g.sample(rng),
            Increment::CompoundPoisson(pois, g) => {
                let k = pois.sample(rng) as usize;
                (0..k).map(|_| g.sample(rng)).sum()
            }
            Increment::Tilted { alpha, ln_sigma, b } => {
                for _ in 0..REJECTION_CAP {
                    let ln_s = ln_sigma + ln_positive_stable(alpha, rng);
                    let bs = b * ln_s.exp();
                    if bs < 1e-300 || rng.random::<f64>() < (-bs).exp() {
                        return Ok(Some(ln_s));
                    }
                }
                return Err(Error::RejectionCap(REJECTION_CAP));
            }
        };
        Ok((l > 0.0).then(|| l.ln()))
    }

    /// One z-space jump ΔL^{1/p}.
    #[inline]
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sample_ln(rng)?.map_or(0.0, |l| (self.inv_p * l).exp()))
    }
}

/// ∫ y^q ν′(dy) = (a/p) b^{α/p−q} Γ(q − α/p).
pub fn nu_prime_moment(jump: &JumpMeasureParams, q: f64) -> f64 {
    if jump.is_null() {
        return 0.0;
    }
    let ap = jump.alpha_nu / jump.p_nu;
    jump.a_nu / jump.p_nu * jump.b_nu.powf(ap - q) * gamma(q - ap)
}

/// ln S for the standard one-sided stable variable with E exp(−sS) = exp(−s^α),
/// 0 < α < 1 (Kanter's representation).
fn ln_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    let pu = std::f64::consts::PI * u;
    let (s1, s2, s3) = ((alpha * pu).sin(), ((1.0 - alpha) * pu).sin(), pu.sin());
    // α ln s1 + (1−α) ln s2 − ln s3 with two logarithms
    let log_a = (s1 / s3).ln() + (1.0 - alpha) * (s2 / s1).ln();
    (log_a - (1.0 - alpha) * e.ln()) / alpha
}

/// How the reversion rate is attached to increments in the uncontrolled scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateDraw {
    /// Each increment draws its own rate from π and keeps decaying at that rate.
    /// Rates are grouped into classes of equal π(dλ)/λ mass, each carrying its
    /// harmonic-mean rate, so the stationary moments are reproduced exactly.
    PerJump { classes: usize },
    /// One rate per step applied to the whole state, read literally.
    PerStep,
}

impl Default for RateDraw {
    fn default() -> Self {
        RateDraw::PerJump { classes: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    Uncontrolled { rate_draw: RateDraw },
    ControlledLift,
}

/// Simulation settings; times in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Uncontrolled: Euler step. Controlled: jump sub-step inside each solver step.
    pub dt: f64,
    /// Length of each path after burn-in.
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub scheme: Scheme,
    /// Spacing of recorded states.
    pub obs_step: f64,
    /// Overrides the default burn-in of 20/(α_π B_π) hours.
    pub burn_in: Option<f64>,
    pub keep_series: bool,
    pub histogram: Option<BinConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 200.0 * crate::presets::YEAR_HOURS,
            seed: 0,
            n_paths: 1,
            scheme: Scheme::Uncontrolled {
                rate_draw: RateDraw::default(),
            },
            obs_step: 1.0,
            burn_in: None,
            keep_series: false,
            histogram: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be >= 1"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be > 0"));
        }
        let r = self.obs_step / self.dt;
        if !(self.obs_step >= self.dt) || (r - r.round()).abs() > 1e-6 * r {
            return Err(Error::param("obs_step", "must be a positive multiple of dt"));
        }
        Ok(())
    }
}

/// Time-averaged running-cost pieces of a controlled run with batch-means errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// (1/T)∫ w′(X − X̂)²/2 dt
    pub deviation: f64,
    pub deviation_se: f64,
    /// (1/T)∫ u²/2 dt
    pub control: f64,
    pub control_se: f64,
    /// deviation + w·control
    pub total: f64,
    pub total_se: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub samples: usize,
    pub moments: Option<StationaryStats>,
    pub min_state: f64,
    pub max_state: f64,
    pub histogram: Option<Histogram>,
    pub cost: Option<CostEstimate>,
    /// Recorded states per path at `obs_step` spacing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub series: Option<Vec<Vec<f64>>>,
}

impl PathSummary {
    fn from_series(series: Vec<Vec<f64>>, cfg: &SimConfig, cost: Option<CostEstimate>) -> Result<Self> {
        let all: Vec<f64> = series.iter().flatten().copied().collect();
        let (lo, hi) = all
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let moments = match empirical_moments(&all) {
            Ok(m) => Some(m),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        let histogram = match (&cfg.histogram, moments) {
            (Some(b), Some(_)) => Some(empirical_pdf(&all, b)?),
            _ => None,
        };
        Ok(Self {
            samples: all.len(),
            moments,
            min_state: lo,
            max_state: hi,
            histogram,
            cost,
            series: cfg.keep_series.then_some(series),
        })
    }
}

fn default_burn_in(model: &SupOUModel) -> f64 {
    20.0 / model.mixing.mean_rate()
}

/// Rate classes of equal π(dλ)/λ mass: (cumulative π mass, harmonic rate).
fn rate_classes(model: &SupOUModel, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k == 0 {
        return Err(Error::param("classes", "must be >= 1"));
    }
    let a = model.mixing.alpha_pi;
    let r = reciprocal_moment(&model.mixing)?;
    // π(dλ)/λ normalized is Gamma(α−1) with the same scale; edges are in units of B
    let harm = GammaDist::new(a - 1.0, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let mut edges = vec![0.0];
    for i in 1..k {
        edges.push(harm.inverse_cdf(i as f64 / k as f64));
    }
    edges.push(f64::INFINITY);
    let mut cum = Vec::with_capacity(k);
    let mut rates = Vec::with_capacity(k);
    let mut acc = 0.0;
    for i in 0..k {
        let mass = reg_lower_diff(a, edges[i], edges[i + 1]);
        if !(mass > 0.0) {
            return Err(Error::EmptyCell { index: i, mass });
        }
        acc += mass;
        cum.push(acc);
        rates.push(k as f64 * mass / r);
    }
    // guard the last bucket against rounding in the cumulative sum
    *cum.last_mut().unwrap() = f64::INFINITY;
    Ok((cum, rates))
}

/// Uncontrolled discharge paths,
///
/// ```text
/// X_{k+1} = e^{−λΔt} X_k + (1 − e^{−λΔt}) X̲ + (1 − e^{−λΔt})/(λΔt) · ΔL_k^{1/p}
/// ```
///
/// with λ drawn from π according to [`RateDraw`]. States are recorded every `obs_step`.
pub fn simulate_uncontrolled(model: &SupOUModel, cfg: &SimConfig) -> Result<PathSummary> {
    model.validate()?;
    cfg.validate()?;
    let rate_draw = match cfg.scheme {
        Scheme::Uncontrolled { rate_draw } => rate_draw,
        Scheme::ControlledLift => return Err(Error::Config("simulate_uncontrolled needs an uncontrolled scheme".into())),
    };
    let sampler = TemperedStableSampler::new(&model.jump, cfg.dt)?;
    let per_obs = (cfg.obs_step / cfg.dt).round() as usize;
    let burn = cfg.burn_in.unwrap_or_else(|| default_burn_in(model));
    let burn_obs = (burn / cfg.obs_step).ceil() as usize;
    let n_obs = (cfg.horizon / cfg.obs_step).round().max(1.0) as usize;
    let classes = match rate_draw {
        RateDraw::PerJump { classes } => Some(rate_classes(model, classes)?),
        RateDraw::PerStep => None,
    };
    let series: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p as u64);
            match &classes {
                Some((cum, rates)) => {
                    run_classes(model, &sampler, cum, rates, cfg.dt, per_obs, burn_obs, n_obs, &mut rng)
                }
                None => run_per_step(model, &sampler, cfg.dt, per_obs, burn_obs, n_obs, &mut rng),
            }
        })
        .collect::<Result<_>>()?;
    PathSummary::from_series(series, cfg, None)
}

#[allow(clippy::too_many_arguments)]
fn run_classes(
    model: &SupOUModel,
    sampler: &TemperedStableSampler,
    cum: &[f64],
    rates: &[f64],
    dt: f64,
    per_obs: usize,
    burn_obs: usize,
    n_obs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let k = rates.len();
    let h = per_obs as f64 * dt;
    // jump in sub-step j of an observation interval, seen at the interval end
    let mut table = vec![0.0; k * per_obs];
    for (c, &lam) in rates.iter().enumerate() {
        let x = lam * dt;
        let fac = if x > 1e-12 { -(-x).exp_m1() / x } else { 1.0 };
        for j in 0..per_obs {
            table[c * per_obs + j] = fac * (-lam * (h - (j + 1) as f64 * dt)).exp();
        }
    }
    let decay: Vec<f64> = rates.iter().map(|l| (-l * h).exp()).collect();
    let mean_share = if model.jump.is_null() {
        0.0
    } else {
        model.moment(1) * reciprocal_moment(&model.mixing)? / k as f64
    };
    let mut y = vec![mean_share; k];
    let mut acc = vec![0.0; k];
    let mut out = Vec::with_capacity(n_obs);
    let null = model.jump.is_null();
    for obs in 0..burn_obs + n_obs {
        if !null {
            for j in 0..per_obs {
                let z = sampler.sample_jump(rng)?;
                if z > 0.0 {
                    let u: f64 = rng.random();
                    let c = cum.partition_point(|&m| m <= u).min(k - 1);
                    acc[c] += z * table[c * per_obs + j];
                }
            }
        }
        let mut x = model.x_floor;
        for c in 0..k {
            y[c] = decay[c] * y[c] + acc[c];
            acc[c] = 0.0;
            x += y[c];
        }
        if !x.is_finite() {
            return Err(Error::BlowUp {
                step: (obs + 1) * per_obs,
                norm: x,
            });
        }
        if obs >= burn_obs {
            out.push(x);
        }
    }
    Ok(out)
}

fn run_per_step(
    model: &SupOUModel,
    sampler: &TemperedStableSampler,
    dt: f64,
    per_obs: usize,
    burn_obs: usize,
    n_obs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let pi = Gamma::new(model.mixing.alpha_pi, model.mixing.b_pi).map_err(|e| Error::Domain(e.to_string()))?;
    let x_floor = model.x_floor;
    let mut x = x_floor
        + if model.jump.is_null() {
            0.0
        } else {
            model.moment(1) / model.mixing.mean_rate()
        };
    let mut out = Vec::with_capacity(n_obs);
    for obs in 0..burn_obs + n_obs {
        for _ in 0..per_obs {
            let lam: f64 = pi.sample(rng);
            let ldt = lam * dt;
            let e = (-ldt).exp();
            let fac = if ldt > 1e-12 { -(-ldt).exp_m1() / ldt } else { 1.0 };
            let z = sampler.sample_jump(rng)?;
            x = e * x + (1.0 - e) * x_floor + fac * z;
        }
        if !x.is_finite() {
            return Err(Error::BlowUp {
                step: (obs + 1) * per_obs,
                norm: x,
            });
        }
        if obs >= burn_obs {
            out.push(x);
        }
    }
    Ok(out)
}

/// Controlled lifted dynamics on the solver grid,
///
/// ```text
/// x_i ← x_i + Δt(−λ_i x_i + c_i u) + ΔL^{(i)},   u = −(D(t)·x + c·B(t))/w
/// ```
///
/// where each jump drawn on the `cfg.dt` sub-grid is routed to component i with
/// probability c_i (dropped with the tail mass). The state is X = X̲ + Σ x_i.
/// Requires the solution to carry its dense feedback.
pub fn simulate_controlled(
    lift: &MarkovianLift,
    sol: &RiccatiSolution,
    problem: &ControlProblem,
    cfg: &SimConfig,
) -> Result<PathSummary> {
    simulate_lift(lift, Some(sol), problem, cfg)
}

/// Same dynamics with u ≡ 0.
pub fn simulate_lift_uncontrolled(lift: &MarkovianLift, problem: &ControlProblem, cfg: &SimConfig) -> Result<PathSummary> {
    simulate_lift(lift, None, problem, cfg)
}

fn simulate_lift(
    lift: &MarkovianLift,
    sol: Option<&RiccatiSolution>,
    problem: &ControlProblem,
    cfg: &SimConfig,
) -> Result<PathSummary> {
    problem.validate()?;
    cfg.validate()?;
    let n = lift.n;
    let (grid_dt, steps) = match sol {
        Some(s) => {
            if s.n != n || s.weights != lift.weights || s.rates != lift.rates {
                return Err(Error::Config("Riccati solution was computed on a different lift".into()));
            }
            if (s.grid.period - problem.period).abs() > 1e-9 * problem.period || (s.w - problem.w).abs() > 1e-12 * problem.w {
                return Err(Error::Config("Riccati solution does not match the problem".into()));
            }
            if s.feedback.is_none() {
                return Err(Error::Config("Riccati solution lacks dense feedback (keep_feedback)".into()));
            }
            (s.grid.dt, s.grid.steps)
        }
        None => {
            let steps = (problem.period / cfg.obs_step).round().max(1.0) as usize;
            (problem.period / steps as f64, steps)
        }
    };
    let sub = (grid_dt / cfg.dt).round().max(1.0) as usize;
    let sampler = TemperedStableSampler::new(&problem.model.jump, grid_dt / sub as f64)?;
    let per_obs = ((cfg.obs_step / grid_dt).round() as usize).max(1);
    let period = problem.period;
    let burn = cfg.burn_in.unwrap_or_else(|| default_burn_in(&problem.model));
    let burn_periods = (burn / period).ceil() as usize;
    let periods = (cfg.horizon / period).round().max(1.0) as usize;
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &c in &lift.weights {
        acc += c;
        cum.push(acc);
    }
    let null = problem.model.jump.is_null();
    let x_floor = problem.model.x_floor;
    let w = problem.w;
    let xhat: Vec<f64> = (0..steps).map(|k| problem.target.eval(k as f64 * grid_dt, period)).collect();
    let wp: Vec<f64> = (0..steps).map(|k| problem.wprime(k as f64 * grid_dt)).collect();

    type PathOut = (Vec<f64>, Vec<(f64, f64)>);
    let runs: Vec<PathOut> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<PathOut> {
            let mut rng = path_rng(cfg.seed, p as u64);
            let mut x = vec![0.0; n];
            let mut jumps = vec![0.0; n];
            let mut obs = Vec::new();
            let mut batches = Vec::with_capacity(periods);
            for per in 0..burn_periods + periods {
                let (mut dev, mut ctl) = (0.0, 0.0);
                for k in 0..steps {
                    let u = match sol {
                        Some(s) => {
                            let fb = s.feedback.as_ref().unwrap();
                            -(dot(&fb[k * n..(k + 1) * n], &x) + s.cb[k]) / w
                        }
                        None => 0.0,
                    };
                    let xs: f64 = x.iter().sum::<f64>() + x_floor;
                    let e = xs - xhat[k];
                    dev += wp[k] * e * e * 0.5;
                    ctl += u * u * 0.5;
                    if per >= burn_periods && k % per_obs == 0 {
                        obs.push(xs);
                    }
                    if !null {
                        for _ in 0..sub {
                            let z = sampler.sample_jump(&mut rng)?;
                            if z > 0.0 {
                                let v: f64 = rng.random();
                                let i = cum.partition_point(|&m| m <= v);
                                if i < n {
                                    jumps[i] += z;
                                }
                            }
                        }
                    }
                    for i in 0..n {
                        x[i] += grid_dt * (-lift.rates[i] * x[i] + lift.weights[i] * u) + jumps[i];
                        jumps[i] = 0.0;
                    }
                    if !xs.is_finite() {
                        return Err(Error::BlowUp {
                            step: per * steps + k,
                            norm: xs,
                        });
                    }
                }
                if per >= burn_periods {
                    batches.push((dev / steps as f64, ctl / steps as f64));
                }
            }
            Ok((obs, batches))
        })
        .collect::<Result<_>>()?;
    let batches: Vec<(f64, f64)> = runs.iter().flat_map(|r| r.1.iter().copied()).collect();
    let series = runs.into_iter().map(|r| r.0).collect();
    let cost = batch_means(&batches, w);
    PathSummary::from_series(series, cfg, Some(cost))
}

fn batch_means(b: &[(f64, f64)], w: f64) -> CostEstimate {
    let m = b.len() as f64;
    let stats = |f: &dyn Fn(&(f64, f64)) -> f64| {
        let mean = b.iter().map(f).sum::<f64>() / m;
        let var = if b.len() > 1 {
            b.iter().map(|x| (f(x) - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            f64::NAN
        };
        (mean, (var / m).sqrt())
    };
    let (dev, dev_se) = stats(&|x| x.0);
    let (ctl, ctl_se) = stats(&|x| x.1);
    let (tot, tot_se) = stats(&|x| x.0 + w * x.1);
    CostEstimate {
        deviation: dev,
        deviation_se: dev_se,
        control: ctl,
        control_se: ctl_se,
        total: tot,
        total_se: tot_se,
        batches: b.len(),
    }
}
