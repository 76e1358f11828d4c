//! Periodic finite-dimensional Riccati system on the lift, solved backward in time.
//!
//! With D = A c and the state weight w′(s),
//!
//! ```text
//! dA_ij/ds = (λ_i + λ_j) A_ij + D_i D_j / w − w′(s)
//! dB_i/ds  = λ_i B_i + (D_i/w) c·B − M₁ D_i + w′(s) X̄_s
//! H_n      = (1/P) ∫₀ᴾ { −(c·B)²/(2w) + (M₂/2) Σ c_i A_ii + M₁ c·B + w′(s) X̄_s²/2 } ds
//! u*(t, x) = −(1/w) (D·x + c·B)
//! ```
//!
//! Integration is explicit Euler from s = P down to s = 0, repeated over
//! periods until the state at s = 0 reproduces the state it started from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::MarkovianLift;
use crate::problem::ControlProblem;

/// Time-step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtRule {
    /// Δt = 1/n h.
    InverseN,
    /// Fixed step in hours; must divide the period.
    Fixed { hours: f64 },
}

impl DtRule {
    /// Parses `1/n` or a step length in hours such as `0.25`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1/n" || s == "inverse_n" {
            return Ok(DtRule::InverseN);
        }
        let v: f64 = s
            .strip_suffix('h')
            .unwrap_or(s)
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("dt rule `{s}`: expected `1/n` or hours")))?;
        Ok(DtRule::Fixed { hours: v })
    }
}

/// Uniform grid over one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub period: f64,
    pub steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(period: f64, rule: DtRule, n: usize) -> Result<Self> {
        let dt = match rule {
            DtRule::InverseN => 1.0 / n as f64,
            DtRule::Fixed { hours } => hours,
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be > 0, got {dt}")));
        }
        let steps = (period / dt).round();
        if steps < 1.0 || ((steps * dt - period).abs() > 1e-9 * period) {
            return Err(Error::Config(format!("time step {dt} h does not divide the period {period} h")));
        }
        let steps = steps as usize;
        Ok(Self {
            period,
            steps,
            dt: period / steps as f64,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub dt_rule: DtRule,
    /// Cycle-to-cycle change threshold, relative to max(1, ‖state‖∞).
    pub tol: f64,
    pub max_cycles: usize,
    /// Number of (A, B) snapshots kept per period.
    pub snapshots: usize,
    /// Keep D(t) at every grid time (needed by the controlled simulation).
    pub keep_feedback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt_rule: DtRule::InverseN,
            tol: 1e-10,
            max_cycles: 50,
            snapshots: 64,
            keep_feedback: false,
        }
    }
}

/// Stored (A, B) at grid index k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub t: f64,
    /// Row-major n×n.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Converged periodic solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiSolution {
    pub n: usize,
    pub grid: TimeGrid,
    pub w: f64,
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
    pub h: f64,
    pub cycles: usize,
    /// Relative cycle-to-cycle change after each cycle.
    pub cycle_changes: Vec<f64>,
    /// c·B at grid index k = 0..=N.
    pub cb: Vec<f64>,
    /// Σ c_i A_ii at grid index k = 0..=N.
    pub ca: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// State at s = P that starts the periodic sweep.
    pub terminal_a: Vec<f64>,
    pub terminal_b: Vec<f64>,
    /// D(t) row-major (N+1)×n when requested.
    #[serde(skip)]
    pub feedback: Option<Vec<f64>>,
}

/// Per-time coefficients of the backward sweep.
///
/// ```text
/// dA_ij/ds = L_ij A_ij + D_i D_j/w − qa − s1 E_ij − s2 (λ_i+λ_j) E_ij
/// dB_i/ds  = λ_i B_i + D_i c·B/w − M₁ D_i + rb − t1 e_i − t2 λ_i e_i
/// ```
///
/// The E/e terms carry the manufactured-solution sources and are zero otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Coeffs {
    pub qa: f64,
    pub rb: f64,
    /// w′ X̄²/2 contribution to the Hamiltonian integrand.
    pub hc: f64,
    pub s1: f64,
    pub s2: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Node arrays for the manufactured sources.
#[derive(Debug, Clone)]
pub(crate) struct Sources {
    pub e: Vec<f64>,
    pub le: Vec<f64>,
    pub ev: Vec<f64>,
    pub lev: Vec<f64>,
}

/// Lifted linear dynamics shared by the Riccati and KBE sweeps.
#[derive(Debug, Clone)]
pub(crate) struct Dyn {
    pub n: usize,
    pub c: Vec<f64>,
    pub lam: Vec<f64>,
    /// λ_i + λ_j, row-major.
    pub ll: Vec<f64>,
    pub winv: f64,
    pub m1: f64,
    pub m2: f64,
    pub sources: Option<Sources>,
}

impl Dyn {
    pub fn new(lift: &MarkovianLift, w: f64, m1: f64, m2: f64) -> Self {
        let n = lift.n;
        let lam = lift.rates.clone();
        let mut ll = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                ll[i * n + j] = lam[i] + lam[j];
            }
        }
        Self {
            n,
            c: lift.weights.clone(),
            lam,
            ll,
            winv: 1.0 / w,
            m1,
            m2,
            sources: None,
        }
    }

    /// D = A c; returns (c·B, Σ c_i A_ii).
    #[inline]
    pub fn prepare(&self, a: &[f64], b: &[f64], d: &mut [f64]) -> (f64, f64) {
        let n = self.n;
        let mut cb = 0.0;
        let mut ca = 0.0;
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            d[i] = dot(row, &self.c);
            cb += self.c[i] * b[i];
            ca += self.c[i] * row[i];
        }
        (cb, ca)
    }

    /// One explicit Euler step backward in s. `d`, `cb` must come from `prepare`.
    #[inline]
    pub fn update(&self, a: &mut [f64], b: &mut [f64], d: &[f64], cb: f64, co: &Coeffs, dt: f64) {
        let n = self.n;
        let winv = self.winv;
        match &self.sources {
            None => {
                for i in 0..n {
                    let di = d[i] * winv;
                    let row = &mut a[i * n..(i + 1) * n];
                    let ll = &self.ll[i * n..(i + 1) * n];
                    for j in 0..n {
                        let rhs = ll[j] * row[j] + di * d[j] - co.qa;
                        row[j] -= dt * rhs;
                    }
                }
                for i in 0..n {
                    let rhs = self.lam[i] * b[i] + d[i] * cb * winv - self.m1 * d[i] + co.rb;
                    b[i] -= dt * rhs;
                }
            }
            Some(src) => {
                for i in 0..n {
                    let di = d[i] * winv;
                    let row = &mut a[i * n..(i + 1) * n];
                    let ll = &self.ll[i * n..(i + 1) * n];
                    let e = &src.e[i * n..(i + 1) * n];
                    let le = &src.le[i * n..(i + 1) * n];
                    for j in 0..n {
                        let rhs = ll[j] * row[j] + di * d[j] - co.qa - co.s1 * e[j] - co.s2 * le[j];
                        row[j] -= dt * rhs;
                    }
                }
                for i in 0..n {
                    let rhs = self.lam[i] * b[i] + d[i] * cb * winv - self.m1 * d[i] + co.rb
                        - co.t1 * src.ev[i]
                        - co.t2 * src.lev[i];
                    b[i] -= dt * rhs;
                }
            }
        }
    }

    /// Hamiltonian integrand at one grid time.
    #[inline]
    pub fn h_integrand(&self, cb: f64, ca: f64, co: &Coeffs) -> f64 {
        -cb * cb * 0.5 * self.winv + 0.5 * self.m2 * ca + self.m1 * cb + co.hc
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    // four accumulators keep the loop vectorizable with a fixed summation order
    let mut acc = [0.0; 4];
    let chunks = x.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += x[4 * k + l] * y[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..x.len() {
        s += x[k] * y[k];
    }
    s
}

pub(crate) fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// Per-step observation passed to sweep observers: grid index, A, B, D, c·B, Σc_iA_ii.
pub(crate) type Observer<'a> = dyn FnMut(usize, &[f64], &[f64], &[f64], f64, f64) + 'a;

/// One backward sweep from s = P to s = 0. Calls `obs` at every grid index
/// N, N−1, ..., 0 with the state before the step; returns Σ of the
/// Hamiltonian integrand over k = N..1.
pub(crate) fn sweep(
    dy: &Dyn,
    grid: &TimeGrid,
    coeffs: &dyn Fn(f64) -> Coeffs,
    a: &mut [f64],
    b: &mut [f64],
    obs: &mut Observer<'_>,
) -> Result<f64> {
    let mut d = vec![0.0; dy.n];
    let mut hsum = 0.0;
    for k in (1..=grid.steps).rev() {
        let co = coeffs(grid.time(k));
        let (cb, ca) = dy.prepare(a, b, &mut d);
        if !(cb.is_finite() && ca.is_finite()) {
            return Err(Error::BlowUp {
                step: grid.steps - k,
                norm: max_abs(a).max(max_abs(b)),
            });
        }
        obs(k, a, b, &d, cb, ca);
        hsum += dy.h_integrand(cb, ca, &co);
        dy.update(a, b, &d, cb, &co, grid.dt);
    }
    let (cb, ca) = dy.prepare(a, b, &mut d);
    obs(0, a, b, &d, cb, ca);
    Ok(hsum)
}

/// Coefficient function of a control problem.
pub(crate) fn problem_coeffs(problem: &ControlProblem) -> impl Fn(f64) -> Coeffs + '_ {
    move |s| {
        let wp = problem.wprime(s);
        let xb = problem.xbar(s);
        let wx = wp * xb;
        Coeffs {
            qa: wp,
            rb: wx,
            hc: 0.5 * wx * xb,
            ..Coeffs::default()
        }
    }
}

/// Result of the cyclic iteration before it is packaged.
pub(crate) struct CycleOutcome {
    pub h: f64,
    pub cycles: usize,
    pub changes: Vec<f64>,
    pub cb: Vec<f64>,
    pub ca: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub terminal_a: Vec<f64>,
    pub terminal_b: Vec<f64>,
    pub feedback: Option<Vec<f64>>,
}

/// Cycles backward sweeps to the periodic fixed point. `extra` observes every sweep.
pub(crate) fn cycle(
    dy: &Dyn,
    grid: &TimeGrid,
    coeffs: &dyn Fn(f64) -> Coeffs,
    opts: &SolverOptions,
    mut extra: Option<&mut dyn FnMut(usize, &[f64], &[f64])>,
    mut on_sweep_start: Option<&mut dyn FnMut()>,
) -> Result<CycleOutcome> {
    let n = dy.n;
    let steps = grid.steps;
    let stride = (steps / opts.snapshots.max(1)).max(1);
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut cb_t = vec![0.0; steps + 1];
    let mut ca_t = vec![0.0; steps + 1];
    let mut feedback = opts.keep_feedback.then(|| vec![0.0; (steps + 1) * n]);
    let mut snaps: Vec<Snapshot> = Vec::new();
    let mut changes = Vec::new();
    let mut last_change = f64::INFINITY;
    for cyc in 1..=opts.max_cycles {
        let a0 = a.clone();
        let b0 = b.clone();
        snaps.clear();
        if let Some(f) = on_sweep_start.as_deref_mut() {
            f();
        }
        let hsum = {
            let mut obs = |k: usize, a: &[f64], b: &[f64], d: &[f64], cb: f64, ca: f64| {
                cb_t[k] = cb;
                ca_t[k] = ca;
                if let Some(fb) = feedback.as_mut() {
                    fb[k * n..(k + 1) * n].copy_from_slice(d);
                }
                if k % stride == 0 && k < steps {
                    snaps.push(Snapshot {
                        k,
                        t: grid.time(k),
                        a: a.to_vec(),
                        b: b.to_vec(),
                    });
                }
                if let Some(f) = extra.as_deref_mut() {
                    f(k, a, b);
                }
            };
            sweep(dy, grid, coeffs, &mut a, &mut b, &mut obs)?
        };
        let change = max_abs_diff(&a, &a0).max(max_abs_diff(&b, &b0));
        let scale = 1.0f64.max(max_abs(&a)).max(max_abs(&b));
        last_change = change / scale;
        changes.push(last_change);
        if last_change < opts.tol {
            snaps.reverse();
            return Ok(CycleOutcome {
                h: hsum / steps as f64,
                cycles: cyc,
                changes,
                cb: cb_t,
                ca: ca_t,
                snapshots: snaps,
                terminal_a: a0,
                terminal_b: b0,
                feedback,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "periodic Riccati iteration",
        iterations: opts.max_cycles,
        last_change,
    })
}

/// Solves the periodic Riccati system for `problem` on `lift`.
pub fn solve_periodic_riccati(
    problem: &ControlProblem,
    lift: &MarkovianLift,
    opts: &SolverOptions,
) -> Result<RiccatiSolution> {
    problem.validate()?;
    let grid = TimeGrid::new(problem.period, opts.dt_rule, lift.n)?;
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let dy = Dyn::new(lift, problem.w, m1, m2);
    let coeffs = problem_coeffs(problem);
    let out = cycle(&dy, &grid, &coeffs, opts, None, None)?;
    Ok(RiccatiSolution {
        n: lift.n,
        grid,
        w: problem.w,
        weights: lift.weights.clone(),
        rates: lift.rates.clone(),
        h: out.h,
        cycles: out.cycles,
        cycle_changes: out.changes,
        cb: out.cb,
        ca: out.ca,
        snapshots: out.snapshots,
        terminal_a: out.terminal_a,
        terminal_b: out.terminal_b,
        feedback: out.feedback,
    })
}

/// H_n from the stored per-time sums by the left-rectangle rule.
pub fn effective_hamiltonian(sol: &RiccatiSolution, problem: &ControlProblem) -> f64 {
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let w = sol.w;
    let steps = sol.grid.steps;
    let sum: f64 = (1..=steps)
        .rev()
        .map(|k| {
            let s = sol.grid.time(k);
            let cb = sol.cb[k];
            let wp = problem.wprime(s);
            let xb = problem.xbar(s);
            -cb * cb * 0.5 / w + 0.5 * m2 * sol.ca[k] + m1 * cb + 0.5 * (wp * xb) * xb
        })
        .sum();
    sum / steps as f64
}

impl RiccatiSolution {
    /// D = A c for a stored snapshot.
    pub fn snapshot_feedback(&self, snap: &Snapshot) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| dot(&snap.a[i * n..(i + 1) * n], &self.weights)).collect()
    }

    /// Linear feedback (D(t), c·B(t)) at time t, wrapped into [0, P).
    pub fn feedback_at(&self, t: f64) -> (Vec<f64>, f64) {
        let n = self.n;
        let p = self.grid.period;
        let t = t.rem_euclid(p);
        if let Some(fb) = &self.feedback {
            let x = t / self.grid.dt;
            let k0 = (x.floor() as usize).min(self.grid.steps - 1);
            let f = x - k0 as f64;
            let d = (0..n)
                .map(|i| (1.0 - f) * fb[k0 * n + i] + f * fb[(k0 + 1) * n + i])
                .collect();
            let cb = (1.0 - f) * self.cb[k0] + f * self.cb[k0 + 1];
            return (d, cb);
        }
        let (a, b) = self.state_at(t);
        let d = (0..n).map(|i| dot(&a[i * n..(i + 1) * n], &self.weights)).collect();
        let cb = dot(&b, &self.weights);
        (d, cb)
    }

    /// (A(t), B(t)) linearly interpolated between snapshots.
    pub fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.grid.period;
        let t = t.rem_euclid(p);
        let snaps = &self.snapshots;
        let idx = snaps.partition_point(|s| s.t <= t);
        let (s0, s1, t1) = if idx == snaps.len() {
            (&snaps[idx - 1], &snaps[0], p)
        } else {
            (&snaps[idx - 1], &snaps[idx], snaps[idx].t)
        };
        let f = if t1 > s0.t { (t - s0.t) / (t1 - s0.t) } else { 0.0 };
        let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| (1.0 - f) * a + f * b).collect() };
        (lerp(&s0.a, &s1.a), lerp(&s0.b, &s1.b))
    }
}

/// Optimal feedback u*(t, x) = −(1/w)(Σ_i c_i(Σ_j A_ij(t) x_j + B_i(t))).
pub fn optimal_control(sol: &RiccatiSolution, t: f64, x: &[f64]) -> f64 {
    let (d, cb) = sol.feedback_at(t);
    -(dot(&d, x) + cb) / sol.w
}

/// min_i λ_i − (1/w) |c| |A c| at each snapshot time; positive means the
/// controlled drift is dissipative.
pub fn dissipativity_margin(sol: &RiccatiSolution, lift: &MarkovianLift, w: f64) -> Vec<(f64, f64)> {
    let lmin = lift.rates.iter().copied().fold(f64::INFINITY, f64::min);
    let cnorm = dot(&lift.weights, &lift.weights).sqrt();
    sol.snapshots
        .iter()
        .map(|s| {
            let d = sol.snapshot_feedback(s);
            (s.t, lmin - cnorm * dot(&d, &d).sqrt() / w)
        })
        .collect()
}

/// Smallest eigenvalue of each snapshot relative to its max-abs entry.
pub fn psd_report(sol: &RiccatiSolution) -> Vec<(f64, f64, f64)> {
    let n = sol.n;
    sol.snapshots
        .iter()
        .map(|s| {
            let m = nalgebra::DMatrix::from_row_slice(n, n, &s.a);
            let eig = m.symmetric_eigenvalues();
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            (s.t, min, max_abs(&s.a))
        })
        .collect()
}

/// Reference solver for the unweighted system (w′ ≡ 1) written directly from
/// the Riccati equations, without the coefficient abstraction. Returns
/// (H, A(0), B(0), cycles).
pub fn solve_unweighted_reference(
    problem: &ControlProblem,
    lift: &MarkovianLift,
    opts: &SolverOptions,
) -> Result<(f64, Vec<f64>, Vec<f64>, usize)> {
    let n = lift.n;
    let grid = TimeGrid::new(problem.period, opts.dt_rule, n)?;
    let (c, lam, w) = (&lift.weights, &lift.rates, problem.w);
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    let mut last = f64::INFINITY;
    for cyc in 1..=opts.max_cycles {
        let (a0, b0) = (a.clone(), b.clone());
        let mut hsum = 0.0;
        for k in (1..=grid.steps).rev() {
            let s = grid.time(k);
            let xb = problem.xbar(s);
            let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i][j] * c[j]).sum()).collect();
            let cb: f64 = (0..n).map(|i| c[i] * b[i]).sum();
            let ca: f64 = (0..n).map(|i| c[i] * a[i][i]).sum();
            hsum += -cb * cb / (2.0 * w) + m2 / 2.0 * ca + m1 * cb + xb * xb / 2.0;
            let mut da = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    da[i][j] = (lam[i] + lam[j]) * a[i][j] + d[i] * d[j] / w - 1.0;
                }
            }
            let db: Vec<f64> = (0..n)
                .map(|i| lam[i] * b[i] + d[i] / w * cb - m1 * d[i] + xb)
                .collect();
            for i in 0..n {
                for j in 0..n {
                    a[i][j] -= grid.dt * da[i][j];
                }
                b[i] -= grid.dt * db[i];
            }
        }
        let mut change: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for i in 0..n {
            for j in 0..n {
                change = change.max((a[i][j] - a0[i][j]).abs());
                scale = scale.max(a[i][j].abs());
            }
            change = change.max((b[i] - b0[i]).abs());
            scale = scale.max(b[i].abs());
        }
        last = change / scale;
        if last < opts.tol {
            let flat = a.into_iter().flatten().collect();
            return Ok((hsum / grid.steps as f64, flat, b, cyc));
        }
    }
    Err(Error::NonConvergence {
        what: "reference Riccati iteration",
        iterations: opts.max_cycles,
        last_change: last,
    })
}
