//! Controlling cost of the optimal feedback via the Kolmogorov backward equation.
//!
//! With D = A c, F = S c, the quadratic/linear coefficients (S, N) satisfy
//!
//! ```text
//! dS_ij/ds = (λ_i+λ_j) S_ij + (D_i F_j + D_j F_i)/w − D_i D_j/w²
//! dN_i/ds  = λ_i N_i − M₁ F_i + (c·B/w) F_i + (c·N/w) D_i − (c·B/w²) D_i
//! C        = (1/P) ∫₀ᴾ { (M₂/2) Σ c_i S_ii + M₁ c·N − (c·B)(c·N)/w + (c·B)²/(2w²) } ds
//! ```
//!
//! and the deviation part of the optimal cost is D = J − wC with J = H_n.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::MarkovianLift;
use crate::problem::ControlProblem;
use crate::riccati::{self, dot, max_abs, max_abs_diff, Dyn, RiccatiSolution, SolverOptions, TimeGrid};

/// Periodic KBE coefficients and the controlling cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KBESolution {
    pub n: usize,
    pub grid: TimeGrid,
    pub c: f64,
    pub cycles: usize,
    pub cycle_changes: Vec<f64>,
    /// S(s = 0), N(s = 0) of the periodic solution.
    pub s0: Vec<f64>,
    pub n0: Vec<f64>,
    /// Per-time integrand pieces at k = 0..=N: (Σ c_i S_ii, c·N).
    pub cs: Vec<f64>,
    pub cn: Vec<f64>,
}

/// One point of the efficient frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub w: f64,
    pub j: f64,
    pub c: f64,
    pub d: f64,
}

/// Solves the KBE on the Riccati solution's grid.
///
/// Uses the stored feedback when present; otherwise (A, B) are re-integrated
/// from the periodic terminal state alongside (S, N), which reproduces the
/// Riccati sweep exactly.
pub fn solve_periodic_kbe(
    sol: &RiccatiSolution,
    problem: &ControlProblem,
    lift: &MarkovianLift,
    opts: &SolverOptions,
) -> Result<KBESolution> {
    let n = lift.n;
    if sol.n != n || sol.weights != lift.weights || sol.rates != lift.rates {
        return Err(Error::Config("KBE lift differs from the Riccati solution's lift".into()));
    }
    let grid = sol.grid;
    let expect = TimeGrid::new(problem.period, opts.dt_rule, n)?;
    if expect != grid || (sol.w - problem.w).abs() > 0.0 {
        return Err(Error::Config("KBE grid or control weight differs from the Riccati solution".into()));
    }
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let dy = Dyn::new(lift, problem.w, m1, m2);
    let coeffs = riccati::problem_coeffs(problem);
    let winv = 1.0 / problem.w;
    let w2inv = winv * winv;
    let c = &lift.weights;
    let lam = &lift.rates;

    let mut s = vec![0.0; n * n];
    let mut nv = vec![0.0; n];
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut cs_t = vec![0.0; grid.steps + 1];
    let mut cn_t = vec![0.0; grid.steps + 1];
    let mut changes = Vec::new();
    let mut last = f64::INFINITY;

    for cyc in 1..=opts.max_cycles {
        let (s_start, n_start) = (s.clone(), nv.clone());
        if sol.feedback.is_none() {
            a.copy_from_slice(&sol.terminal_a);
            b.copy_from_slice(&sol.terminal_b);
        }
        let mut csum = 0.0;
        for k in (0..=grid.steps).rev() {
            let cb = match &sol.feedback {
                Some(fb) => {
                    d.copy_from_slice(&fb[k * n..(k + 1) * n]);
                    sol.cb[k]
                }
                None => dy.prepare(&a, &b, &mut d).0,
            };
            let mut cs = 0.0;
            for i in 0..n {
                f[i] = dot(&s[i * n..(i + 1) * n], c);
                cs += c[i] * s[i * n + i];
            }
            let cn = dot(c, &nv);
            cs_t[k] = cs;
            cn_t[k] = cn;
            if k == 0 {
                break;
            }
            if !(cs.is_finite() && cn.is_finite()) {
                return Err(Error::BlowUp {
                    step: grid.steps - k,
                    norm: max_abs(&s).max(max_abs(&nv)),
                });
            }
            csum += 0.5 * m2 * cs + m1 * cn - cb * cn * winv + 0.5 * cb * cb * w2inv;
            let dt = grid.dt;
            for i in 0..n {
                let row = &mut s[i * n..(i + 1) * n];
                let ll = &dy.ll[i * n..(i + 1) * n];
                let (di, fi) = (d[i], f[i]);
                for j in 0..n {
                    let rhs = ll[j] * row[j] + (di * f[j] + d[j] * fi) * winv - di * d[j] * w2inv;
                    row[j] -= dt * rhs;
                }
            }
            for i in 0..n {
                let rhs = lam[i] * nv[i] - m1 * f[i] + cb * winv * f[i] + cn * winv * d[i] - cb * w2inv * d[i];
                nv[i] -= dt * rhs;
            }
            if sol.feedback.is_none() {
                let co = coeffs(grid.time(k));
                dy.update(&mut a, &mut b, &d, cb, &co, dt);
            }
        }
        let change = max_abs_diff(&s, &s_start).max(max_abs_diff(&nv, &n_start));
        let scale = 1.0f64.max(max_abs(&s)).max(max_abs(&nv));
        last = change / scale;
        changes.push(last);
        if last < opts.tol {
            return Ok(KBESolution {
                n,
                grid,
                c: csum / grid.steps as f64,
                cycles: cyc,
                cycle_changes: changes,
                s0: s,
                n0: nv,
                cs: cs_t,
                cn: cn_t,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "periodic KBE iteration",
        iterations: opts.max_cycles,
        last_change: last,
    })
}

/// C from stored per-time pieces by the left-rectangle rule.
pub fn controlling_cost(kbe: &KBESolution, sol: &RiccatiSolution, problem: &ControlProblem) -> f64 {
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let w = sol.w;
    let sum: f64 = (1..=kbe.grid.steps)
        .rev()
        .map(|k| {
            let (cb, cn) = (sol.cb[k], kbe.cn[k]);
            0.5 * m2 * kbe.cs[k] + m1 * cn - cb * cn / w + cb * cb / (2.0 * w * w)
        })
        .sum();
    sum / kbe.grid.steps as f64
}

/// Riccati + KBE pipeline for a single control weight.
pub fn frontier_point(problem: &ControlProblem, lift: &MarkovianLift, opts: &SolverOptions) -> Result<FrontierPoint> {
    let sol = riccati::solve_periodic_riccati(problem, lift, opts)?;
    let kbe = solve_periodic_kbe(&sol, problem, lift, opts)?;
    Ok(FrontierPoint {
        w: problem.w,
        j: sol.h,
        c: kbe.c,
        d: sol.h - problem.w * kbe.c,
    })
}

/// Sweeps the control weight. Failed points are returned as errors in place;
/// successful points are sorted by C.
pub fn frontier(
    template: &ControlProblem,
    lift: &MarkovianLift,
    ws: &[f64],
    opts: &SolverOptions,
) -> (Vec<FrontierPoint>, Vec<(f64, Error)>) {
    let results: Vec<(f64, Result<FrontierPoint>)> = ws
        .par_iter()
        .map(|&w| (w, frontier_point(&template.with_w(w), lift, opts)))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (w, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push((w, e)),
        }
    }
    points.sort_by(|x, y| x.c.total_cmp(&y.c));
    (points, failures)
}

/// Weights w_i = 10^{−2 + i/25}, i = 0..=100, optionally every `stride`-th.
pub fn default_weights(stride: usize) -> Vec<f64> {
    (0..=100)
        .step_by(stride.max(1))
        .map(|i| 10f64.powf(-2.0 + i as f64 / 25.0))
        .collect()
}

/// Crossing of the frontier with D = factor·Std², interpolated linearly in
/// (log C, log D). Points must be sorted by C. Returns (w*, C*).
pub fn guarantee_crossing(points: &[FrontierPoint], factor: f64, std2: f64) -> Result<(f64, f64)> {
    let level = factor * std2;
    for p in points {
        if p.d == level {
            return Ok((p.w, p.c));
        }
    }
    for pair in points.windows(2) {
        let (p, q) = (pair[0], pair[1]);
        if (p.d - level) * (q.d - level) < 0.0 {
            if p.c > 0.0 && q.c > 0.0 && p.d > 0.0 && q.d > 0.0 {
                let t = (level.ln() - p.d.ln()) / (q.d.ln() - p.d.ln());
                let c = (p.c.ln() + t * (q.c.ln() - p.c.ln())).exp();
                let w = (p.w.ln() + t * (q.w.ln() - p.w.ln())).exp();
                return Ok((w, c));
            }
            let t = (level - p.d) / (q.d - p.d);
            return Ok((p.w + t * (q.w - p.w), p.c + t * (q.c - p.c)));
        }
    }
    Err(Error::NoCrossing(format!(
        "level {level} outside D range of {} frontier points",
        points.len()
    )))
}

/// Smallest second difference of D as a function of C (nonuniform spacing),
/// normalized by the D range; ≥ 0 for a convex frontier.
pub fn convexity_margin(points: &[FrontierPoint]) -> f64 {
    let dmax = points.iter().map(|p| p.d.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    points
        .windows(3)
        .map(|t| {
            let s1 = (t[1].d - t[0].d) / (t[1].c - t[0].c);
            let s2 = (t[2].d - t[1].d) / (t[2].c - t[1].c);
            (s2 - s1) * (t[2].c - t[0].c) / dmax
        })
        .fold(f64::INFINITY, f64::min)
}
