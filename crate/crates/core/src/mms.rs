//! Manufactured-solution convergence harness for the Riccati solver.
//!
//! The sourced system is solved exactly by
//!
//! ```text
//! Γ(s, λ, θ) = a_Γ(s) exp(−b_Γ(λ + θ)),   γ(s, λ) = c_Γ(s) exp(−b_Γ λ)
//! ```
//!
//! with the π-transforms ∫ e^{−bλ} π(dλ) = (1 + B_π b)^{−α_π} used in the
//! sources, so the measured error includes the lift's quadrature error.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lift::build_lift;
use crate::model::SupOUModel;
use crate::presets;
use crate::problem::{ControlProblem, StateWeight, Target};
use crate::riccati::{self, Coeffs, Dyn, SolverOptions, Sources, TimeGrid};

/// a_Γ = a0 + a1 sin(2πs/P), c_Γ = c0 + c1 sin(2πs/P), decay b_Γ (h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsConfig {
    pub a0: f64,
    pub a1: f64,
    pub c0: f64,
    pub c1: f64,
    pub b_gamma: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            a0: 0.1,
            a1: 0.05,
            c0: 0.2,
            c1: 0.1,
            b_gamma: 0.02,
        }
    }
}

impl MmsConfig {
    /// (a_Γ, da_Γ/ds, c_Γ, dc_Γ/ds) at time s.
    pub fn coefficients(&self, s: f64, period: f64) -> (f64, f64, f64, f64) {
        let om = TAU / period;
        let (sn, cs) = (om * s).sin_cos();
        (
            self.a0 + self.a1 * sn,
            self.a1 * om * cs,
            self.c0 + self.c1 * sn,
            self.c1 * om * cs,
        )
    }
}

/// The manufactured problem: Station Y model, X̂ = 10(1 + 0.5 cos), w = 1, P = 1 year.
pub fn mms_problem(model: SupOUModel) -> Result<ControlProblem> {
    ControlProblem::new(
        model,
        presets::YEAR_HOURS,
        Target::Sinusoid {
            mean: 10.0,
            cos_amp: 5.0,
            sin_amp: 0.0,
        },
        StateWeight::unit(),
        1.0,
    )
}

/// Exact (Γ, γ) at (s, λ, θ).
pub fn mms_exact(cfg: &MmsConfig, period: f64, s: f64, lambda: f64, theta: f64) -> (f64, f64) {
    let (a, _, c, _) = cfg.coefficients(s, period);
    (
        a * (-cfg.b_gamma * (lambda + theta)).exp(),
        c * (-cfg.b_gamma * lambda).exp(),
    )
}

/// Transform factors (1+Bb)^{−α}, (1+Bb)^{−2α}, (1+2Bb)^{−α}.
fn transforms(cfg: &MmsConfig, problem: &ControlProblem) -> (f64, f64, f64) {
    let mx = problem.model.mixing;
    let k1 = (1.0 + mx.b_pi * cfg.b_gamma).powf(-mx.alpha_pi);
    let kk = (1.0 + 2.0 * mx.b_pi * cfg.b_gamma).powf(-mx.alpha_pi);
    (k1, k1 * k1, kk)
}

/// Source terms (f_Γ, g_Γ) at (s, λ, θ).
///
/// ```text
/// f_Γ = −1 + (−a′ + (θ+λ) a + a² k₂/w) e^{−b(λ+θ)}
/// g_Γ = X̄_s + (−c′ + λ c + a c k₂/w − M₁ a k₁) e^{−bλ}
/// ```
pub fn mms_sources(cfg: &MmsConfig, problem: &ControlProblem, s: f64, lambda: f64, theta: f64) -> (f64, f64) {
    let (a, da, c, dc) = cfg.coefficients(s, problem.period);
    let (k1, k2, _) = transforms(cfg, problem);
    let w = problem.w;
    let m1 = problem.model.moment(1);
    let f = -1.0 + (-da + (theta + lambda) * a + a * a * k2 / w) * (-cfg.b_gamma * (lambda + theta)).exp();
    let g = problem.xbar(s) + (-dc + lambda * c + a * c * k2 / w - m1 * a * k1) * (-cfg.b_gamma * lambda).exp();
    (f, g)
}

/// Manufactured H by periodic trapezoid quadrature (spectrally accurate here).
pub fn mms_hamiltonian(cfg: &MmsConfig, problem: &ControlProblem, points: usize) -> f64 {
    let (k1, k2, kk) = transforms(cfg, problem);
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let w = problem.w;
    let p = problem.period;
    let sum: f64 = (0..points)
        .map(|k| {
            let s = p * k as f64 / points as f64;
            let (a, _, c, _) = cfg.coefficients(s, p);
            let xb = problem.xbar(s);
            let wp = problem.wprime(s);
            -c * c * k2 / (2.0 * w) + m2 * a * kk / 2.0 + m1 * c * k1 + wp * xb * xb / 2.0
        })
        .sum();
    sum / points as f64
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsRow {
    pub n: usize,
    pub h: f64,
    pub e_n: f64,
    /// log_{n₁/n}(e_n/e_{n₁}) towards the next row.
    pub rate: Option<f64>,
    pub linf_gamma_op: f64,
    pub linf_gamma_vec: f64,
    pub rate_gamma_op: Option<f64>,
    pub rate_gamma_vec: Option<f64>,
    pub cycles: usize,
    /// Smallest eigenvalue over the stored A snapshots, relative to ‖A‖∞.
    pub min_rel_eig: f64,
}

/// Convergence table plus the manufactured reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsTable {
    pub beta: f64,
    pub eta_bar: f64,
    pub h_manufactured: f64,
    pub rows: Vec<MmsRow>,
}

/// Solves the sourced system on one lift; returns (H, ‖Γ err‖∞, ‖γ err‖∞, cycles, min rel eig).
pub fn run_mms_single(
    cfg: &MmsConfig,
    problem: &ControlProblem,
    n: usize,
    beta: f64,
    eta_bar: f64,
    opts: &SolverOptions,
) -> Result<(f64, f64, f64, usize, f64)> {
    let lift = build_lift(&problem.model.mixing, n, beta, eta_bar)?;
    let grid = TimeGrid::new(problem.period, opts.dt_rule, n)?;
    let m1 = problem.model.moment(1);
    let m2 = problem.model.moment(2);
    let mut dy = Dyn::new(&lift, problem.w, m1, m2);
    let lam = &lift.rates;
    let bg = cfg.b_gamma;
    let mut e = vec![0.0; n * n];
    let mut le = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let s = lam[i] + lam[j];
            e[i * n + j] = (-bg * s).exp();
            le[i * n + j] = s * e[i * n + j];
        }
    }
    let ev: Vec<f64> = lam.iter().map(|l| (-bg * l).exp()).collect();
    let lev: Vec<f64> = lam.iter().zip(&ev).map(|(l, x)| l * x).collect();
    dy.sources = Some(Sources {
        e: e.clone(),
        le,
        ev: ev.clone(),
        lev,
    });
    let (k1, k2, _) = transforms(cfg, problem);
    let w = problem.w;
    let period = problem.period;
    // w′ − 1 and w′X̄ − X̄ carry the constant parts of f_Γ and g_Γ
    let coeffs = |s: f64| {
        let (a, da, c, dc) = cfg.coefficients(s, period);
        let wp = problem.wprime(s);
        let xb = problem.xbar(s);
        Coeffs {
            qa: wp - 1.0,
            rb: wp * xb - xb,
            hc: 0.5 * (wp * xb) * xb,
            s1: -da + a * a * k2 / w,
            s2: a,
            t1: -dc + a * c * k2 / w - m1 * a * k1,
            t2: c,
        }
    };
    // errors come from the final sweep only, so they are reset at each sweep start
    let errs = std::cell::Cell::new((0.0f64, 0.0f64));
    let out = {
        let mut start = || errs.set((0.0, 0.0));
        let mut obs = |k: usize, am: &[f64], bv: &[f64]| {
            let (mut eo, mut evv) = errs.get();
            let (a, _, c, _) = cfg.coefficients(grid.time(k), period);
            for (x, ex) in am.iter().zip(&e) {
                eo = eo.max((x - a * ex).abs());
            }
            for (x, ex) in bv.iter().zip(&ev) {
                evv = evv.max((x - c * ex).abs());
            }
            errs.set((eo, evv));
        };
        riccati::cycle(&dy, &grid, &coeffs, opts, Some(&mut obs), Some(&mut start))?
    };
    let (err_op, err_vec) = errs.get();
    let min_rel = out
        .snapshots
        .iter()
        .map(|s| {
            let m = nalgebra::DMatrix::from_row_slice(n, n, &s.a);
            let min = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            min / riccati::max_abs(&s.a).max(f64::MIN_POSITIVE)
        })
        .fold(f64::INFINITY, f64::min);
    Ok((out.h, err_op, err_vec, out.cycles, min_rel))
}

/// Runs the manufactured-solution study over `ns` (ascending) at fixed β, η̄.
pub fn run_mms_convergence(
    cfg: &MmsConfig,
    problem: &ControlProblem,
    ns: &[usize],
    beta: f64,
    eta_bar: f64,
    opts: &SolverOptions,
) -> Result<MmsTable> {
    let h_man = mms_hamiltonian(cfg, problem, 1 << 14);
    let results: Vec<_> = ns
        .par_iter()
        .map(|&n| run_mms_single(cfg, problem, n, beta, eta_bar, opts).map(|r| (n, r)))
        .collect::<Result<_>>()?;
    let mut rows: Vec<MmsRow> = results
        .into_iter()
        .map(|(n, (h, eo, ev, cycles, min_rel))| MmsRow {
            n,
            h,
            e_n: (h_man - h).abs() / h_man,
            rate: None,
            linf_gamma_op: eo,
            linf_gamma_vec: ev,
            rate_gamma_op: None,
            rate_gamma_vec: None,
            cycles,
            min_rel_eig: min_rel,
        })
        .collect();
    for k in 0..rows.len().saturating_sub(1) {
        let ratio = (rows[k + 1].n as f64 / rows[k].n as f64).ln();
        let r = |x: f64, y: f64| (x / y).ln() / ratio;
        rows[k].rate = Some(r(rows[k].e_n, rows[k + 1].e_n));
        rows[k].rate_gamma_op = Some(r(rows[k].linf_gamma_op, rows[k + 1].linf_gamma_op));
        rows[k].rate_gamma_vec = Some(r(rows[k].linf_gamma_vec, rows[k + 1].linf_gamma_vec));
    }
    Ok(MmsTable {
        beta,
        eta_bar,
        h_manufactured: h_man,
        rows,
    })
}
