//! Subcommand bodies. Flag overrides are folded into the config first so the
//! embedded config always describes the run that produced the output.

use std::path::Path;

use serde_json::{json, Value};
use supou_lqc::data::{empirical_acf, empirical_moments, empirical_pdf, load_series, BinScale, DischargeSeries};
use supou_lqc::identify::fit_series;
use supou_lqc::kbe::{self, convexity_margin, guarantee_crossing, solve_periodic_kbe};
use supou_lqc::lift::{consistency_gap, gbar, log_charfn_lift};
use supou_lqc::mms::{mms_problem, run_mms_convergence};
use supou_lqc::model::{acf, log_charfn_exact, stationary_stats, ModelSpec, QuadConfig, StationaryStats};
use supou_lqc::oracle_d::oracle_check;
use supou_lqc::problem::Target;
use supou_lqc::riccati::{dissipativity_margin, psd_report, solve_periodic_riccati, RiccatiSolution, SolverOptions};
use supou_lqc::simulate::{simulate_controlled, simulate_uncontrolled};

use crate::config::{DataChoice, LiftChoice, RunConfig};
use crate::fail::Failure;
use crate::output::Out;
use crate::Cmd;

type Res<T> = Result<T, Failure>;

fn stats_json(s: &StationaryStats) -> Value {
    json!({"ave": s.ave, "std": s.std(), "var": s.var, "skew": s.skew, "kurt": s.kurt, "degenerate": s.degenerate})
}

fn set_n(cfg: &mut RunConfig, n: Option<usize>) {
    if let Some(n) = n {
        cfg.lift = cfg.lift.with_n(n);
    }
}

fn set_data(cfg: &mut RunConfig, data: Option<std::path::PathBuf>) -> Res<()> {
    if let Some(p) = data {
        let load = cfg.data.as_ref().map(|d| d.load).unwrap_or_default();
        cfg.data = Some(DataChoice { path: p, load });
    }
    if cfg.data.is_none() {
        return Err(Failure::config("no data file: pass --data or set `data.path`".into()));
    }
    Ok(())
}

fn load(cfg: &RunConfig) -> Res<DischargeSeries> {
    let d = cfg.data.as_ref().expect("checked by set_data");
    Ok(load_series(&d.path, &d.load)?)
}

pub fn dispatch(cmd: Cmd, mut cfg: RunConfig, out_dir: &Path) -> Res<()> {
    match cmd {
        Cmd::Stats {
            data,
            max_lag,
            bins,
            log_bins,
        } => {
            set_data(&mut cfg, data)?;
            if let Some(l) = max_lag {
                cfg.fit.acf.max_lag = l.round() as usize;
            }
            let mut h = cfg.sim.histogram.unwrap_or_default();
            if let Some(b) = bins {
                h.bins = b;
            }
            if log_bins {
                h.scale = BinScale::Log;
            }
            cfg.sim.histogram = Some(h);
            let out = Out::new(out_dir, "stats", cfg.canonical(), cfg.seed)?;
            stats(&cfg, &out)
        }
        Cmd::Fit { data, p_nu } => {
            set_data(&mut cfg, data)?;
            if let Some(p) = p_nu {
                cfg.fit.p_nu = p;
            }
            let out = Out::new(out_dir, "fit", cfg.canonical(), cfg.seed)?;
            fit(&cfg, &out)
        }
        Cmd::Simulate { years, controlled } => {
            if let Some(y) = years {
                cfg.sim.horizon = y * supou_lqc::presets::YEAR_HOURS;
            }
            cfg.controlled |= controlled;
            let out = Out::new(out_dir, "simulate", cfg.canonical(), cfg.seed)?;
            simulate(&cfg, &out)
        }
        Cmd::Riccati { n, w } => {
            set_n(&mut cfg, n);
            if let Some(w) = w {
                cfg.w = w;
            }
            let out = Out::new(out_dir, "riccati", cfg.canonical(), cfg.seed)?;
            riccati(&cfg, &out)
        }
        Cmd::Kbe { n, w } => {
            set_n(&mut cfg, n);
            if let Some(w) = w {
                cfg.w = w;
            }
            let out = Out::new(out_dir, "kbe", cfg.canonical(), cfg.seed)?;
            kbe_cmd(&cfg, &out)
        }
        Cmd::Frontier { n, stride } => {
            set_n(&mut cfg, n);
            if let Some(s) = stride {
                cfg.weights = cfg.weights.iter().step_by(s.max(1)).copied().collect();
            }
            let out = Out::new(out_dir, "frontier", cfg.canonical(), cfg.seed)?;
            frontier(&cfg, &out)
        }
        Cmd::Mms { beta, n } => {
            if let Some(b) = beta {
                cfg.lift = match cfg.lift {
                    LiftChoice::Mesh(s) => LiftChoice::Mesh(supou_lqc::lift::LiftSpec { beta: b, ..s }),
                    LiftChoice::Points { .. } => {
                        return Err(Failure::config("mms needs a mesh lift (n, beta, eta_bar)".into()))
                    }
                };
            }
            if let Some(ns) = n {
                cfg.mms_ns = ns;
            }
            let out = Out::new(out_dir, "mms", cfg.canonical(), cfg.seed)?;
            mms(&cfg, &out)
        }
        Cmd::CharfnCheck { u, n } => {
            if let Some(u) = u {
                cfg.charfn_u = u;
            }
            if let Some(n) = n {
                cfg.charfn_ns = n;
            }
            let out = Out::new(out_dir, "charfn-check", cfg.canonical(), cfg.seed)?;
            charfn(&cfg, &out)
        }
        Cmd::OracleD { n, w } => {
            set_n(&mut cfg, n);
            if let Some(w) = w {
                cfg.w = w;
            }
            let out = Out::new(out_dir, "oracle-d", cfg.canonical(), cfg.seed)?;
            oracle(&cfg, &out)
        }
    }
}

fn stats(cfg: &RunConfig, out: &Out) -> Res<()> {
    let s = load(cfg)?;
    let m = empirical_moments(&s.values)?;
    let lags = ((cfg.fit.acf.max_lag as f64 / s.step).round() as usize).min(s.len() / 2 - 1).max(1);
    let a = empirical_acf(&s.values, lags)?;
    let h = empirical_pdf(&s.values, &cfg.sim.histogram.unwrap_or_default())?;
    out.json(
        "stats.json",
        json!({
            "samples": s.len(),
            "step_h": s.step,
            "start_time": s.start_time,
            "filled_gaps": s.filled_gaps,
            "moments": stats_json(&m),
        }),
    )?;
    let rows: Vec<Vec<f64>> = a.iter().enumerate().map(|(k, r)| vec![k as f64 * s.step, *r]).collect();
    out.csv("acf.csv", &["lag_h", "acf"], &rows)?;
    write_pdf(out, &h)?;
    println!(
        "{} samples: Ave {:.4} Std {:.4} Skew {:.4} Kurt {:.4}",
        s.len(),
        m.ave,
        m.std(),
        m.skew,
        m.kurt
    );
    Ok(())
}

fn write_pdf(out: &Out, h: &supou_lqc::data::Histogram) -> Res<()> {
    let rows: Vec<Vec<f64>> = h
        .edges
        .windows(2)
        .zip(&h.densities)
        .map(|(e, d)| vec![e[0], e[1], *d])
        .collect();
    out.csv("pdf.csv", &["lo", "hi", "density"], &rows)?;
    Ok(())
}

fn fit(cfg: &RunConfig, out: &Out) -> Res<()> {
    let s = load(cfg)?;
    let r = fit_series(&s, cfg.fit.p_nu, &cfg.fit.acf, &cfg.levy_options())?;
    out.json(
        "fit.json",
        json!({
            "model": ModelSpec::from_model(&r.model),
            "acf_sse": r.acf_sse,
            "alpha_pi_le_two": r.alpha_pi_le_two,
            "acf_iterations": r.acf_iterations,
            "moment_objective": r.moment_objective,
            "data_stats": stats_json(&r.data_stats),
            "model_stats": stats_json(&r.model_stats),
            "best_restart": r.levy.best_restart,
            "restarts": r.levy.restarts,
        }),
    )?;
    let lags = ((cfg.fit.acf.max_lag as f64 / s.step).round() as usize).min(s.len() / 2 - 1);
    let emp = empirical_acf(&s.values, lags)?;
    let rows: Vec<Vec<f64>> = emp
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let t = k as f64 * s.step;
            vec![t, *e, acf(&r.model.mixing, t)]
        })
        .collect();
    out.csv("acf_fit.csv", &["lag_h", "empirical", "fitted"], &rows)?;
    if r.alpha_pi_le_two {
        eprintln!("warning: fitted alpha_pi <= 2, the mixing measure has no finite reciprocal moment");
    }
    println!(
        "B_pi {:.5e} alpha_pi {:.4} a_nu {:.5e} b_nu {:.5e} alpha_nu {:.4} objective {:.3e}",
        r.model.mixing.b_pi, r.model.mixing.alpha_pi, r.model.jump.a_nu, r.model.jump.b_nu, r.model.jump.alpha_nu, r.moment_objective
    );
    Ok(())
}

fn solve(cfg: &RunConfig, keep_feedback: bool) -> Res<(supou_lqc::problem::ControlProblem, supou_lqc::lift::MarkovianLift, SolverOptions, RiccatiSolution)> {
    let p = cfg.problem()?;
    let lift = cfg.lift.build(&cfg.model)?;
    let opts = SolverOptions {
        keep_feedback,
        ..cfg.solver
    };
    let sol = solve_periodic_riccati(&p, &lift, &opts)?;
    Ok((p, lift, opts, sol))
}

fn simulate(cfg: &RunConfig, out: &Out) -> Res<()> {
    let sc = cfg.sim_config();
    let (summary, extra) = if cfg.controlled {
        let (p, lift, _, sol) = solve(cfg, true)?;
        let r = simulate_controlled(&lift, &sol, &p, &sc)?;
        let h = sol.h;
        (r, json!({"scheme": "controlled_lift", "h_n": h}))
    } else {
        let r = simulate_uncontrolled(&cfg.model, &sc)?;
        (r, json!({"scheme": "uncontrolled", "theory": stats_json(&stationary_stats(&cfg.model)?)}))
    };
    out.json(
        "simulate.json",
        json!({
            "samples": summary.samples,
            "moments": summary.moments.as_ref().map(stats_json),
            "min_state": summary.min_state,
            "max_state": summary.max_state,
            "cost": summary.cost,
            "run": extra,
        }),
    )?;
    if let Some(h) = &summary.histogram {
        write_pdf(out, h)?;
    }
    if let Some(series) = &summary.series {
        let rows: Vec<Vec<f64>> = series
            .iter()
            .enumerate()
            .flat_map(|(p, s)| s.iter().enumerate().map(move |(k, x)| vec![p as f64, k as f64 * sc.obs_step, *x]))
            .collect();
        out.csv("series.csv", &["path", "t_h", "discharge"], &rows)?;
    }
    match (&summary.moments, &summary.cost) {
        (_, Some(c)) => println!("cost {:.5} +- {:.5} (control {:.5} +- {:.5})", c.total, c.total_se, c.control, c.control_se),
        (Some(m), None) => println!("Ave {:.4} Std {:.4} Skew {:.4} Kurt {:.4}", m.ave, m.std(), m.skew, m.kurt),
        _ => println!("degenerate path at {}", summary.min_state),
    }
    Ok(())
}

fn riccati(cfg: &RunConfig, out: &Out) -> Res<()> {
    let (_, lift, _, sol) = solve(cfg, false)?;
    let psd = psd_report(&sol);
    let worst = psd
        .iter()
        .map(|(_, m, a)| m / a.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let diss = dissipativity_margin(&sol, &lift, cfg.w)
        .iter()
        .map(|x| x.1)
        .fold(f64::INFINITY, f64::min);
    out.json(
        "riccati.json",
        json!({
            "H": sol.h,
            "n": sol.n,
            "w": sol.w,
            "dt_h": sol.grid.dt,
            "steps": sol.grid.steps,
            "cycles": sol.cycles,
            "cycle_changes": sol.cycle_changes,
            "A0": sol.terminal_a,
            "B0": sol.terminal_b,
            "min_rel_eigenvalue": worst,
            "min_dissipativity_margin": diss,
        }),
    )?;
    let rows: Vec<Vec<f64>> = sol
        .cb
        .iter()
        .zip(&sol.ca)
        .enumerate()
        .map(|(k, (b, a))| vec![sol.grid.time(k), *b, *a])
        .collect();
    out.csv("riccati_series.csv", &["t_h", "c_dot_B", "c_dot_diagA"], &rows)?;
    let prow: Vec<Vec<f64>> = psd.iter().map(|(t, m, a)| vec![*t, *m, *a]).collect();
    out.csv("psd.csv", &["t_h", "min_eigenvalue", "max_abs_entry"], &prow)?;
    println!("H {} after {} cycles", sol.h, sol.cycles);
    Ok(())
}

fn kbe_cmd(cfg: &RunConfig, out: &Out) -> Res<()> {
    let (p, lift, opts, sol) = solve(cfg, false)?;
    let k = solve_periodic_kbe(&sol, &p, &lift, &opts)?;
    let d = sol.h - p.w * k.c;
    out.json(
        "kbe.json",
        json!({
            "H": sol.h,
            "C": k.c,
            "D": d,
            "w": p.w,
            "riccati_cycles": sol.cycles,
            "kbe_cycles": k.cycles,
            "S0": k.s0,
            "N0": k.n0,
        }),
    )?;
    println!("H {} C {} D {}", sol.h, k.c, d);
    Ok(())
}

fn frontier(cfg: &RunConfig, out: &Out) -> Res<()> {
    let p = cfg.problem()?;
    let lift = cfg.lift.build(&cfg.model)?;
    let (pts, fails) = kbe::frontier(&p, &lift, &cfg.weights, &cfg.solver);
    if pts.is_empty() {
        return Err(fails.into_iter().next().map(|f| Failure::from(f.1)).unwrap_or_else(|| Failure::config("empty weight list".into())));
    }
    let std2 = stationary_stats(&cfg.model)?.var;
    let crossing = match guarantee_crossing(&pts, cfg.guarantee_factor, std2) {
        Ok((w, c)) => json!({"w": w, "C": c}),
        Err(e) => json!({"error": e.to_string()}),
    };
    let decreasing = pts.windows(2).all(|w| w[1].d < w[0].d);
    out.json(
        "frontier.json",
        json!({
            "points": pts,
            "failures": fails.iter().map(|(w, e)| json!({"w": w, "error": e.to_string()})).collect::<Vec<_>>(),
            "std2": std2,
            "level": cfg.guarantee_factor * std2,
            "crossing": crossing,
            "convexity_margin": convexity_margin(&pts),
            "d_decreasing": decreasing,
        }),
    )?;
    let rows: Vec<Vec<f64>> = pts.iter().map(|q| vec![q.w, q.j, q.c, q.d]).collect();
    out.csv("frontier.csv", &["w", "J", "C", "D"], &rows)?;
    for (w, e) in &fails {
        eprintln!("warning: w = {w} failed: {e}");
    }
    println!("{} points, crossing {}", pts.len(), crossing);
    Ok(())
}

fn mms(cfg: &RunConfig, out: &Out) -> Res<()> {
    let LiftChoice::Mesh(spec) = cfg.lift else {
        return Err(Failure::config("mms needs a mesh lift (n, beta, eta_bar)".into()));
    };
    let p = mms_problem(cfg.model)?;
    let t = run_mms_convergence(&cfg.mms, &p, &cfg.mms_ns, spec.beta, spec.eta_bar, &cfg.solver)?;
    let opt = |x: Option<f64>| x.unwrap_or(f64::NAN);
    let rows: Vec<Vec<f64>> = t
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n as f64,
                r.h,
                r.e_n,
                opt(r.rate),
                r.linf_gamma_op,
                r.linf_gamma_vec,
                opt(r.rate_gamma_op),
                opt(r.rate_gamma_vec),
                r.cycles as f64,
                r.min_rel_eig,
            ]
        })
        .collect();
    out.csv(
        "mms.csv",
        &["n", "H", "e_n", "rate", "linf_Gamma", "linf_gamma", "rate_Gamma", "rate_gamma", "cycles", "min_rel_eig"],
        &rows,
    )?;
    out.json("mms.json", serde_json::to_value(&t).expect("serializable"))?;
    println!("H_manufactured {}", t.h_manufactured);
    for r in &t.rows {
        println!("n {:>4}  H {:.4}  e_n {:.2e}", r.n, r.h, r.e_n);
    }
    Ok(())
}

fn charfn(cfg: &RunConfig, out: &Out) -> Res<()> {
    let q = QuadConfig::default();
    let m1 = cfg.model.moment(1);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &u in &cfg.charfn_u {
        let exact = log_charfn_exact(&cfg.model, u, &q)?;
        let mut gaps = Vec::new();
        let mut ratios = Vec::new();
        for &n in &cfg.charfn_ns {
            let lift = cfg.lift.with_n(n).build(&cfg.model)?;
            let lifted = log_charfn_lift(&cfg.model, &lift, u, &q)?;
            let gap = consistency_gap(&cfg.model, &lift, u, &q)?;
            let g = gbar(&lift, &cfg.model.mixing);
            let ratio = gap / (u.abs() * m1 * g);
            rows.push(vec![n as f64, u, exact.re, exact.im, lifted.re, lifted.im, gap, g, ratio]);
            gaps.push(gap);
            ratios.push(ratio);
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        summary.push(json!({
            "u": u,
            "gaps": gaps,
            "decreasing": gaps.windows(2).all(|w| w[1] < w[0]),
            "ratio_spread": hi / lo,
        }));
    }
    out.csv(
        "charfn.csv",
        &["n", "u", "re_exact", "im_exact", "re_lift", "im_lift", "gap", "gbar", "gap_over_bound"],
        &rows,
    )?;
    out.json("charfn.json", json!({ "sweeps": summary }))?;
    for s in &summary {
        println!("u {} decreasing {} spread {:.3}", s["u"], s["decreasing"], s["ratio_spread"].as_f64().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn oracle(cfg: &RunConfig, out: &Out) -> Res<()> {
    let Target::Constant { value: x_hat } = cfg.target else {
        return Err(Failure::config("oracle-d needs a constant target (`problem.target.kind` = constant)".into()));
    };
    let zeroed = !cfg.model.jump.is_null();
    let model = cfg.model.without_jumps();
    let lift = cfg.lift.build(&model)?;
    let r = oracle_check(&model, &lift, cfg.w, x_hat, Some(cfg.period), &cfg.solver, cfg.oracle_tol)?;
    let mut v = serde_json::to_value(&r).expect("serializable");
    v["jumps_zeroed"] = Value::from(zeroed);
    out.json("oracle.json", v)?;
    println!(
        "max relative deviation {:.3e} (tol {:.1e}, within {}), solver vs closed form at R_n {:.2e}",
        r.max_rel_dev, cfg.oracle_tol, r.within_tol, r.solver_rel_dev
    );
    Ok(())
}
