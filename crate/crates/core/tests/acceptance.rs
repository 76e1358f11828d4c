//! Acceptance suite. Prints one PASS/FAIL line per criterion; a FAIL is a
//! reported outcome, not a test failure. The test itself only fails if a
//! computation errors out.
//!
//! Lines go straight to the stdout handle so they survive output capture.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supou_lqc::data::DischargeSeries;
use supou_lqc::identify::{fit_acf, fit_levy, fit_series, AcfFitOptions, LevyFitOptions};
use supou_lqc::kbe::{convexity_margin, guarantee_crossing, solve_periodic_kbe, FrontierPoint};
use supou_lqc::lift::{build_lift, consistency_gap, gbar, MarkovianLift};
use supou_lqc::mms::{mms_hamiltonian, mms_problem, run_mms_convergence, MmsConfig, MmsTable};
use supou_lqc::model::{acf, stationary_stats, JumpMeasureParams, MixingParams, QuadConfig, SupOUModel};
use supou_lqc::oracle_d::{analytic_from_r, oracle_check};
use supou_lqc::presets::{station_data_stats, station_model, Station, GUARANTEE_FACTOR, YEAR_HOURS};
use supou_lqc::problem::{ControlProblem, StateWeight, Target};
use supou_lqc::riccati::{psd_report, solve_periodic_riccati, solve_unweighted_reference, DtRule, RiccatiSolution, SolverOptions};
use supou_lqc::simulate::{simulate_controlled, simulate_uncontrolled, Scheme, SimConfig};

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Worst min-eigenvalue-to-max-entry ratio over every stored A(t).
struct Psd {
    worst: f64,
    matrices: usize,
}

impl Psd {
    fn add(&mut self, sol: &RiccatiSolution) {
        for (_, min, max_abs) in psd_report(sol) {
            self.worst = self.worst.min(min / max_abs.max(f64::MIN_POSITIVE));
            self.matrices += 1;
        }
    }

    fn add_ratio(&mut self, r: f64, count: usize) {
        self.worst = self.worst.min(r);
        self.matrices += count;
    }
}

// Published reference tables for the manufactured problem.
const TABLE5_H: [f64; 4] = [45.9120, 46.0756, 46.1811, 46.2319];
const TABLE5_RATE: [f64; 3] = [0.957, 1.35, 1.96];
const TABLE7: [(f64, f64); 4] = [(3.90e-2, 1.86e-1), (4.25e-3, 2.24e-2), (6.86e-5, 3.73e-4), (4.60e-6, 9.64e-6)];
const TABLE8: [(f64, f64); 4] = [(2.86e-1, 1.57), (1.78e-1, 1.24), (9.30e-2, 7.44e-1), (3.44e-2, 2.98e-1)];
const H_MANUFACTURED: f64 = 46.2495;

fn within_factor(x: f64, reference: f64, f: f64) -> bool {
    x > 0.0 && x / reference <= f && reference / x <= f
}

fn criterion_1() {
    let cfg = MmsConfig::default();
    let p = mms_problem(station_model(Station::Y)).unwrap();
    let t = Instant::now();
    let h = mms_hamiltonian(&cfg, &p, 1 << 14);
    let secs = t.elapsed().as_secs_f64();
    let ok = (h - H_MANUFACTURED).abs() < 5e-5 && secs < 1.0;
    say(&format!(
        "criterion 1 {}: manufactured H = {h:.4} (reference {H_MANUFACTURED}, |diff| {:.4}) in {secs:.3} s",
        verdict(ok),
        (h - H_MANUFACTURED).abs()
    ));
}

fn mms_table(beta: f64, psd: &mut Psd) -> MmsTable {
    let cfg = MmsConfig::default();
    let p = mms_problem(station_model(Station::Y)).unwrap();
    let t = run_mms_convergence(&cfg, &p, &[10, 20, 40, 80], beta, 0.02, &SolverOptions::default()).unwrap();
    for r in &t.rows {
        psd.add_ratio(r.min_rel_eig, SolverOptions::default().snapshots);
    }
    t
}

fn criterion_2(t: &MmsTable, secs: f64) {
    let h_ok: Vec<bool> = t.rows.iter().zip(TABLE5_H).map(|(r, h)| (r.h - h).abs() <= 5e-3).collect();
    let mono = t.rows.windows(2).all(|w| w[1].e_n < w[0].e_n);
    let rate_ok: Vec<bool> = t
        .rows
        .iter()
        .zip(TABLE5_RATE)
        .map(|(r, q)| r.rate.is_some_and(|x| (x / q - 1.0).abs() <= 0.3))
        .collect();
    let ok = h_ok.iter().all(|&b| b) && mono && rate_ok.iter().all(|&b| b) && secs <= 600.0;
    let hs: Vec<String> = t.rows.iter().map(|r| format!("{:.4}", r.h)).collect();
    let es: Vec<String> = t.rows.iter().map(|r| format!("{:.2e}", r.e_n)).collect();
    let rs: Vec<String> = t.rows.iter().filter_map(|r| r.rate).map(|x| format!("{x:.3}")).collect();
    say(&format!(
        "criterion 2 {}: beta 0.5 H [{}] vs [45.9120, 46.0756, 46.1811, 46.2319] (within 5e-3: {h_ok:?}); e_n [{}] monotone {mono}; rates [{}] vs [0.957, 1.35, 1.96] (within 30%: {rate_ok:?}); {secs:.0} s",
        verdict(ok),
        hs.join(", "),
        es.join(", "),
        rs.join(", ")
    ));
}

fn criterion_3(t2: &MmsTable, t5: &MmsTable, t8: &MmsTable) {
    let check = |t: &MmsTable, table: &[(f64, f64); 4]| -> Vec<(f64, f64)> {
        t.rows
            .iter()
            .zip(table)
            .map(|(r, (g, v))| (r.linf_gamma_op / g, r.linf_gamma_vec / v))
            .collect()
    };
    let in2 = |v: &[(f64, f64)]| v.iter().all(|(a, b)| within_factor(*a, 1.0, 2.0) && within_factor(*b, 1.0, 2.0));
    let r2 = check(t2, &TABLE7);
    let r5 = check(t5, &TABLE8);
    // convergent regimes: errors fall with n
    let falls = |t: &MmsTable| t.rows.windows(2).all(|w| w[1].linf_gamma_op < w[0].linf_gamma_op && w[1].linf_gamma_vec < w[0].linf_gamma_vec);
    let diverges = t8
        .rows
        .windows(2)
        .all(|w| w[1].linf_gamma_op >= w[0].linf_gamma_op && w[1].linf_gamma_vec >= w[0].linf_gamma_vec)
        && t8
            .rows
            .iter()
            .filter_map(|r| r.rate_gamma_op.zip(r.rate_gamma_vec))
            .all(|(a, b)| a < 0.0 && b < 0.0);
    let ok = in2(&r2) && in2(&r5) && falls(t2) && falls(t5) && diverges;
    let fmt = |v: &[(f64, f64)]| v.iter().map(|(a, b)| format!("({a:.2}, {b:.2})")).collect::<Vec<_>>().join(" ");
    let e8: Vec<String> = t8
        .rows
        .iter()
        .map(|r| format!("({:.2e}, {:.2e})", r.linf_gamma_op, r.linf_gamma_vec))
        .collect();
    say(&format!(
        "criterion 3 {}: error ratios to published (Gamma, gamma) beta 0.2 {} ; beta 0.5 {} ; beta 0.8 errors {} non-decreasing with negative rates {diverges}",
        verdict(ok),
        fmt(&r2),
        fmt(&r5),
        e8.join(" ")
    ));
}

fn criterion_4() {
    let m = station_model(Station::Y);
    let q = QuadConfig::default();
    let m1 = m.moment(1);
    let ns = [10usize, 20, 40, 80];
    let lifts: Vec<MarkovianLift> = ns.iter().map(|&n| build_lift(&m.mixing, n, 0.5, 0.02).unwrap()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for u in [0.5, 1.0, 2.0] {
        let gaps: Vec<f64> = lifts.iter().map(|l| consistency_gap(&m, l, u, &q).unwrap()).collect();
        let ratios: Vec<f64> = lifts
            .iter()
            .zip(&gaps)
            .map(|(l, g)| g / (u * m1 * gbar(l, &m.mixing)))
            .collect();
        let dec = gaps.windows(2).all(|w| w[1] < w[0]);
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        let spread = hi / lo;
        ok &= dec && spread <= 10.0;
        parts.push(format!(
            "u={u}: gaps [{}] decreasing {dec}, ratio spread {spread:.2}",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(", ")
        ));
    }
    say(&format!("criterion 4 {}: {}", verdict(ok), parts.join("; ")));
}

fn point_mass() -> (ControlProblem, MarkovianLift) {
    let model = SupOUModel::new(0.0, JumpMeasureParams::null(), MixingParams::new(1.0, 2.0).unwrap()).unwrap();
    let p = ControlProblem::new(model, 40.0, Target::Constant { value: 1.0 }, StateWeight::unit(), 1.0).unwrap();
    (p, MarkovianLift::from_points(vec![1.0], vec![1.0]).unwrap())
}

fn criterion_6(psd: &mut Psd) {
    let (p, lift) = point_mass();
    let opts = SolverOptions {
        dt_rule: DtRule::Fixed { hours: 0.01 },
        tol: 1e-13,
        ..Default::default()
    };
    let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
    psd.add(&sol);
    let k = solve_periodic_kbe(&sol, &p, &lift, &opts).unwrap();
    let (a, b) = (2f64.sqrt() - 1.0, -1.0 / 2f64.sqrt());
    let pm_err = [
        (sol.terminal_a[0] - a).abs(),
        (sol.terminal_b[0] - b).abs(),
        (sol.h - 0.25).abs(),
        (k.c - 0.125).abs(),
    ];
    let pm_ok = pm_err.iter().all(|&e| e < 1e-10);

    let an = analytic_from_r(1.0, 0.0, 1.0, 1.0);
    let an_ok = (an.i - a).abs() < 1e-14 && (an.x_inf - 0.5).abs() < 1e-14 && (an.h - 0.25).abs() < 1e-14;

    let m = station_model(Station::Y).without_jumps();
    let o = SolverOptions {
        dt_rule: DtRule::Fixed { hours: 0.5 },
        ..Default::default()
    };
    let mut devs = Vec::new();
    let mut solver = 0.0f64;
    for n in [20usize, 40, 80, 160] {
        let l = build_lift(&m.mixing, n, 0.5, 0.02).unwrap();
        let r = oracle_check(&m, &l, 1.0, 20.0, None, &o, 1e-3).unwrap();
        devs.push((n, r.max_rel_dev, r.rel_dev_i, r.rel_dev_h, (r.r_lift - r.r_exact) / r.r_exact));
        solver = solver.max(r.solver_rel_dev);
    }
    let dec = devs.windows(2).all(|w| w[1].1 < w[0].1);
    let last = devs.last().unwrap().1;
    let ok = pm_ok && an_ok && dec && last < 1e-3;
    let dv: Vec<String> = devs
        .iter()
        .map(|(n, d, di, dh, dr)| format!("n={n}: max {d:.2e} (I {di:.2e}, H {dh:.2e}, R_n {dr:+.2e})"))
        .collect();
    say(&format!(
        "criterion 6 {}: point mass errors {:.1e} ok {pm_ok}; analytic (I, X_inf, H) = ({:.6}, {:.6}, {:.6}) ok {an_ok}; lift vs closed form {} decreasing {dec}; n=160 below 1e-3 {}; solver vs closed form at lift R_n {solver:.1e}",
        verdict(ok),
        pm_err.iter().fold(0.0f64, |m, &e| m.max(e)),
        an.i,
        an.x_inf,
        an.h,
        dv.join(", "),
        last < 1e-3
    ));
}

fn criterion_7() -> Vec<f64> {
    let y = station_model(Station::Y);
    let cfg = SimConfig {
        dt: 1e-3,
        horizon: 200.0 * YEAR_HOURS,
        seed: 2024,
        keep_series: true,
        ..Default::default()
    };
    let t = Instant::now();
    let r = simulate_uncontrolled(&y, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let th = stationary_stats(&y).unwrap();
    let mc = r.moments.unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let e = [rel(mc.ave, th.ave), rel(mc.std(), th.std()), rel(mc.skew, th.skew), rel(mc.kurt, th.kurt)];
    let tol = [0.03, 0.10, 0.30, 0.50];
    let ok = e.iter().zip(tol).all(|(x, t)| *x <= t);
    say(&format!(
        "criterion 7 {}: 200 y at dt 1e-3 h, MC (Ave, Std, Skew, Kurt) = ({:.3}, {:.3}, {:.3}, {:.2}) vs theory ({:.3}, {:.3}, {:.3}, {:.2}); rel errors {} vs limits {tol:?}; {secs:.0} s",
        verdict(ok),
        mc.ave,
        mc.std(),
        mc.skew,
        mc.kurt,
        th.ave,
        th.std(),
        th.skew,
        th.kurt,
        e.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
    ));
    r.series.unwrap().into_iter().next().unwrap()
}

fn criterion_8(psd: &mut Psd) {
    let y = station_model(Station::Y);
    let lift = build_lift(&y.mixing, 20, 0.5, 0.02).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for w in [100.0, 1.0] {
        let p = ControlProblem::application(y, w, 0.0).unwrap();
        let opts = SolverOptions {
            dt_rule: DtRule::Fixed { hours: 0.25 },
            keep_feedback: true,
            ..Default::default()
        };
        let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
        psd.add(&sol);
        let k = solve_periodic_kbe(&sol, &p, &lift, &opts).unwrap();
        let cfg = SimConfig {
            dt: 1e-3,
            horizon: 100.0 * YEAR_HOURS,
            seed: 8,
            scheme: Scheme::ControlledLift,
            ..Default::default()
        };
        let c = simulate_controlled(&lift, &sol, &p, &cfg).unwrap().cost.unwrap();
        let zt = (c.total - sol.h) / c.total_se;
        let zc = (c.control - k.c) / c.control_se;
        ok &= zt.abs() <= 3.0 && zc.abs() <= 3.0;
        parts.push(format!(
            "w={w}: MC cost {:.3} +- {:.3} vs H_n {:.3} ({zt:+.2} se), MC control {:.4} +- {:.4} vs C {:.4} ({zc:+.2} se)",
            c.total, c.total_se, sol.h, c.control, c.control_se, k.c
        ));
    }
    say(&format!("criterion 8 {}: n=20 lift, 100 y, {}", verdict(ok), parts.join("; ")));
}

fn frontier_points(s: Station, psd: &mut Psd) -> Vec<FrontierPoint> {
    let m = station_model(s);
    let lift = build_lift(&m.mixing, 20, 0.5, 0.02).unwrap();
    let opts = SolverOptions {
        dt_rule: DtRule::Fixed { hours: 0.05 },
        ..Default::default()
    };
    let mut pts: Vec<FrontierPoint> = supou_lqc::kbe::default_weights(5)
        .into_iter()
        .map(|w| {
            let p = ControlProblem::application(m, w, 0.0).unwrap();
            let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
            psd.add(&sol);
            let k = solve_periodic_kbe(&sol, &p, &lift, &opts).unwrap();
            FrontierPoint {
                w,
                j: sol.h,
                c: k.c,
                d: sol.h - w * k.c,
            }
        })
        .collect();
    pts.sort_by(|a, b| a.c.total_cmp(&b.c));
    pts
}

fn criterion_9(psd: &mut Psd) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, target) in [(Station::D, Some((1.1, 0.2))), (Station::U, Some((1.8, 0.3))), (Station::Y, None)] {
        let pts = frontier_points(s, psd);
        let convex = convexity_margin(&pts);
        let dec = pts.windows(2).all(|w| w[1].d < w[0].d && w[1].c > w[0].c);
        let std2 = stationary_stats(&station_model(s)).unwrap().var;
        let cross = guarantee_crossing(&pts, GUARANTEE_FACTOR, std2);
        let shape_ok = convex >= -1e-6 && dec;
        let desc = match (&cross, target) {
            (Ok((w, c)), Some((t, tol))) => {
                let hit = (c - t).abs() <= tol;
                ok &= hit;
                format!("C* = {c:.3} at w = {w:.3} (target {t} +- {tol}, hit {hit})")
            }
            (Ok((w, c)), None) => {
                // the published value is 2.3 in one place and 4.7 in another
                let near = |x: f64| (c - x).abs() <= 0.5;
                format!(
                    "C* = {c:.3} at w = {w:.3} (flag: published 2.3 or 4.7, near 2.3 {}, near 4.7 {})",
                    near(2.3),
                    near(4.7)
                )
            }
            (Err(e), _) => {
                ok = false;
                format!("no crossing: {e}")
            }
        };
        ok &= shape_ok;
        parts.push(format!(
            "{}: convexity margin {convex:.2e}, D decreasing in C {dec}, {desc}",
            s.name()
        ));
    }
    say(&format!("criterion 9 {}: {}", verdict(ok), parts.join("; ")));
}

fn criterion_10(series: Vec<f64>) {
    let y = station_model(Station::Y);
    // exact statistics and exact ACF
    let emp: Vec<f64> = (0..=720).map(|k| acf(&y.mixing, k as f64)).collect();
    let af = fit_acf(&emp, &AcfFitOptions::default()).unwrap();
    let th = stationary_stats(&y).unwrap();
    let lf = fit_levy(&th, af.mixing, y.x_floor, 2.0, &LevyFitOptions::default(), &[]).unwrap();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let errs = [
        rel(lf.jump.a_nu, y.jump.a_nu),
        rel(lf.jump.b_nu, y.jump.b_nu),
        rel(lf.jump.alpha_nu, y.jump.alpha_nu),
        rel(af.mixing.b_pi, y.mixing.b_pi),
        rel(af.mixing.alpha_pi, y.mixing.alpha_pi),
    ];
    let exact_ok = lf.objective < 1e-8 && errs.iter().all(|&e| e < 1e-3);

    let ds = DischargeSeries::new(1.0, series).unwrap();
    let (sim_ok, sim_desc) = match fit_series(&ds, 2.0, &AcfFitOptions::default(), &LevyFitOptions::default()) {
        Ok(f) => {
            let (eb, ea) = (rel(f.model.mixing.b_pi, y.mixing.b_pi), rel(f.model.mixing.alpha_pi, y.mixing.alpha_pi));
            (
                eb <= 0.1 && ea <= 0.1,
                format!(
                    "simulate-then-fit (B, alpha) = ({:.4}, {:.3}) rel errors ({eb:.3}, {ea:.3})",
                    f.model.mixing.b_pi, f.model.mixing.alpha_pi
                ),
            )
        }
        Err(e) => (false, format!("simulate-then-fit failed: {e}")),
    };

    let mut p_ok = true;
    let mut p_desc = Vec::new();
    for s in Station::ALL {
        let m = station_model(s);
        let data = station_data_stats(s);
        let o = LevyFitOptions { seed: 10, ..Default::default() };
        let f2 = fit_levy(&data, m.mixing, m.x_floor, 2.0, &o, &[]).unwrap();
        let f1 = fit_levy(&data, m.mixing, m.x_floor, 1.0, &o, &[]).unwrap();
        p_ok &= f2.objective <= f1.objective;
        p_desc.push(format!("{} {:.2e} <= {:.2e}", s.name(), f2.objective, f1.objective));
    }
    let ok = exact_ok && sim_ok && p_ok;
    say(&format!(
        "criterion 10 {}: exact round trip objective {:.1e}, max parameter rel error {:.1e}; {sim_desc}; p=2 vs p=1 objectives {}",
        verdict(ok),
        lf.objective,
        errs.iter().fold(0.0f64, |m, &e| m.max(e)),
        p_desc.join(", ")
    ));
}

fn criterion_11(psd: &mut Psd) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 8;
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>() * 1.1;
    weights.iter_mut().for_each(|c| *c /= total);
    let mut rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.5)).collect();
    rates.sort_by(f64::total_cmp);
    let lift = MarkovianLift::from_points(weights, rates).unwrap();
    let model = SupOUModel::new(1.0, station_model(Station::D).jump, MixingParams::new(0.03, 2.5).unwrap()).unwrap();
    let target = Target::Sinusoid {
        mean: rng.random_range(8.0..15.0),
        cos_amp: rng.random_range(-3.0..3.0),
        sin_amp: rng.random_range(-3.0..3.0),
    };
    let p = ControlProblem::new(model, 48.0, target, StateWeight::unit(), 2.0).unwrap();
    let opts = SolverOptions {
        dt_rule: DtRule::Fixed { hours: 0.05 },
        tol: 1e-12,
        max_cycles: 400,
        ..Default::default()
    };
    let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
    psd.add(&sol);
    let (h, a0, b0, cycles) = solve_unweighted_reference(&p, &lift, &opts).unwrap();
    let snap = &sol.snapshots[0];
    let scale = a0.iter().chain(&b0).fold(0.0f64, |m, x| m.max(x.abs()));
    let max_diff = snap
        .a
        .iter()
        .zip(&a0)
        .chain(snap.b.iter().zip(&b0))
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0f64, f64::max);
    let dh = (sol.h - h).abs() / h.abs();
    let ok = dh <= 1e-12 && max_diff <= 1e-12 && cycles == sol.cycles;
    say(&format!(
        "criterion 11 {}: H rel diff {dh:.1e}, (A, B) rel diff {max_diff:.1e}, cycles {} vs {cycles}",
        verdict(ok),
        sol.cycles
    ));
}

#[test]
fn acceptance() {
    let mut psd = Psd {
        worst: f64::INFINITY,
        matrices: 0,
    };
    say("acceptance: criteria 1-11");
    criterion_1();
    let t = Instant::now();
    let t5 = mms_table(0.5, &mut psd);
    criterion_2(&t5, t.elapsed().as_secs_f64());
    let t2 = mms_table(0.2, &mut psd);
    let t8 = mms_table(0.8, &mut psd);
    criterion_3(&t2, &t5, &t8);
    criterion_4();
    criterion_6(&mut psd);
    let series = criterion_7();
    criterion_8(&mut psd);
    criterion_9(&mut psd);
    criterion_10(series);
    criterion_11(&mut psd);
    // every Riccati solve above fed the tracker, so this one is reported last
    say(&format!(
        "criterion 5 {}: min eigenvalue / max entry over {} stored A(t) = {:.2e} (limit -1e-8)",
        verdict(psd.worst >= -1e-8),
        psd.matrices,
        psd.worst
    ));
}
