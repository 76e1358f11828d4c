//! Riccati and KBE solvers against hand-derived fixed points and a literal reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supou_lqc::kbe::{self, solve_periodic_kbe};
use supou_lqc::lift::{build_lift, MarkovianLift};
use supou_lqc::model::{JumpMeasureParams, MixingParams, SupOUModel};
use supou_lqc::presets::{station_model, Station};
use supou_lqc::problem::{ControlProblem, StateWeight, Target};
use supou_lqc::riccati::{self, solve_periodic_riccati, solve_unweighted_reference, DtRule, SolverOptions};

fn point_mass_problem(period: f64) -> (ControlProblem, MarkovianLift) {
    let model = SupOUModel::new(0.0, JumpMeasureParams::null(), MixingParams::new(1.0, 2.0).unwrap()).unwrap();
    let p = ControlProblem::new(model, period, Target::Constant { value: 1.0 }, StateWeight::unit(), 1.0).unwrap();
    let lift = MarkovianLift::from_points(vec![1.0], vec![1.0]).unwrap();
    (p, lift)
}

fn fine(dt: f64) -> SolverOptions {
    SolverOptions {
        dt_rule: DtRule::Fixed { hours: dt },
        tol: 1e-13,
        ..Default::default()
    }
}

// With λ = c = w = X̂ = 1 and no jumps the stationary system is
// 2A + A² = 1, (1 + A)B = −1, so A = √2 − 1, B = −1/√2 and H = X̄²/2 − B²/2 = 1/4.
// Any Euler step size keeps this fixed point because the right-hand side vanishes there.
#[test]
fn point_mass_fixed_point() {
    let (p, lift) = point_mass_problem(40.0);
    let sol = solve_periodic_riccati(&p, &lift, &fine(0.01)).unwrap();
    let a = 2f64.sqrt() - 1.0;
    let b = -1.0 / 2f64.sqrt();
    assert!((sol.terminal_a[0] - a).abs() < 1e-10);
    assert!((sol.terminal_b[0] - b).abs() < 1e-10);
    assert!((sol.h - 0.25).abs() < 1e-10);
    let (d, cb) = sol.feedback_at(13.0);
    assert!((d[0] - a).abs() < 1e-10 && (cb - b).abs() < 1e-10);
}

// Closed loop: x' = −x + u, u = −(A x + B) ⇒ x* = −B/(1 + A) = 1/2, u* = 1/2.
// KBE fixed point: 2S + 2AS − A² = 0 and (1 + A)N + BS − BA = 0, so
// S = A²/(2(1 + A)), N = B(A − S)/(1 + A); the cost C = u*²/2 = 1/8.
#[test]
fn point_mass_controlling_cost() {
    let (p, lift) = point_mass_problem(40.0);
    let opts = fine(0.01);
    let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
    let k = solve_periodic_kbe(&sol, &p, &lift, &opts).unwrap();
    let a = 2f64.sqrt() - 1.0;
    let b = -1.0 / 2f64.sqrt();
    let s = a * a / (2.0 * (1.0 + a));
    let n = b * (a - s) / (1.0 + a);
    assert!((k.s0[0] - s).abs() < 1e-10, "S = {}", k.s0[0]);
    assert!((k.n0[0] - n).abs() < 1e-10, "N = {}", k.n0[0]);
    assert!((k.c - 0.125).abs() < 1e-10);
    assert!((s - 0.06066).abs() < 1e-5 && (n + 0.17678).abs() < 1e-5);
    // deviation part equals (x* − X̂)²/2 = 1/8
    assert!((sol.h - p.w * k.c - 0.125).abs() < 1e-10);
}

#[test]
fn kbe_with_and_without_dense_feedback_agree() {
    let m = station_model(Station::Y);
    let lift = build_lift(&m.mixing, 4, 0.5, 0.02).unwrap();
    let p = ControlProblem::application(m, 3.0, 0.0).unwrap();
    let base = SolverOptions {
        dt_rule: DtRule::Fixed { hours: 1.0 },
        ..Default::default()
    };
    let dense = SolverOptions { keep_feedback: true, ..base };
    let s1 = solve_periodic_riccati(&p, &lift, &base).unwrap();
    let s2 = solve_periodic_riccati(&p, &lift, &dense).unwrap();
    let k1 = solve_periodic_kbe(&s1, &p, &lift, &base).unwrap();
    let k2 = solve_periodic_kbe(&s2, &p, &lift, &dense).unwrap();
    assert!((k1.c - k2.c).abs() <= 1e-9 * k1.c.abs().max(1.0), "{} vs {}", k1.c, k2.c);
    assert!((kbe::controlling_cost(&k1, &s1, &p) - k1.c).abs() < 1e-9 * k1.c.abs().max(1.0));
}

fn random_problem(seed: u64, n: usize) -> (ControlProblem, MarkovianLift) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>() * rng.random_range(1.0..1.3);
    weights.iter_mut().for_each(|c| *c /= total);
    let mut rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.5)).collect();
    rates.sort_by(f64::total_cmp);
    let lift = MarkovianLift::from_points(weights, rates).unwrap();
    let jump = JumpMeasureParams::new(
        rng.random_range(0.005..0.05),
        rng.random_range(1e-3..1.0),
        if rng.random::<bool>() { 1.0 } else { 2.0 },
        rng.random_range(-0.5..0.8),
    )
    .unwrap();
    let model = SupOUModel::new(rng.random_range(0.0..2.0), jump, MixingParams::new(0.03, 2.5).unwrap()).unwrap();
    let target = Target::Sinusoid {
        mean: rng.random_range(8.0..15.0),
        cos_amp: rng.random_range(-3.0..3.0),
        sin_amp: rng.random_range(-3.0..3.0),
    };
    let p = ControlProblem::new(model, 48.0, target, StateWeight::unit(), rng.random_range(0.1..10.0)).unwrap();
    (p, lift)
}

// The weighted-coefficient solver with w′ ≡ 1 against the equations written out literally.
#[test]
fn unit_weight_matches_literal_equations() {
    for seed in 0..3 {
        let (p, lift) = random_problem(seed, 8);
        let opts = SolverOptions {
            dt_rule: DtRule::Fixed { hours: 0.05 },
            tol: 1e-12,
            max_cycles: 400,
            ..Default::default()
        };
        let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
        let (h, a0, b0, cycles) = solve_unweighted_reference(&p, &lift, &opts).unwrap();
        assert_eq!(sol.cycles, cycles);
        assert!((sol.h - h).abs() <= 1e-12 * h.abs(), "seed {seed}: {} vs {h}", sol.h);
        let snap = &sol.snapshots[0];
        assert_eq!(snap.k, 0);
        let scale = a0.iter().chain(&b0).fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in snap.a.iter().zip(&a0).chain(snap.b.iter().zip(&b0)) {
            assert!((x - y).abs() <= 1e-12 * scale, "seed {seed}: {x} vs {y}");
        }
    }
}

#[test]
fn quadratic_coefficient_stays_psd() {
    let m = station_model(Station::Y);
    let lift = build_lift(&m.mixing, 12, 0.5, 0.02).unwrap();
    for w in [0.01, 1.0, 100.0] {
        let p = ControlProblem::application(m, w, 0.0).unwrap();
        let opts = SolverOptions {
            dt_rule: DtRule::Fixed { hours: 0.05 },
            ..Default::default()
        };
        let sol = solve_periodic_riccati(&p, &lift, &opts).unwrap();
        for (t, min, norm) in riccati::psd_report(&sol) {
            assert!(min >= -1e-8 * norm, "w = {w}, t = {t}: min eig {min}, norm {norm}");
        }
    }
}

#[test]
fn frontier_identities_and_monotonicity() {
    let m = station_model(Station::U);
    let lift = build_lift(&m.mixing, 6, 0.5, 0.02).unwrap();
    let p = ControlProblem::application(m, 1.0, 0.0).unwrap();
    let opts = SolverOptions {
        dt_rule: DtRule::Fixed { hours: 0.05 },
        ..Default::default()
    };
    let ws = kbe::default_weights(20);
    let (pts, fails) = kbe::frontier(&p, &lift, &ws, &opts);
    assert!(fails.is_empty());
    assert_eq!(pts.len(), ws.len());
    for q in &pts {
        assert!((q.j - (q.d + q.w * q.c)).abs() <= 1e-12 * q.j);
        assert!(q.c > 0.0 && q.d > 0.0);
    }
    // sorted by C: w decreasing, D decreasing, J decreasing
    for pair in pts.windows(2) {
        assert!(pair[1].c > pair[0].c);
        assert!(pair[1].w < pair[0].w);
        assert!(pair[1].d < pair[0].d);
        assert!(pair[1].j < pair[0].j);
    }
    assert!(kbe::convexity_margin(&pts) >= -1e-6);
}

#[test]
fn crossing_interpolates_between_points() {
    let pts = [
        kbe::FrontierPoint { w: 10.0, j: 0.0, c: 1.0, d: 8.0 },
        kbe::FrontierPoint { w: 1.0, j: 0.0, c: 4.0, d: 2.0 },
    ];
    // log-log line through (1, 8) and (4, 2): D = 8/C
    let (w, c) = kbe::guarantee_crossing(&pts, 1.0, 4.0).unwrap();
    assert!((c - 2.0).abs() < 1e-12);
    assert!((w - 10f64.sqrt()).abs() < 1e-12);
    assert!(kbe::guarantee_crossing(&pts, 1.0, 100.0).is_err());
}

#[test]
fn mismatched_inputs_rejected() {
    let (p, lift) = point_mass_problem(10.0);
    let sol = solve_periodic_riccati(&p, &lift, &fine(0.1)).unwrap();
    let other = MarkovianLift::from_points(vec![0.5], vec![1.0]).unwrap();
    assert!(solve_periodic_kbe(&sol, &p, &other, &fine(0.1)).is_err());
    assert!(solve_periodic_kbe(&sol, &p, &lift, &fine(0.05)).is_err());
    assert!(solve_periodic_kbe(&sol, &p.with_w(2.0), &lift, &fine(0.1)).is_err());
}
