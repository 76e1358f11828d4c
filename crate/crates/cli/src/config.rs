//! Run configuration: parsing, unit normalization and the canonical form
//! embedded in every output.
//!
//! Every dimensional input is a `{"value": .., "unit": ".."}` object. The
//! canonical form uses the same schema with hours, 1/h and m³/s, so it can be
//! fed back in unchanged.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use supou_lqc::data::{BinConfig, LoadOptions};
use supou_lqc::identify::{AcfFitOptions, LevyFitOptions};
use supou_lqc::lift::{LiftSpec, MarkovianLift};
use supou_lqc::mms::MmsConfig;
use supou_lqc::model::{ModelSpec, SupOUModel};
use supou_lqc::presets::{self, Station};
use supou_lqc::problem::{ControlProblem, StateWeight, Target, TemperatureWeight};
use supou_lqc::riccati::{DtRule, SolverOptions};
use supou_lqc::simulate::{RateDraw, Scheme, SimConfig};
use supou_lqc::units::{self, Quantity};
use supou_lqc::Error;

use crate::fail::Failure;

type Res<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone)]
pub enum LiftChoice {
    Mesh(LiftSpec),
    Points { weights: Vec<f64>, rates: Vec<f64> },
}

impl LiftChoice {
    pub fn build(&self, model: &SupOUModel) -> supou_lqc::Result<MarkovianLift> {
        match self {
            LiftChoice::Mesh(s) => s.build(&model.mixing),
            LiftChoice::Points { weights, rates } => MarkovianLift::from_points(weights.clone(), rates.clone()),
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        match self {
            LiftChoice::Mesh(s) => LiftChoice::Mesh(LiftSpec { n, ..*s }),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataChoice {
    pub path: PathBuf,
    pub load: LoadOptions,
}

#[derive(Debug, Clone)]
pub struct FitChoice {
    pub p_nu: f64,
    pub acf: AcfFitOptions,
    pub levy: LevyFitOptions,
}

/// Fully normalized run configuration (hours, 1/h, m³/s).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: SupOUModel,
    pub lift: LiftChoice,
    pub period: f64,
    pub target: Target,
    pub state_weight: StateWeight,
    pub w: f64,
    pub solver: SolverOptions,
    pub sim: SimConfig,
    pub controlled: bool,
    pub data: Option<DataChoice>,
    pub fit: FitChoice,
    pub weights: Vec<f64>,
    pub guarantee_factor: f64,
    pub mms: MmsConfig,
    pub mms_ns: Vec<usize>,
    pub charfn_u: Vec<f64>,
    pub charfn_ns: Vec<usize>,
    pub oracle_tol: f64,
    pub seed: u64,
    /// Human-readable record of each unit conversion applied.
    pub notes: Vec<String>,
}

fn cfg_err(msg: impl Into<String>) -> Failure {
    Failure::config(msg.into())
}

fn from_core(e: Error) -> Failure {
    Failure::from(e)
}

fn quantity(v: &Value, field: &str) -> Res<Quantity> {
    match v {
        Value::Object(m) => {
            let value = m
                .get("value")
                .and_then(Value::as_f64)
                .ok_or_else(|| cfg_err(format!("field `{field}`: `value` must be a number")))?;
            let unit = m
                .get("unit")
                .and_then(Value::as_str)
                .ok_or_else(|| cfg_err(format!("field `{field}`: missing unit annotation")))?;
            if unit.trim().is_empty() {
                return Err(cfg_err(format!("field `{field}`: missing unit annotation")));
            }
            Ok(Quantity::new(value, unit))
        }
        Value::Number(_) => Err(cfg_err(format!(
            "field `{field}`: missing unit annotation (write {{\"value\": {v}, \"unit\": \"..\"}})"
        ))),
        _ => Err(cfg_err(format!("field `{field}`: expected {{\"value\", \"unit\"}}"))),
    }
}

fn section<'a>(root: &'a Map<String, Value>, key: &str) -> Res<Option<&'a Map<String, Value>>> {
    match root.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m)),
        Some(_) => Err(cfg_err(format!("field `{key}` must be an object"))),
    }
}

fn check_keys(m: &Map<String, Value>, field: &str, allowed: &[&str]) -> Res<()> {
    for k in m.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(cfg_err(format!("unknown field `{field}.{k}` (expected one of {allowed:?})")));
        }
    }
    Ok(())
}

fn typed<T: serde::de::DeserializeOwned>(v: &Value, field: &str) -> Res<T> {
    serde_json::from_value(v.clone()).map_err(|e| cfg_err(format!("field `{field}`: {e}")))
}

fn num(m: &Map<String, Value>, key: &str, field: &str) -> Res<Option<f64>> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| cfg_err(format!("field `{field}.{key}` must be a number"))),
    }
}

fn count(m: &Map<String, Value>, key: &str, field: &str) -> Res<Option<usize>> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| cfg_err(format!("field `{field}.{key}` must be a non-negative integer"))),
    }
}

fn time(m: &Map<String, Value>, key: &str, field: &str, notes: &mut Vec<String>) -> Res<Option<f64>> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => {
            let name = format!("{field}.{key}");
            let q = quantity(v, &name)?;
            let h = units::time_to_hours(&q, &name).map_err(from_core)?;
            if q.unit.trim() != "h" {
                notes.push(format!("{name}: {} {} -> {h} h", q.value, q.unit));
            }
            Ok(Some(h))
        }
    }
}

fn parse_model(v: &Value, base: &Path, notes: &mut Vec<String>) -> Res<SupOUModel> {
    let m = v.as_object().ok_or_else(|| cfg_err("field `model` must be an object"))?;
    if let Some(s) = m.get("station") {
        check_keys(m, "model", &["station", "tempered"])?;
        let name = s.as_str().ok_or_else(|| cfg_err("field `model.station` must be a string"))?;
        let st = Station::parse(name).ok_or_else(|| cfg_err(format!("field `model.station`: unknown station `{name}`")))?;
        let tempered = m.get("tempered").and_then(Value::as_bool).unwrap_or(false);
        return Ok(if tempered {
            presets::station_model_tempered(st)
        } else {
            presets::station_model(st)
        });
    }
    if let Some(f) = m.get("file") {
        check_keys(m, "model", &["file"])?;
        let p = f.as_str().ok_or_else(|| cfg_err("field `model.file` must be a path"))?;
        let path = base.join(p);
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
        let inner: Value = serde_json::from_str(&text)
            .map_err(|e| cfg_err(format!("model file {}: {e}", path.display())))?;
        // a model file may itself be a fit output with the parameters under `model`
        let spec = inner.get("model").filter(|x| x.get("x_floor").is_some()).unwrap_or(&inner);
        return parse_model(spec, base, notes);
    }
    let fields = ["x_floor", "B_pi", "alpha_pi", "a_nu", "b_nu", "p_nu", "alpha_nu"];
    let q = |k: &str| -> Res<Quantity> {
        let v = m.get(k).ok_or_else(|| cfg_err(format!("field `model.{k}`: missing")))?;
        quantity(v, &format!("model.{k}"))
    };
    for k in m.keys() {
        // outputs embed `config` and `seed` next to the parameters
        if !fields.contains(&k.as_str()) && k != "config" && k != "seed" {
            return Err(cfg_err(format!("unknown field `model.{k}`")));
        }
    }
    let spec = ModelSpec {
        x_floor: q("x_floor")?,
        b_pi: q("B_pi")?,
        alpha_pi: q("alpha_pi")?,
        a_nu: q("a_nu")?,
        b_nu: q("b_nu")?,
        p_nu: q("p_nu")?,
        alpha_nu: q("alpha_nu")?,
    };
    for (name, qq) in [("B_pi", &spec.b_pi), ("a_nu", &spec.a_nu)] {
        let u = qq.unit.trim();
        if !(u == "1/h" || u == "h^-1" || u.ends_with("/h")) {
            notes.push(format!("model.{name}: {} {} converted to per hour", qq.value, qq.unit));
        }
    }
    spec.to_model().map_err(from_core)
}

fn parse_lift(m: Option<&Map<String, Value>>, notes: &mut Vec<String>) -> Res<LiftChoice> {
    let Some(m) = m else {
        return Ok(LiftChoice::Mesh(LiftSpec::default()));
    };
    check_keys(m, "lift", &["n", "beta", "eta_bar", "weights", "rates"])?;
    if m.contains_key("weights") || m.contains_key("rates") {
        let weights: Vec<f64> = typed(m.get("weights").unwrap_or(&Value::Null), "lift.weights")?;
        let r = m.get("rates").ok_or_else(|| cfg_err("field `lift.rates`: missing"))?;
        let ro = r.as_object().ok_or_else(|| cfg_err("field `lift.rates`: expected {\"values\", \"unit\"}"))?;
        let values: Vec<f64> = typed(ro.get("values").unwrap_or(&Value::Null), "lift.rates.values")?;
        let unit = ro
            .get("unit")
            .and_then(Value::as_str)
            .ok_or_else(|| cfg_err("field `lift.rates`: missing unit annotation"))?;
        let rates = values
            .iter()
            .map(|&v| units::rate_to_per_hour(&Quantity::new(v, unit), "lift.rates"))
            .collect::<supou_lqc::Result<Vec<f64>>>()
            .map_err(from_core)?;
        return Ok(LiftChoice::Points { weights, rates });
    }
    let mut s = LiftSpec::default();
    if let Some(n) = count(m, "n", "lift")? {
        s.n = n;
    }
    if let Some(b) = num(m, "beta", "lift")? {
        s.beta = b;
    }
    if let Some(v) = m.get("eta_bar") {
        let q = quantity(v, "lift.eta_bar")?;
        s.eta_bar = units::rate_to_per_hour(&q, "lift.eta_bar").map_err(from_core)?;
        if q.unit.trim() != "1/h" {
            notes.push(format!("lift.eta_bar: {} {} -> {} 1/h", q.value, q.unit, s.eta_bar));
        }
    } else {
        notes.push("lift.eta_bar: default 0.02 read as 1/h".into());
    }
    Ok(LiftChoice::Mesh(s))
}

impl RunConfig {
    /// Defaults with the Station Y model.
    pub fn defaults() -> Self {
        Self {
            model: presets::station_model(Station::Y),
            lift: LiftChoice::Mesh(LiftSpec::default()),
            period: presets::YEAR_HOURS,
            target: Target::Constant {
                value: presets::APPLICATION_TARGET,
            },
            state_weight: StateWeight::Temperature(TemperatureWeight::default()),
            w: 1.0,
            solver: SolverOptions::default(),
            sim: SimConfig::default(),
            controlled: false,
            data: None,
            fit: FitChoice {
                p_nu: 2.0,
                acf: AcfFitOptions::default(),
                levy: LevyFitOptions::default(),
            },
            weights: supou_lqc::kbe::default_weights(1),
            guarantee_factor: presets::GUARANTEE_FACTOR,
            mms: MmsConfig::default(),
            mms_ns: vec![10, 20, 40, 80],
            charfn_u: vec![0.5, 1.0, 2.0],
            charfn_ns: vec![10, 20, 40, 80],
            oracle_tol: 1e-3,
            seed: 0,
            notes: Vec::new(),
        }
    }

    /// Reads and normalizes a config file. Relative paths resolve against its directory.
    pub fn load(path: &Path) -> Res<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_value(&v, base)
    }

    pub fn from_value(v: &Value, base: &Path) -> Res<Self> {
        let root = v.as_object().ok_or_else(|| cfg_err("config must be a JSON object"))?;
        check_keys(
            root,
            "config",
            &[
                "model", "lift", "problem", "solver", "simulation", "data", "fit", "frontier", "mms", "charfn",
                "oracle", "seed", "normalization",
            ],
        )?;
        let mut c = Self::defaults();
        let notes = &mut c.notes;
        if let Some(m) = root.get("model") {
            c.model = parse_model(m, base, notes)?;
        }
        c.lift = parse_lift(section(root, "lift")?, notes)?;

        if let Some(p) = section(root, "problem")? {
            check_keys(p, "problem", &["period", "target", "state_weight", "w"])?;
            if let Some(h) = time(p, "period", "problem", notes)? {
                c.period = h;
            }
            if let Some(t) = p.get("target") {
                c.target = typed(t, "problem.target")?;
            }
            if let Some(s) = p.get("state_weight") {
                c.state_weight = typed(s, "problem.state_weight")?;
            }
            if let Some(w) = num(p, "w", "problem")? {
                c.w = w;
            }
        }

        if let Some(s) = section(root, "solver")? {
            check_keys(s, "solver", &["dt", "tol", "max_cycles", "snapshots"])?;
            match s.get("dt") {
                None | Some(Value::Null) => {}
                Some(Value::String(r)) => c.solver.dt_rule = DtRule::parse(r).map_err(from_core)?,
                Some(_) => {
                    let h = time(s, "dt", "solver", notes)?.unwrap();
                    c.solver.dt_rule = DtRule::Fixed { hours: h };
                }
            }
            if let Some(t) = num(s, "tol", "solver")? {
                c.solver.tol = t;
            }
            if let Some(k) = count(s, "max_cycles", "solver")? {
                c.solver.max_cycles = k;
            }
            if let Some(k) = count(s, "snapshots", "solver")? {
                c.solver.snapshots = k;
            }
        }

        if let Some(s) = section(root, "simulation")? {
            check_keys(
                s,
                "simulation",
                &["dt", "horizon", "n_paths", "obs_step", "burn_in", "rate_draw", "histogram", "controlled", "keep_series"],
            )?;
            if let Some(h) = time(s, "dt", "simulation", notes)? {
                c.sim.dt = h;
            }
            if let Some(h) = time(s, "horizon", "simulation", notes)? {
                c.sim.horizon = h;
            }
            if let Some(h) = time(s, "obs_step", "simulation", notes)? {
                c.sim.obs_step = h;
            }
            c.sim.burn_in = time(s, "burn_in", "simulation", notes)?;
            if let Some(k) = count(s, "n_paths", "simulation")? {
                c.sim.n_paths = k;
            }
            if let Some(r) = s.get("rate_draw") {
                let rate_draw: RateDraw = typed(r, "simulation.rate_draw")?;
                c.sim.scheme = Scheme::Uncontrolled { rate_draw };
            }
            if let Some(h) = s.get("histogram") {
                c.sim.histogram = Some(typed::<BinConfig>(h, "simulation.histogram")?);
            }
            c.controlled = s.get("controlled").and_then(Value::as_bool).unwrap_or(false);
            c.sim.keep_series = s.get("keep_series").and_then(Value::as_bool).unwrap_or(false);
        }

        if let Some(d) = section(root, "data")? {
            check_keys(d, "data", &["path", "step", "interpolate_gaps", "max_gap"])?;
            let p = d
                .get("path")
                .and_then(Value::as_str)
                .ok_or_else(|| cfg_err("field `data.path`: missing"))?;
            let mut load = LoadOptions {
                step: time(d, "step", "data", notes)?,
                ..LoadOptions::default()
            };
            load.interpolate_gaps = d.get("interpolate_gaps").and_then(Value::as_bool).unwrap_or(false);
            if let Some(h) = time(d, "max_gap", "data", notes)? {
                load.max_gap_hours = h;
            }
            c.data = Some(DataChoice {
                path: base.join(p),
                load,
            });
        }

        if let Some(f) = section(root, "fit")? {
            check_keys(f, "fit", &["p_nu", "max_lag", "restarts", "tol", "max_iter"])?;
            if let Some(p) = num(f, "p_nu", "fit")? {
                c.fit.p_nu = p;
            }
            if let Some(h) = time(f, "max_lag", "fit", notes)? {
                c.fit.acf.max_lag = h.round() as usize;
            }
            if let Some(r) = count(f, "restarts", "fit")? {
                c.fit.levy.restarts = r;
            }
            if let Some(t) = num(f, "tol", "fit")? {
                c.fit.acf.tol = t;
                c.fit.levy.tol = t;
            }
            if let Some(k) = count(f, "max_iter", "fit")? {
                c.fit.acf.max_iter = k;
                c.fit.levy.max_iter = k;
            }
        }

        if let Some(f) = section(root, "frontier")? {
            check_keys(f, "frontier", &["weights", "factor"])?;
            if let Some(w) = f.get("weights") {
                c.weights = typed(w, "frontier.weights")?;
            }
            if let Some(x) = num(f, "factor", "frontier")? {
                c.guarantee_factor = x;
            }
        }

        if let Some(m) = section(root, "mms")? {
            check_keys(m, "mms", &["n", "coefficients"])?;
            if let Some(n) = m.get("n") {
                c.mms_ns = typed(n, "mms.n")?;
            }
            if let Some(k) = m.get("coefficients") {
                c.mms = typed(k, "mms.coefficients")?;
            }
        }

        if let Some(m) = section(root, "charfn")? {
            check_keys(m, "charfn", &["u", "n"])?;
            if let Some(u) = m.get("u") {
                c.charfn_u = typed(u, "charfn.u")?;
            }
            if let Some(n) = m.get("n") {
                c.charfn_ns = typed(n, "charfn.n")?;
            }
        }

        if let Some(m) = section(root, "oracle")? {
            check_keys(m, "oracle", &["tol"])?;
            if let Some(t) = num(m, "tol", "oracle")? {
                c.oracle_tol = t;
            }
        }

        if let Some(s) = root.get("seed") {
            c.seed = s.as_u64().ok_or_else(|| cfg_err("field `seed` must be a non-negative integer"))?;
        }
        Ok(c)
    }

    /// Applies the seed to every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn problem(&self) -> Res<ControlProblem> {
        ControlProblem::new(self.model, self.period, self.target.clone(), self.state_weight.clone(), self.w)
            .map_err(from_core)
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut s = self.sim;
        s.seed = self.seed;
        if self.controlled {
            s.scheme = Scheme::ControlledLift;
        }
        s
    }

    pub fn levy_options(&self) -> LevyFitOptions {
        LevyFitOptions {
            seed: self.seed,
            ..self.fit.levy
        }
    }

    /// Canonical form in the input schema; loading it reproduces this config.
    pub fn canonical(&self) -> Value {
        let h = |x: f64| json!({"value": x, "unit": "h"});
        let lift = match &self.lift {
            LiftChoice::Mesh(s) => json!({"n": s.n, "beta": s.beta, "eta_bar": {"value": s.eta_bar, "unit": "1/h"}}),
            LiftChoice::Points { weights, rates } => {
                json!({"weights": weights, "rates": {"values": rates, "unit": "1/h"}})
            }
        };
        let dt = match self.solver.dt_rule {
            DtRule::InverseN => json!("1/n"),
            DtRule::Fixed { hours } => h(hours),
        };
        let mut sim = json!({
            "dt": h(self.sim.dt),
            "horizon": h(self.sim.horizon),
            "n_paths": self.sim.n_paths,
            "obs_step": h(self.sim.obs_step),
            "controlled": self.controlled,
            "keep_series": self.sim.keep_series,
        });
        if let Some(b) = self.sim.burn_in {
            sim["burn_in"] = h(b);
        }
        if let Scheme::Uncontrolled { rate_draw } = self.sim.scheme {
            sim["rate_draw"] = serde_json::to_value(rate_draw).unwrap();
        }
        if let Some(hist) = self.sim.histogram {
            sim["histogram"] = serde_json::to_value(hist).unwrap();
        }
        let mut out = json!({
            "model": serde_json::to_value(ModelSpec::from_model(&self.model)).unwrap(),
            "lift": lift,
            "problem": {
                "period": h(self.period),
                "target": self.target,
                "state_weight": self.state_weight,
                "w": self.w,
            },
            "solver": {
                "dt": dt,
                "tol": self.solver.tol,
                "max_cycles": self.solver.max_cycles,
                "snapshots": self.solver.snapshots,
            },
            "simulation": sim,
            "fit": {
                "p_nu": self.fit.p_nu,
                "max_lag": h(self.fit.acf.max_lag as f64),
                "restarts": self.fit.levy.restarts,
                "tol": self.fit.levy.tol,
                "max_iter": self.fit.levy.max_iter,
            },
            "frontier": {"weights": self.weights, "factor": self.guarantee_factor},
            "mms": {"n": self.mms_ns, "coefficients": self.mms},
            "charfn": {"u": self.charfn_u, "n": self.charfn_ns},
            "oracle": {"tol": self.oracle_tol},
            "seed": self.seed,
            "normalization": self.notes,
        });
        if let Some(d) = &self.data {
            let mut dv = json!({
                "path": d.path.display().to_string(),
                "interpolate_gaps": d.load.interpolate_gaps,
                "max_gap": h(d.load.max_gap_hours),
            });
            if let Some(s) = d.load.step {
                dv["step"] = h(s);
            }
            out["data"] = dv;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(v: Value) -> Res<RunConfig> {
        RunConfig::from_value(&v, Path::new("."))
    }

    #[test]
    fn rate_in_per_hour_kept() {
        let c = parse(json!({"model": {
            "x_floor": {"value": 1.28, "unit": "m3/s"},
            "B_pi": {"value": 0.0344, "unit": "1/h"},
            "alpha_pi": {"value": 2.17, "unit": "-"},
            "a_nu": {"value": 0.0127, "unit": "(m3/s)^alpha/h"},
            "b_nu": {"value": 2.33e-6, "unit": "(s/m3)^p"},
            "p_nu": {"value": 2.0, "unit": "-"},
            "alpha_nu": {"value": 0.408, "unit": "-"}
        }}))
        .unwrap();
        assert_eq!(c.model.mixing.b_pi, 0.0344);
    }

    #[test]
    fn period_in_days() {
        let c = parse(json!({"problem": {"period": {"value": 365.25, "unit": "day"}}})).unwrap();
        assert_eq!(c.period, 8766.0);
        assert!(c.notes.iter().any(|n| n.contains("problem.period")));
    }

    #[test]
    fn bare_eta_bar_rejected() {
        let e = parse(json!({"lift": {"eta_bar": 0.02}})).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.msg.contains("lift.eta_bar"), "{}", e.msg);
    }

    #[test]
    fn missing_model_field_named() {
        let e = parse(json!({"model": {"x_floor": {"value": 1.0, "unit": "m3/s"}}})).unwrap_err();
        assert!(e.msg.contains("model.B_pi"), "{}", e.msg);
    }

    #[test]
    fn unknown_field_rejected() {
        assert_eq!(parse(json!({"lfit": {}})).unwrap_err().code, 2);
    }

    #[test]
    fn canonical_round_trip() {
        let mut c = parse(json!({
            "model": {"station": "D"},
            "lift": {"n": 12, "eta_bar": {"value": 0.48, "unit": "1/day"}},
            "problem": {"period": {"value": 2, "unit": "day"}, "w": 3.0},
            "solver": {"dt": {"value": 30, "unit": "min"}},
            "simulation": {"horizon": {"value": 1, "unit": "yr"}, "burn_in": {"value": 10, "unit": "h"}}
        }))
        .unwrap();
        c.set_seed(9);
        let v = c.canonical();
        let back = parse(v.clone()).unwrap();
        assert_eq!(back.canonical()["model"], v["model"]);
        assert_eq!(back.model, c.model);
        assert_eq!(back.period, 48.0);
        assert_eq!(back.solver, c.solver);
        assert_eq!(back.sim, c.sim);
        assert_eq!(back.seed, 9);
        match back.lift {
            LiftChoice::Mesh(s) => assert!((s.eta_bar - 0.02).abs() < 1e-15),
            _ => panic!(),
        }
    }
}
