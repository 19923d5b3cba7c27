//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string, so the page needs no generated type glue beyond `wasm-bindgen`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use islm_core::dynamics::{attribute_jumps, detect_cycle, CycleSummary, JumpEvent, Mode, Trajectory};
use islm_core::geometry::{
    equilibria_on, is_curve, shift_lm, trace_lm_isocline, Domain, Equilibrium, FoldKind, FoldPoint, LmIsocline,
};
use islm_core::io::config::RunConfig;
use islm_core::policy::{
    apply_scenario, plan_stabilization, run_with_controller, FiscalRamp, Instrument, RunSettings, Scenario,
};
use islm_core::{presets, ModelSpec};

/// Most points sent to the page per trajectory.
const MAX_POINTS: usize = 3000;

#[derive(Serialize)]
pub struct Economy {
    pub domain: Domain,
    pub isocline: LmIsocline,
    /// IS line endpoints `[[y, r], [y, r]]`.
    pub is_line: [[f64; 2]; 2],
    pub equilibria: Vec<Equilibrium>,
}

#[derive(Serialize)]
pub struct Run {
    pub economy: Economy,
    pub points: Vec<[f64; 3]>,
    pub jumps: Vec<JumpEvent>,
    pub cycle: Option<CycleSummary>,
}

#[derive(Serialize)]
pub struct Stabilized {
    pub economy: Economy,
    pub fold: FoldPoint,
    pub instrument: Instrument,
    pub delta: f64,
    pub uncontrolled: Vec<[f64; 3]>,
    pub controlled: Vec<[f64; 3]>,
    pub jumps_uncontrolled: usize,
    pub jumps_controlled: usize,
    pub max_deviation: f64,
}

fn preset(name: &str) -> Result<(ModelSpec, RunConfig), String> {
    let text = match name {
        "reference" => presets::REFERENCE_TOML,
        "reference_fiscal" => presets::REFERENCE_FISCAL_TOML,
        "no_trap" => presets::NO_TRAP_TOML,
        "twice_bent" => presets::TWICE_BENT_TOML,
        "thrice_bent" => presets::THRICE_BENT_TOML,
        other => return Err(format!("unknown economy `{other}`")),
    };
    let cfg = RunConfig::from_toml(text, name).map_err(|e| e.to_string())?;
    let spec = cfg.model.clone().ok_or("preset has no model")?;
    Ok((spec, cfg))
}

/// Preset with the policy shifts applied.
fn economy_spec(name: &str, g: f64, d_pi: f64, d_ms: f64) -> Result<(ModelSpec, RunConfig), String> {
    let (spec, cfg) = preset(name)?;
    let spec = shift_lm(&spec.with_fiscal_shift(g), d_pi, d_ms).map_err(|e| e.to_string())?;
    Ok((spec, cfg))
}

fn economy(spec: &ModelSpec, cfg: &RunConfig) -> Result<Economy, String> {
    let domain = cfg.domain;
    let isocline = trace_lm_isocline(spec, &domain, &cfg.isocline).map_err(|e| e.to_string())?;
    let is = is_curve(spec, &domain);
    let equilibria = equilibria_on(spec, &isocline, &cfg.isocline);
    Ok(Economy {
        domain,
        is_line: [[domain.y_min, is.rate(domain.y_min)], [domain.y_max, is.rate(domain.y_max)]],
        isocline,
        equilibria,
    })
}

/// Drop samples closer than a small fraction of the domain to the last kept
/// one, so jumps survive and slow drift is sparse.
pub fn thin(traj: &Trajectory, domain: &Domain) -> Vec<[f64; 3]> {
    let s = &traj.samples;
    if s.is_empty() {
        return Vec::new();
    }
    let (wy, wr) = (domain.y_max - domain.y_min, domain.r_max - domain.r_min);
    let mut step = 1.0 / MAX_POINTS as f64;
    loop {
        let mut out = vec![[s[0].t, s[0].y, s[0].r]];
        for p in &s[1..] {
            let last = out[out.len() - 1];
            if ((p.y - last[1]) / wy).abs() > step || ((p.r - last[2]) / wr).abs() > step {
                out.push([p.t, p.y, p.r]);
            }
        }
        let end = s[s.len() - 1];
        out.push([end.t, end.y, end.r]);
        if out.len() <= MAX_POINTS {
            return out;
        }
        step *= 2.0;
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializes")
}

/// Isocline, IS line and equilibria of a shipped economy after a fiscal
/// shift `g`, an inflation step `d_pi` and a money-stock step `d_ms`.
pub fn trace_json(name: &str, g: f64, d_pi: f64, d_ms: f64) -> Result<String, String> {
    let (spec, cfg) = economy_spec(name, g, d_pi, d_ms)?;
    Ok(to_json(&economy(&spec, &cfg)?))
}

/// Simulate from `(y0, r0)`; `mode` is `full` or `reduced`. `t_slow` is in
/// slow time, so the same slider works for every `epsilon`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_json(
    name: &str,
    g: f64,
    d_pi: f64,
    d_ms: f64,
    epsilon: f64,
    mode: &str,
    y0: f64,
    r0: f64,
    t_slow: f64,
) -> Result<String, String> {
    let (mut spec, cfg) = economy_spec(name, g, d_pi, d_ms)?;
    spec.params.epsilon = epsilon;
    spec.validate().map_err(|e| e.to_string())?;
    let mode: Mode = mode.parse()?;
    let mut set = RunSettings::new(mode, cfg.domain);
    set.integrate = cfg.simulate.solver;
    set.detect = cfg.detect;
    let scenario = Scenario {
        horizon: t_slow / epsilon,
        steps: Vec::new(),
    };
    let run = apply_scenario(&spec, &scenario, y0, r0, &set).map_err(|e| e.to_string())?;
    let eco = economy(&spec, &cfg)?;
    let mut jumps = run.jumps;
    attribute_jumps(&spec, &eco.isocline, &mut jumps);
    let cycle = detect_cycle(&run.trajectory, &set.detect);
    Ok(to_json(&Run {
        points: thin(&run.trajectory, &cfg.domain),
        economy: eco,
        jumps,
        cycle,
    }))
}

/// Ramp income from `y_start` to `y_end` across a fold, with and without an
/// inflation step planned to keep the rate from jumping.
pub fn stabilize_json(name: &str, y_start: f64, y_end: f64, duration: f64, mode: &str) -> Result<String, String> {
    let (spec, cfg) = preset(name)?;
    let mode: Mode = mode.parse()?;
    let eco = economy(&spec, &cfg)?;
    let rising = y_end > y_start;
    let kind = if rising { FoldKind::LowerKnee } else { FoldKind::UpperKnee };
    let (lo, hi) = if rising { (y_start, y_end) } else { (y_end, y_start) };
    let fold = eco
        .isocline
        .folds
        .iter()
        .filter(|f| f.kind == kind && f.y > lo && f.y < hi)
        .min_by(|a, b| (a.y - y_start).abs().total_cmp(&(b.y - y_start).abs()))
        .copied()
        .ok_or("the ramp crosses no fold in its direction")?;
    let plan = plan_stabilization(&spec, &cfg.domain, &fold, Instrument::Inflation, cfg.stabilize.margin)
        .map_err(|e| e.to_string())?;
    let mut set = RunSettings::new(mode, cfg.domain);
    set.integrate = cfg.simulate.solver;
    set.detect = cfg.detect;
    let ramp = FiscalRamp {
        y_start,
        y_end,
        duration,
        settle: 0.25 * duration,
    };
    let rep = run_with_controller(&spec, &ramp, &plan, &set).map_err(|e| e.to_string())?;
    Ok(to_json(&Stabilized {
        fold,
        instrument: plan.instrument,
        delta: plan.delta,
        uncontrolled: thin(&rep.uncontrolled.trajectory, &cfg.domain),
        controlled: thin(&rep.controlled.trajectory, &cfg.domain),
        jumps_uncontrolled: rep.uncontrolled.jump_count,
        jumps_controlled: rep.controlled.jump_count,
        max_deviation: rep.max_deviation,
        economy: eco,
    }))
}

#[wasm_bindgen]
pub fn trace(name: &str, g: f64, d_pi: f64, d_ms: f64) -> Result<String, JsError> {
    trace_json(name, g, d_pi, d_ms).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    name: &str,
    g: f64,
    d_pi: f64,
    d_ms: f64,
    epsilon: f64,
    mode: &str,
    y0: f64,
    r0: f64,
    t_slow: f64,
) -> Result<String, JsError> {
    simulate_json(name, g, d_pi, d_ms, epsilon, mode, y0, r0, t_slow).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn stabilize(name: &str, y_start: f64, y_end: f64, duration: f64, mode: &str) -> Result<String, JsError> {
    stabilize_json(name, y_start, y_end, duration, mode).map_err(|e| JsError::new(&e))
}
