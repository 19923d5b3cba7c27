//! Timed fiscal and monetary interventions and the fold-jump stabiliser.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    attribute_jumps, detect_cycle, detect_jumps_with, ArcMap, DetectOptions, IntegrateOptions, JumpEvent,
    Mode, Simulator, Trajectory,
};
use crate::error::{Error, Result};
use crate::geometry::{
    equilibria_on, is_curve, shift_lm, trace_lm_isocline, Classification, Domain, Equilibrium, FoldKind,
    FoldPoint, LmIsocline, TraceOptions,
};
use crate::model::ModelSpec;
use crate::roots::{bisect, bisect_predicate};
use crate::validate::validate_properties;

/// One intervention. Times and durations are in fast time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Prescribe income: linear from its current value to `y_target` over
    /// `duration`, held afterwards for the rest of the run.
    FiscalDrive { at: f64, y_target: f64, duration: f64 },
    /// Add `g` to the goods-market excess `I − S`.
    FiscalShift { at: f64, g: f64 },
    /// Change expected inflation and/or the money stock.
    MonetaryStep {
        at: f64,
        #[serde(default)]
        d_pi: f64,
        #[serde(default)]
        d_ms: f64,
    },
}

impl Step {
    pub fn at(&self) -> f64 {
        match *self {
            Step::FiscalDrive { at, .. } | Step::FiscalShift { at, .. } | Step::MonetaryStep { at, .. } => at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub horizon: f64,
    #[serde(default)]
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) {
            return Err(Error::param("scenario.horizon", "must be non-negative"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (k, step) in self.steps.iter().enumerate() {
            let at = step.at();
            let field = |name: &str| format!("scenario.steps[{k}].{name}");
            if !(at >= 0.0 && at <= self.horizon) {
                return Err(Error::param(field("at"), format!("time {at} outside [0, {}]", self.horizon)));
            }
            if !(at > prev) {
                return Err(Error::param(field("at"), "step times must be strictly increasing"));
            }
            prev = at;
            match *step {
                Step::FiscalDrive { y_target, duration, .. } => {
                    if !(y_target >= 0.0) {
                        return Err(Error::param(field("y_target"), "income target must be non-negative"));
                    }
                    if !(duration > 0.0) {
                        return Err(Error::param(field("duration"), "must be positive"));
                    }
                }
                Step::FiscalShift { g, .. } => {
                    if !g.is_finite() {
                        return Err(Error::param(field("g"), "must be finite"));
                    }
                }
                Step::MonetaryStep { d_pi, d_ms, .. } => {
                    if !(d_pi.is_finite() && d_ms.is_finite()) {
                        return Err(Error::param(field("d_pi"), "must be finite"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Time in the trajectory's stored unit.
    pub t: f64,
    pub step: Option<usize>,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub trajectory: Trajectory,
    pub jumps: Vec<JumpEvent>,
    pub log: Vec<LogEntry>,
}

/// Shared settings for policy runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub mode: Mode,
    pub domain: Domain,
    pub integrate: IntegrateOptions,
    pub detect: DetectOptions,
    /// Grid used to validate every intermediate spec.
    pub validate_grid: usize,
}

impl RunSettings {
    pub fn new(mode: Mode, domain: Domain) -> Self {
        RunSettings {
            mode,
            domain,
            integrate: IntegrateOptions::default(),
            detect: DetectOptions::default(),
            validate_grid: 100,
        }
    }
}

fn start(spec: &ModelSpec, y0: f64, r0: f64, set: &RunSettings) -> Result<Simulator> {
    match set.mode {
        Mode::Full => Simulator::full(spec, &set.domain, y0, r0, &set.integrate),
        Mode::Reduced => Simulator::reduced(spec, &set.domain, y0, r0, &set.integrate),
    }
}

fn check_spec(spec: &ModelSpec, set: &RunSettings) -> Result<()> {
    spec.validate()?;
    let report = validate_properties(spec, &set.domain, set.validate_grid);
    if let Some(c) = report.failures().next() {
        return Err(Error::param("spec", format!("fails property check: {}", c.name)));
    }
    Ok(())
}

/// Run `scenario` from `(y0, r0)`. In reduced mode `r0` selects the stable
/// arc containing it.
pub fn apply_scenario(
    spec: &ModelSpec,
    scenario: &Scenario,
    y0: f64,
    r0: f64,
    set: &RunSettings,
) -> Result<ScenarioRun> {
    scenario.validate()?;
    let mut sim = start(spec, y0, r0, set)?;
    let mut log = Vec::new();
    let mut current = spec.clone();
    if scenario.horizon == 0.0 {
        return Ok(ScenarioRun {
            trajectory: sim.finish(),
            jumps: Vec::new(),
            log,
        });
    }
    for (k, step) in scenario.steps.iter().enumerate() {
        let wrap = |e: Error| Error::Scenario {
            index: k,
            source: Box::new(e),
        };
        sim.advance(step.at()).map_err(wrap)?;
        let t = sim.to_stored(step.at());
        match *step {
            Step::FiscalDrive { y_target, duration, .. } => {
                sim.record_start();
                sim.drive(y_target, duration);
                log.push(LogEntry {
                    t,
                    step: Some(k),
                    what: format!("fiscal drive to Y = {y_target} over {duration}"),
                });
            }
            Step::FiscalShift { g, .. } => {
                current = current.with_fiscal_shift(g);
                check_spec(&current, set).map_err(wrap)?;
                sim.set_spec(current.clone()).map_err(wrap)?;
                log.push(LogEntry {
                    t,
                    step: Some(k),
                    what: format!("fiscal shift g = {g}"),
                });
            }
            Step::MonetaryStep { d_pi, d_ms, .. } => {
                current = shift_lm(&current, d_pi, d_ms).map_err(wrap)?;
                check_spec(&current, set).map_err(wrap)?;
                sim.set_spec(current.clone()).map_err(wrap)?;
                log.push(LogEntry {
                    t,
                    step: Some(k),
                    what: format!("monetary step d_pi = {d_pi}, d_ms = {d_ms}"),
                });
            }
        }
    }
    sim.advance(scenario.horizon)?;
    let trajectory = sim.finish();
    let jumps = detect_jumps_with(&trajectory, &set.detect);
    for j in &jumps {
        log.push(LogEntry {
            t: j.t_start,
            step: None,
            what: format!(
                "jump {:?} at Y = {:.6} from R = {:.6} to R = {:.6}",
                j.direction, j.y_at_jump, j.r_from, j.r_to
            ),
        });
    }
    log.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(ScenarioRun { trajectory, jumps, log })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub g: f64,
    /// `g / (i_r + s_r)`.
    pub expected: f64,
    /// Largest deviation of the measured IS shift from `expected`.
    pub max_error: f64,
    pub lm_unchanged: bool,
}

/// Compare the IS shift produced by `g` with the closed form.
pub fn is_shift_equivalence_check(spec: &ModelSpec, g: f64, domain: &Domain) -> ShiftReport {
    let shifted = spec.with_fiscal_shift(g);
    let (a, b) = (is_curve(spec, domain), is_curve(&shifted, domain));
    let expected = g / (spec.is_block.i_r + spec.is_block.s_r);
    let max_error = (0..=100)
        .map(|k| {
            let y = domain.y_min + (domain.y_max - domain.y_min) * k as f64 / 100.0;
            (b.rate(y) - a.rate(y) - expected).abs()
        })
        .fold(0.0, f64::max);
    ShiftReport {
        g,
        expected,
        max_error,
        lm_unchanged: shifted.money == spec.money && shifted.params == spec.params,
    }
}

/// Equilibria for each fiscal shift in `gs`; the isocline is traced once
/// because fiscal shifts leave it unchanged.
pub fn fiscal_sweep(
    spec: &ModelSpec,
    domain: &Domain,
    trace: &TraceOptions,
    gs: &[f64],
) -> Result<Vec<(f64, Vec<Equilibrium>)>> {
    let iso = trace_lm_isocline(spec, domain, trace)?;
    Ok(gs
        .iter()
        .map(|&g| (g, equilibria_on(&spec.with_fiscal_shift(g), &iso, trace)))
        .collect())
}

/// Fiscal shift at which the equilibrium count drops, bisected to machine
/// precision between `g_lo` and `g_hi`, with the equilibria found there.
pub fn fiscal_tangency(
    spec: &ModelSpec,
    domain: &Domain,
    trace: &TraceOptions,
    g_lo: f64,
    g_hi: f64,
) -> Result<(f64, Vec<Equilibrium>)> {
    let iso = trace_lm_isocline(spec, domain, trace)?;
    let count = |g: f64| equilibria_on(&spec.with_fiscal_shift(g), &iso, trace).len();
    let n_lo = count(g_lo);
    if n_lo == count(g_hi) {
        return Err(Error::NoSolution(format!(
            "equilibrium count is {n_lo} at both ends of [{g_lo}, {g_hi}]"
        )));
    }
    let (lo, hi) = bisect_predicate(|g| count(g) == n_lo, g_lo, g_hi, 0.0);
    // the side that reports a merged (tangent) pair is the tangency
    for g in [lo, hi] {
        let eq = equilibria_on(&spec.with_fiscal_shift(g), &iso, trace);
        if eq.iter().any(|e| e.classification == Classification::NearDegenerate) {
            return Ok((g, eq));
        }
    }
    let g = 0.5 * (lo + hi);
    Ok((g, equilibria_on(&spec.with_fiscal_shift(g), &iso, trace)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Inflation,
    MoneyStock,
}

impl std::str::FromStr for Instrument {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inflation" => Ok(Instrument::Inflation),
            "money_stock" | "money-stock" => Ok(Instrument::MoneyStock),
            other => Err(format!("unknown instrument `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireEvent {
    pub t: f64,
    pub y: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationPlan {
    pub fold: FoldPoint,
    /// Fraction of the fold income at which the controller fires.
    pub margin: f64,
    pub instrument: Instrument,
    /// `d_pi` or `d_ms`, depending on the instrument.
    pub delta: f64,
    /// Rate on the landing arc at the fold income, before the shift.
    pub target_rate: f64,
    /// Rate of the shifted landing arc at the fold income minus the fold rate.
    pub residual: f64,
    pub fired: Vec<FireEvent>,
}

impl StabilizationPlan {
    pub fn monetary_step(&self, at: f64) -> Step {
        match self.instrument {
            Instrument::Inflation => Step::MonetaryStep {
                at,
                d_pi: self.delta,
                d_ms: 0.0,
            },
            Instrument::MoneyStock => Step::MonetaryStep {
                at,
                d_pi: 0.0,
                d_ms: self.delta,
            },
        }
    }
}

/// Interval index of the landing arc for a jump leaving `fold`, and the
/// landing rate at the fold income.
pub fn landing(spec: &ModelSpec, domain: &Domain, fold: &FoldPoint) -> Result<(usize, f64)> {
    let arcs = ArcMap::new(spec, domain.r_range());
    let up = fold.kind == FoldKind::LowerKnee;
    let dir = if up { 1.0 } else { -1.0 };
    let y_probe = fold.y + dir * 1e-9 * fold.y.abs().max(1.0);
    let k0 = arcs.index_of(fold.r + dir * 1e-12);
    let order: Vec<usize> = if up {
        (k0..arcs.len()).collect()
    } else {
        (0..=k0).rev().collect()
    };
    for k in order {
        if arcs.root_in(spec, y_probe, k).is_some() {
            if !arcs.is_stable(k) {
                break;
            }
            let r = arcs
                .root_in(spec, fold.y, k)
                .or_else(|| arcs.root_in(spec, y_probe, k))
                .unwrap();
            return Ok((k, r));
        }
    }
    Err(Error::NoLandingBranch { y: fold.y, r: fold.r })
}

/// Shift that makes the landing arc of the shifted isocline pass through
/// the pre-jump fold point.
pub fn plan_stabilization(
    spec: &ModelSpec,
    domain: &Domain,
    fold: &FoldPoint,
    instrument: Instrument,
    margin: f64,
) -> Result<StabilizationPlan> {
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::param("stabilize.margin", "must lie in [0, 1)"));
    }
    let (k, target_rate) = landing(spec, domain, fold)?;
    let shifted_rate = |s: &ModelSpec| ArcMap::new(s, domain.r_range()).root_in(s, fold.y, k);
    let (delta, residual) = match instrument {
        Instrument::Inflation => {
            // the landing arc moves down by exactly d_pi
            let d_pi = target_rate - fold.r;
            let s = shift_lm(spec, d_pi, 0.0)?;
            let arcs = ArcMap::new(&s, domain.r_range());
            let r = arcs.root_in(&s, fold.y, arcs.index_of(fold.r + 1e-12 * d_pi.signum()));
            (d_pi, r.map_or(target_rate - d_pi - fold.r, |r| r - fold.r))
        }
        Instrument::MoneyStock => {
            let m = spec.params.m_stock;
            let up = fold.kind == FoldKind::LowerKnee;
            let (lo, hi) = if up { (0.0, 10.0 * m) } else { (-0.999 * m, 0.0) };
            let h = |d: f64| -> Option<f64> {
                let s = shift_lm(spec, 0.0, d).ok()?;
                shifted_rate(&s).map(|r| r - fold.r)
            };
            let n = 400;
            let grid: Vec<(f64, Option<f64>)> = (0..=n)
                .map(|j| {
                    let d = lo + (hi - lo) * j as f64 / n as f64;
                    (d, h(d))
                })
                .collect();
            let bracket = grid.windows(2).find_map(|w| match (w[0].1, w[1].1) {
                (Some(a), Some(b)) if a == 0.0 || a.signum() != b.signum() => Some((w[0].0, w[1].0)),
                _ => None,
            });
            let closest = grid
                .iter()
                .filter_map(|(d, v)| v.map(|v| (*d, v)))
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            let Some((a, b)) = bracket else {
                return Err(Error::NoSolution(match closest {
                    Some((d, v)) => format!(
                        "no money-stock change in [{lo}, {hi}] moves the landing arc through the fold; \
                         closest approach {v:.6} at d_ms = {d:.6}"
                    ),
                    None => format!("landing arc absent at the fold income for every d_ms in [{lo}, {hi}]"),
                }));
            };
            let d = bisect(|d| h(d).unwrap_or(f64::NAN), a, b);
            let res = h(d).unwrap_or(f64::NAN);
            if !(res.abs() < 1e-8) {
                return Err(Error::NoSolution(format!("bisection on d_ms ended with residual {res:e}")));
            }
            (d, res)
        }
    };
    Ok(StabilizationPlan {
        fold: *fold,
        margin,
        instrument,
        delta,
        target_rate,
        residual,
        fired: Vec::new(),
    })
}

/// Income path crossing a fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiscalRamp {
    pub y_start: f64,
    pub y_end: f64,
    pub duration: f64,
    /// Time held at `y_end` after the ramp.
    #[serde(default)]
    pub settle: f64,
}

impl FiscalRamp {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_start >= 0.0 && self.y_end >= 0.0) {
            return Err(Error::param("stabilize.ramp", "incomes must be non-negative"));
        }
        if !(self.duration > 0.0) || !(self.settle >= 0.0) {
            return Err(Error::param("stabilize.ramp.duration", "must be positive"));
        }
        Ok(())
    }

    pub fn time_at(&self, y: f64) -> f64 {
        self.duration * (y - self.y_start) / (self.y_end - self.y_start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub jumps: Vec<JumpEvent>,
    pub jump_count: usize,
    /// Largest finite `|dR/dt|` between samples.
    pub max_rate: f64,
    /// Number of zero-duration rate changes (singular-limit jumps).
    pub instantaneous: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub trajectory: Trajectory,
}

fn summarize(trajectory: Trajectory, jumps: Vec<JumpEvent>) -> RunSummary {
    let s = &trajectory.samples;
    let mut max_rate: f64 = 0.0;
    let mut instantaneous = 0;
    for w in s.windows(2) {
        let dt = w[1].t - w[0].t;
        let dr = (w[1].r - w[0].r).abs();
        if dt > 0.0 {
            max_rate = max_rate.max(dr / dt);
        } else if dr > 0.0 {
            instantaneous += 1;
        }
    }
    let (r_min, r_max) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.r), b.max(p.r)));
    RunSummary {
        jump_count: jumps.len(),
        jumps,
        max_rate,
        instantaneous,
        r_min,
        r_max,
        trajectory,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerReport {
    pub plan: StabilizationPlan,
    pub uncontrolled: RunSummary,
    pub controlled: RunSummary,
    /// Rate just before the controller fired.
    pub r_pre: f64,
    /// Largest `|R − r_pre|` over the controlled run.
    pub max_deviation: f64,
    /// `max_deviation` is below the uncontrolled jump height.
    pub within_band: bool,
    pub late: bool,
}

/// Run the ramp with and without the planned monetary step, concurrently.
pub fn run_with_controller(
    spec: &ModelSpec,
    ramp: &FiscalRamp,
    plan: &StabilizationPlan,
    set: &RunSettings,
) -> Result<ControllerReport> {
    ramp.validate()?;
    let fold = plan.fold;
    let rising = ramp.y_end > ramp.y_start;
    let y_fire = if rising {
        fold.y * (1.0 - plan.margin)
    } else {
        fold.y * (1.0 + plan.margin)
    };
    let crosses = (ramp.y_start - fold.y) * (ramp.y_end - fold.y) < 0.0;
    if !crosses || (y_fire - ramp.y_start) * (ramp.y_end - y_fire) < 0.0 {
        return Err(Error::param(
            "stabilize.ramp",
            format!("ramp from {} to {} does not cross the trigger before the fold at Y = {}", ramp.y_start, ramp.y_end, fold.y),
        ));
    }
    let t_fire = ramp.time_at(y_fire);
    let horizon = ramp.duration + ramp.settle;
    // start on the arc that ends at the fold
    let r_hint = fold.r + if fold.kind == FoldKind::LowerKnee { -1e-9 } else { 1e-9 };
    let r0 = ArcMap::new(spec, set.domain.r_range())
        .root_in(spec, ramp.y_start, ArcMap::new(spec, set.domain.r_range()).index_of(r_hint))
        .ok_or(Error::NotOnStableBranch { y: ramp.y_start, r: r_hint })?;

    let drive = Step::FiscalDrive {
        at: 0.0,
        y_target: ramp.y_end,
        duration: ramp.duration,
    };
    let off = Scenario {
        horizon,
        steps: vec![drive],
    };
    let fire_at = if t_fire > 0.0 { t_fire } else { f64::MIN_POSITIVE };
    let on = Scenario {
        horizon,
        steps: vec![drive, plan.monetary_step(fire_at)],
    };
    let (off_run, on_run) = if cfg!(target_arch = "wasm32") {
        (
            apply_scenario(spec, &off, ramp.y_start, r0, set),
            apply_scenario(spec, &on, ramp.y_start, r0, set),
        )
    } else {
        thread::scope(|s| {
            let a = s.spawn(|| apply_scenario(spec, &off, ramp.y_start, r0, set));
            let b = s.spawn(|| apply_scenario(spec, &on, ramp.y_start, r0, set));
            (a.join().expect("controller run panicked"), b.join().expect("controller run panicked"))
        })
    };
    let (off_run, on_run) = (off_run?, on_run?);

    let t_fire_stored = match set.mode {
        Mode::Full => fire_at,
        Mode::Reduced => fire_at * spec.params.epsilon,
    };
    let samples = &on_run.trajectory.samples;
    let pre = samples.iter().take_while(|p| p.t <= t_fire_stored).last().unwrap_or(&samples[0]);
    let r_pre = pre.r;
    let max_deviation = samples.iter().map(|p| (p.r - r_pre).abs()).fold(0.0, f64::max);
    let height = off_run.jumps.first().map_or(plan.target_rate - fold.r, |j| j.height()).abs();
    let late = y_fire >= fold.y - 1e-12 && rising
        || y_fire <= fold.y + 1e-12 && !rising
        || on_run.jumps.iter().any(|j| j.t_start < t_fire_stored);
    let mut plan = plan.clone();
    plan.fired.push(FireEvent {
        t: t_fire_stored,
        y: y_fire,
        r: r_pre,
    });
    Ok(ControllerReport {
        plan,
        uncontrolled: summarize(off_run.trajectory, off_run.jumps),
        controlled: summarize(on_run.trajectory, on_run.jumps),
        r_pre,
        max_deviation,
        within_band: max_deviation < height,
        late,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub y: f64,
    pub r_from: f64,
    pub r_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Jumps whose end points lie on opposite sides of `R = 0`.
    pub crossings: Vec<Crossing>,
    pub cycle_r_min: Option<f64>,
    pub cycle_r_max: Option<f64>,
    /// Cycle minimum within `1e-9` of zero.
    pub touching: bool,
}

pub const TOUCH_TOL: f64 = 1e-9;

/// Report jumps and cycles of a scenario run that cross `R = 0`.
pub fn negative_rate_probe(
    spec: &ModelSpec,
    scenario: &Scenario,
    y0: f64,
    r0: f64,
    set: &RunSettings,
) -> Result<ProbeReport> {
    let run = apply_scenario(spec, scenario, y0, r0, set)?;
    Ok(probe_run(&run, &set.detect))
}

/// [`negative_rate_probe`] on a run already made.
pub fn probe_run(run: &ScenarioRun, detect: &DetectOptions) -> ProbeReport {
    let crossings = run
        .jumps
        .iter()
        .filter(|j| j.crosses_zero())
        .map(|j| Crossing {
            t: j.t_start,
            y: j.y_at_jump,
            r_from: j.r_from,
            r_to: j.r_to,
        })
        .collect();
    let cycle = detect_cycle(&run.trajectory, detect);
    ProbeReport {
        crossings,
        cycle_r_min: cycle.as_ref().map(|c| c.r_min),
        cycle_r_max: cycle.as_ref().map(|c| c.r_max),
        touching: cycle.as_ref().is_some_and(|c| c.r_min.abs() <= TOUCH_TOL),
    }
}

/// Minimum rate over the relaxation cycle reached from `(y0, r0)`.
pub fn cycle_minimum(spec: &ModelSpec, y0: f64, r0: f64, horizon: f64, set: &RunSettings) -> Result<f64> {
    let run = apply_scenario(
        spec,
        &Scenario {
            horizon,
            steps: Vec::new(),
        },
        y0,
        r0,
        set,
    )?;
    detect_cycle(&run.trajectory, &set.detect)
        .map(|c| c.r_min)
        .ok_or_else(|| Error::NoSolution("no cycle detected".into()))
}

/// Expected inflation at which the cycle minimum touches zero, by bisection
/// over inflation increments in `[0, d_max]`.
pub fn touching_inflation(
    spec: &ModelSpec,
    y0: f64,
    r0: f64,
    horizon: f64,
    d_max: f64,
    tol: f64,
    set: &RunSettings,
) -> Result<f64> {
    let min_at = |d: f64| -> Result<f64> {
        let s = shift_lm(spec, d, 0.0)?;
        cycle_minimum(&s, y0, r0 - d, horizon, set)
    };
    let (a, b) = (min_at(0.0)?, min_at(d_max)?);
    if a.signum() == b.signum() {
        return Err(Error::NoSolution(format!(
            "cycle minimum does not change sign over inflation increments [0, {d_max}] ({a}, {b})"
        )));
    }
    let (mut lo, mut hi) = (0.0, d_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if min_at(mid)?.signum() == a.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(spec.params.expected_inflation + 0.5 * (lo + hi))
}

/// Attribute arcs to the jumps of a run against the isocline of `spec`.
pub fn label_jumps(spec: &ModelSpec, iso: &LmIsocline, jumps: &mut [JumpEvent]) {
    attribute_jumps(spec, iso, jumps);
}
