//! Full ε-system and singular-limit simulation, jump and cycle detection.
//!
//! Full mode integrates `dY/dt = εα(I − S)`, `dR/dt = β(L − M − M_S)`.
//! Reduced mode slaves `R` to a stable arc of the LM isocline and advances
//! `Y` in slow time `τ = εt`; leaving an arc at a fold is an instantaneous
//! vertical jump, stored as two samples at the same `τ`.
//!
//! Every time given to a [`Simulator`] (horizons, ramp durations) is in fast
//! time `t`. Reduced trajectories store `τ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, LmIsocline, Stability};
use crate::model::ModelSpec;
use crate::ode::{dopri5, OdeError, StepControl};
use crate::roots::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    Reduced,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Mode::Full),
            "reduced" => Ok(Mode::Reduced),
            other => Err(format!("unknown mode `{other}` (expected full or reduced)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Slow,
    Jump,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Slow => "slow",
            Regime::Jump => "jump",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub y: f64,
    pub r: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mode: Mode,
    /// Fingerprint of the spec the run started from.
    pub spec_id: String,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| [s.y, s.r]).collect()
    }

    /// Mark every sample inside a detected jump as [`Regime::Jump`].
    pub fn label_jumps(&mut self, jumps: &[JumpEvent]) {
        for s in &mut self.samples {
            if jumps.iter().any(|j| s.t > j.t_start && s.t <= j.t_end) {
                s.regime = Regime::Jump;
            }
        }
    }
}

/// FNV-1a hash of the serialized spec.
pub fn spec_id(spec: &ModelSpec) -> String {
    let text = serde_json::to_string(spec).expect("spec serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest integrator step in `t`.
    pub h_max: f64,
    pub max_steps: usize,
    /// Full mode records a step once this much time has passed since the
    /// last record, or either coordinate moved by its threshold.
    pub sample_dt: f64,
    pub sample_dr: f64,
    pub sample_dy: f64,
    /// Largest reduced-mode step in slow time.
    pub reduced_dt: f64,
    /// Largest change of `Y` per reduced-mode step.
    pub reduced_dy: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            sample_dt: 1.0,
            sample_dr: 1e-3,
            sample_dy: 1e-3,
            reduced_dt: 0.01,
            reduced_dy: 0.005,
        }
    }
}

impl IntegrateOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("simulate.rtol", self.rtol),
            ("simulate.atol", self.atol),
            ("simulate.h_max", self.h_max),
            ("simulate.sample_dt", self.sample_dt),
            ("simulate.sample_dr", self.sample_dr),
            ("simulate.sample_dy", self.sample_dy),
            ("simulate.reduced_dt", self.reduced_dt),
            ("simulate.reduced_dy", self.reduced_dy),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::param("simulate.max_steps", "must be positive"));
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            h_max: self.h_max,
            max_steps: self.max_steps,
            ..StepControl::default()
        }
    }
}

/// Prescribed income path: linear from `(t0, y0)` to `(t1, y1)`, constant
/// afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub t0: f64,
    pub y0: f64,
    pub t1: f64,
    pub y1: f64,
}

impl Ramp {
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t0 {
            self.y0
        } else if t >= self.t1 {
            self.y1
        } else {
            self.y0 + (self.y1 - self.y0) * (t - self.t0) / (self.t1 - self.t0)
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        if t < self.t0 || t >= self.t1 {
            0.0
        } else {
            (self.y1 - self.y0) / (self.t1 - self.t0)
        }
    }

    /// First time in `[from, to]` at which the path reaches `y`.
    fn time_of(&self, y: f64, from: f64, to: f64) -> Option<f64> {
        let (a, b) = (self.value(from), self.value(to.min(self.t1)));
        if (a - y) * (b - y) > 0.0 || a == b {
            return None;
        }
        let s = (y - self.y0) / (self.y1 - self.y0);
        Some((self.t0 + s * (self.t1 - self.t0)).clamp(from, to))
    }
}

/// Rate intervals between consecutive fold rates; inside each the money
/// excess is strictly monotone in `R`, so each holds at most one root.
#[derive(Debug, Clone)]
pub struct ArcMap {
    bounds: Vec<f64>,
    stable: Vec<bool>,
}

impl ArcMap {
    pub fn new(spec: &ModelSpec, r_range: (f64, f64)) -> Self {
        let shift = spec.params.maturity_premium - spec.params.expected_inflation;
        let mut bounds = vec![r_range.0];
        for w in &spec.money.windows {
            for i in [w.p, w.q] {
                let r = i + shift;
                if r > r_range.0 && r < r_range.1 {
                    bounds.push(r);
                }
            }
        }
        bounds.push(r_range.1);
        let stable = bounds
            .windows(2)
            .map(|b| spec.money_gap_dr(0.5 * (b[0] + b[1])) < 0.0)
            .collect();
        ArcMap { bounds, stable }
    }

    pub fn len(&self) -> usize {
        self.stable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stable.is_empty()
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.bounds[k], self.bounds[k + 1])
    }

    pub fn is_stable(&self, k: usize) -> bool {
        self.stable[k]
    }

    pub fn index_of(&self, r: f64) -> usize {
        let n = self.len();
        (0..n).find(|&k| r <= self.bounds[k + 1]).unwrap_or(n - 1)
    }

    /// The unique root of the money excess in interval `k` at income `y`.
    pub fn root_in(&self, spec: &ModelSpec, y: f64, k: usize) -> Option<f64> {
        let (lo, hi) = self.interval(k);
        root_between(spec, y, lo, hi)
    }

    /// Whether `bounds[k]` is a fold rate rather than an end of the window.
    fn is_fold_bound(&self, b: usize) -> bool {
        b > 0 && b < self.bounds.len() - 1
    }
}

fn root_between(spec: &ModelSpec, y: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |r: f64| spec.money_gap(y, r);
    let (a, b) = (f(lo), f(hi));
    if a == 0.0 {
        return Some(lo);
    }
    if b == 0.0 {
        return Some(hi);
    }
    if a.signum() == b.signum() {
        return None;
    }
    Some(bisect(f, lo, hi))
}

/// Income at which the root on an arc reaches the fold rate `r_fold`. The
/// money excess is affine in `Y`, so this is exact.
pub fn fold_income(spec: &ModelSpec, r_fold: f64) -> f64 {
    -spec.money_gap(0.0, r_fold) / spec.money_gap_dy()
}

struct Recorder {
    samples: Vec<Sample>,
    thin: Option<(f64, f64, f64)>,
}

impl Recorder {
    fn push(&mut self, t: f64, y: f64, r: f64, regime: Regime) {
        self.samples.push(Sample { t, y, r, regime });
    }

    fn step(&mut self, t: f64, y: f64, r: f64) {
        if let (Some((dt, dy, dr)), Some(last)) = (self.thin, self.samples.last()) {
            if t - last.t < dt && (y - last.y).abs() < dy && (r - last.r).abs() < dr {
                return;
            }
        }
        self.push(t, y, r, Regime::Slow);
    }

    fn flush(&mut self, t: f64, y: f64, r: f64) {
        match self.samples.last() {
            Some(last) if last.t == t && last.y == y && last.r == r => {}
            _ => self.push(t, y, r, Regime::Slow),
        }
    }
}

/// Event emitted by a [`Simulator`] when the state leaves an arc or is
/// relocated after a spec change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub y: f64,
    pub r_from: f64,
    pub r_to: f64,
}

/// Stateful simulator shared by plain runs and policy scenarios.
pub struct Simulator {
    mode: Mode,
    spec: ModelSpec,
    domain: Domain,
    opts: IntegrateOptions,
    /// Time in the stored unit (`t` or `τ`).
    t: f64,
    y: f64,
    r: f64,
    arcs: Option<ArcMap>,
    arc: usize,
    drive: Option<Ramp>,
    rec: Recorder,
    spec_id: String,
    pub transitions: Vec<Transition>,
}

impl Simulator {
    /// Full ε-system from `(y0, r0)`.
    pub fn full(spec: &ModelSpec, domain: &Domain, y0: f64, r0: f64, opts: &IntegrateOptions) -> Result<Self> {
        spec.validate()?;
        opts.validate()?;
        if !(y0 >= 0.0) {
            return Err(Error::NegativeIncome(y0));
        }
        Ok(Simulator {
            mode: Mode::Full,
            spec: spec.clone(),
            domain: *domain,
            opts: *opts,
            t: 0.0,
            y: y0,
            r: r0,
            arcs: None,
            arc: 0,
            drive: None,
            rec: Recorder {
                samples: Vec::new(),
                thin: Some((opts.sample_dt, opts.sample_dy, opts.sample_dr)),
            },
            spec_id: spec_id(spec),
            transitions: Vec::new(),
        })
    }

    /// Singular limit from the stable root at `y0` whose arc contains
    /// `r_hint`.
    pub fn reduced(spec: &ModelSpec, domain: &Domain, y0: f64, r_hint: f64, opts: &IntegrateOptions) -> Result<Self> {
        spec.validate()?;
        opts.validate()?;
        if !(y0 >= 0.0) {
            return Err(Error::NegativeIncome(y0));
        }
        let arcs = ArcMap::new(spec, domain.r_range());
        let k = arcs.index_of(r_hint);
        let r0 = arcs.root_in(spec, y0, k);
        let r0 = match r0 {
            Some(r) if arcs.is_stable(k) => r,
            _ => return Err(Error::NotOnStableBranch { y: y0, r: r_hint }),
        };
        Ok(Simulator {
            mode: Mode::Reduced,
            spec: spec.clone(),
            domain: *domain,
            opts: *opts,
            t: 0.0,
            y: y0,
            r: r0,
            arcs: Some(arcs),
            arc: k,
            drive: None,
            rec: Recorder {
                samples: Vec::new(),
                thin: None,
            },
            spec_id: spec_id(spec),
            transitions: Vec::new(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn state(&self) -> (f64, f64, f64) {
        (self.t, self.y, self.r)
    }

    /// Convert fast time to the stored unit.
    pub fn to_stored(&self, t: f64) -> f64 {
        match self.mode {
            Mode::Full => t,
            Mode::Reduced => t * self.spec.params.epsilon,
        }
    }

    pub fn record_start(&mut self) {
        if self.rec.samples.is_empty() {
            self.rec.push(self.t, self.y, self.r, Regime::Slow);
        }
    }

    /// Prescribe `Y` from now on: linear to `y_target` over `duration`
    /// (fast time), then held.
    pub fn drive(&mut self, y_target: f64, duration: f64) {
        let d = self.to_stored(duration);
        self.drive = Some(Ramp {
            t0: self.t,
            y0: self.y,
            t1: self.t + d,
            y1: y_target,
        });
    }

    /// Replace the economy. In reduced mode the state relaxes along the
    /// fast direction onto the nearest stable root.
    pub fn set_spec(&mut self, spec: ModelSpec) -> Result<()> {
        spec.validate()?;
        self.spec = spec;
        if self.mode == Mode::Reduced {
            let arcs = ArcMap::new(&self.spec, self.domain.r_range());
            let (k, r_new) = relax(&self.spec, &arcs, self.y, self.r)?;
            if r_new != self.r {
                self.record_start();
                self.rec.push(self.t, self.y, r_new, Regime::Jump);
                self.transitions.push(Transition {
                    t: self.t,
                    y: self.y,
                    r_from: self.r,
                    r_to: r_new,
                });
            }
            self.r = r_new;
            self.arc = k;
            self.arcs = Some(arcs);
        }
        Ok(())
    }

    /// Advance to fast time `t_to`.
    pub fn advance(&mut self, t_to: f64) -> Result<()> {
        let target = self.to_stored(t_to);
        if target <= self.t {
            return Ok(());
        }
        self.record_start();
        match self.mode {
            Mode::Full => self.advance_full(target),
            Mode::Reduced => self.advance_reduced(target),
        }
    }

    pub fn finish(self) -> Trajectory {
        Trajectory {
            mode: self.mode,
            spec_id: self.spec_id,
            samples: self.rec.samples,
        }
    }

    fn advance_full(&mut self, t_to: f64) -> Result<()> {
        let ctl = self.opts.step_control();
        let spec = self.spec.clone();
        let rec = &mut self.rec;
        match self.drive {
            None => {
                let f = |_: f64, x: &[f64; 2]| spec.vector_field(x[0].max(0.0), x[1]);
                let mut neg = None;
                let res = dopri5(f, self.t, [self.y, self.r], t_to, &ctl, |t, x| {
                    if x[0] < 0.0 && neg.is_none() {
                        neg = Some(x[0]);
                    }
                    rec.step(t, x[0], x[1]);
                });
                if let Some(y) = neg {
                    return Err(Error::NegativeIncome(y));
                }
                let x = res.map_err(|(e, x)| ode_error(e, x[0], x[1]))?.0;
                self.y = x[0];
                self.r = x[1];
            }
            Some(ramp) => {
                let beta = spec.params.beta;
                // split at the kinks of the prescribed path
                let mut cuts = vec![t_to];
                for k in [ramp.t0, ramp.t1] {
                    if k > self.t && k < t_to {
                        cuts.push(k);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                for t1 in cuts {
                    let f = |t: f64, x: &[f64; 1]| [beta * spec.money_gap(ramp.value(t), x[0])];
                    let res = dopri5(f, self.t, [self.r], t1, &ctl, |t, x| rec.step(t, ramp.value(t), x[0]));
                    let y_now = ramp.value(t1);
                    self.r = res.map_err(|(e, x)| ode_error(e, y_now, x[0]))?.0[0];
                    self.t = t1;
                    self.y = y_now;
                }
            }
        }
        self.t = t_to;
        self.rec.flush(self.t, self.y, self.r);
        Ok(())
    }

    fn advance_reduced(&mut self, t_to: f64) -> Result<()> {
        while self.t < t_to {
            let arcs = self.arcs.as_ref().expect("reduced mode has arcs");
            let (lo, hi) = arcs.interval(self.arc);
            // fold incomes at either end of the current arc
            let y_lo = arcs.is_fold_bound(self.arc).then(|| fold_income(&self.spec, lo));
            let y_hi = arcs
                .is_fold_bound(self.arc + 1)
                .then(|| fold_income(&self.spec, hi));
            let reached = match self.drive {
                Some(ramp) => self.reduced_driven(ramp, t_to, y_lo, y_hi)?,
                None => self.reduced_free(t_to, y_lo, y_hi)?,
            };
            match reached {
                Some(up) => self.jump(up)?,
                None => break,
            }
        }
        Ok(())
    }

    fn slaved_rate(&self, y: f64) -> Option<f64> {
        if y < 0.0 {
            return None;
        }
        self.arcs.as_ref().unwrap().root_in(&self.spec, y, self.arc)
    }

    /// Slow flow with `R` on the current arc. Returns `Some(up)` when a fold
    /// is reached, `None` at `t_to`.
    fn reduced_free(&mut self, t_to: f64, y_lo: Option<f64>, y_hi: Option<f64>) -> Result<Option<bool>> {
        let alpha = self.spec.params.alpha;
        let rhs = |sim: &Self, y: f64| -> Option<f64> {
            let r = sim.slaved_rate(y)?;
            Some(alpha * sim.spec.goods_gap(y, r))
        };
        let tol = |y: f64| 1e-12 * y.abs().max(1.0);
        loop {
            if self.t >= t_to {
                return Ok(None);
            }
            let f0 = rhs(self, self.y).ok_or(Error::NotOnStableBranch { y: self.y, r: self.r })?;
            if f0 == 0.0 || f0.abs() < 1e-14 {
                // resting on an equilibrium of the slow flow
                self.t = t_to;
                self.rec.flush(self.t, self.y, self.r);
                return Ok(None);
            }
            let fold = if f0 > 0.0 { y_hi } else { y_lo };
            if let Some(yf) = fold {
                let dist = (yf - self.y).abs();
                if dist <= tol(yf) {
                    let r_fold = self.fold_rate(f0 > 0.0);
                    let f_fold = alpha * self.spec.goods_gap(yf, r_fold);
                    if f_fold.abs() < 1e-14 {
                        return Err(Error::Stalled { y: yf });
                    }
                    self.t += dist / f0.abs();
                    self.y = yf;
                    self.r = r_fold;
                    if self.t > t_to {
                        // the fold lies just past the horizon
                        self.t = t_to;
                        self.rec.flush(self.t, self.y, self.r);
                        return Ok(None);
                    }
                    self.rec.flush(self.t, self.y, self.r);
                    return Ok(Some(f0 > 0.0));
                }
                if dist < 1e-9 && f0.abs() < 1e-12 {
                    return Err(Error::Stalled { y: yf });
                }
            }
            let mut h = self
                .opts
                .reduced_dt
                .min(self.opts.reduced_dy / f0.abs())
                .min(t_to - self.t);
            if let Some(yf) = fold {
                h = h.min(0.9 * (yf - self.y).abs() / f0.abs());
            }
            let mut accepted = None;
            for _ in 0..60 {
                let step = (|| {
                    let k1 = f0;
                    let k2 = rhs(self, self.y + 0.5 * h * k1)?;
                    let k3 = rhs(self, self.y + 0.5 * h * k2)?;
                    let k4 = rhs(self, self.y + h * k3)?;
                    let y_new = self.y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    let r_new = self.slaved_rate(y_new)?;
                    Some((y_new, r_new))
                })();
                let ok = match (step, fold) {
                    (Some((y_new, _)), Some(yf)) => (yf - y_new) * (yf - self.y) > 0.0,
                    (Some(_), None) => true,
                    (None, _) => false,
                };
                if ok {
                    accepted = step;
                    break;
                }
                h *= 0.5;
            }
            let (y_new, r_new) = accepted.ok_or_else(|| {
                if fold.is_none() {
                    Error::Tracing(format!("state left the rate window near Y = {}", self.y))
                } else {
                    Error::StepUnderflow {
                        t: self.t,
                        y: self.y,
                        r: self.r,
                        h,
                    }
                }
            })?;
            self.t += h;
            self.y = y_new;
            self.r = r_new;
            self.rec.push(self.t, self.y, self.r, Regime::Slow);
        }
    }

    /// Prescribed income with `R` on the current arc.
    fn reduced_driven(&mut self, ramp: Ramp, t_to: f64, y_lo: Option<f64>, y_hi: Option<f64>) -> Result<Option<bool>> {
        let slope = ramp.slope(self.t);
        let seg_end = if self.t < ramp.t1 { ramp.t1.min(t_to) } else { t_to };
        if slope != 0.0 {
            let fold = if slope > 0.0 { y_hi } else { y_lo };
            let hit = fold.and_then(|yf| {
                if (yf - self.y).abs() <= 1e-12 * yf.abs().max(1.0) {
                    Some((self.t, yf))
                } else {
                    ramp.time_of(yf, self.t, seg_end).map(|t| (t, yf))
                }
            });
            let stop = hit.map_or(seg_end, |(t, _)| t);
            let n = (((ramp.value(stop) - self.y).abs() / self.opts.reduced_dy).ceil() as usize)
                .max(((stop - self.t) / self.opts.reduced_dt).ceil() as usize)
                .max(1);
            let t_start = self.t;
            for k in 1..=n {
                let t = if k == n {
                    stop
                } else {
                    t_start + (stop - t_start) * k as f64 / n as f64
                };
                let y = match hit {
                    Some((ts, yf)) if t == ts => yf,
                    _ => ramp.value(t),
                };
                let r = match hit {
                    Some((ts, _)) if t == ts => self.fold_rate(slope > 0.0),
                    _ => self
                        .slaved_rate(y)
                        .ok_or(Error::NotOnStableBranch { y, r: self.r })?,
                };
                self.t = t;
                self.y = y;
                self.r = r;
                self.rec.push(t, y, r, Regime::Slow);
            }
            if hit.is_some() {
                return Ok(Some(slope > 0.0));
            }
            if self.t < t_to {
                // ramp finished inside this call; continue holding
                return self.reduced_driven(ramp, t_to, y_lo, y_hi);
            }
            return Ok(None);
        }
        self.t = t_to;
        self.rec.flush(self.t, self.y, self.r);
        Ok(None)
    }

    fn fold_rate(&self, up: bool) -> f64 {
        let (lo, hi) = self.arcs.as_ref().unwrap().interval(self.arc);
        if up {
            hi
        } else {
            lo
        }
    }

    /// Vertical transfer from the fold at the current state.
    fn jump(&mut self, up: bool) -> Result<()> {
        let arcs = self.arcs.as_ref().unwrap();
        let dir = if up { 1.0 } else { -1.0 };
        // just past the fold the merging pair of roots no longer exists
        let y_probe = self.y + dir * 1e-9 * self.y.abs().max(1.0);
        let order: Vec<usize> = if up {
            (self.arc + 1..arcs.len()).collect()
        } else {
            (0..self.arc).rev().collect()
        };
        for k in order {
            if arcs.root_in(&self.spec, y_probe, k).is_some() {
                if !arcs.is_stable(k) {
                    return Err(Error::NoLandingBranch { y: self.y, r: self.r });
                }
                let r_to = arcs
                    .root_in(&self.spec, self.y, k)
                    .or_else(|| arcs.root_in(&self.spec, y_probe, k))
                    .unwrap();
                self.transitions.push(Transition {
                    t: self.t,
                    y: self.y,
                    r_from: self.r,
                    r_to,
                });
                self.rec.push(self.t, self.y, r_to, Regime::Jump);
                self.r = r_to;
                self.arc = k;
                return Ok(());
            }
        }
        Err(Error::NoLandingBranch { y: self.y, r: self.r })
    }
}

/// Fast relaxation at fixed `y`: follow the sign of the money excess to the
/// next stable root.
fn relax(spec: &ModelSpec, arcs: &ArcMap, y: f64, r: f64) -> Result<(usize, f64)> {
    let e = spec.money_gap(y, r);
    let k = arcs.index_of(r);
    if e == 0.0 {
        return if arcs.is_stable(k) {
            Ok((k, r))
        } else {
            Err(Error::NotOnStableBranch { y, r })
        };
    }
    let up = e > 0.0;
    let order: Vec<usize> = if up {
        (k..arcs.len()).collect()
    } else {
        (0..=k).rev().collect()
    };
    for j in order {
        let (lo, hi) = arcs.interval(j);
        let (lo, hi) = if j == k {
            if up {
                (r, hi)
            } else {
                (lo, r)
            }
        } else {
            (lo, hi)
        };
        if let Some(root) = root_between(spec, y, lo, hi) {
            if root == r {
                continue;
            }
            if !arcs.is_stable(j) {
                return Err(Error::NoLandingBranch { y, r });
            }
            return Ok((j, root));
        }
    }
    Err(Error::NoLandingBranch { y, r })
}

fn ode_error(e: OdeError, y: f64, r: f64) -> Error {
    match e {
        OdeError::Underflow { t, h } => Error::StepUnderflow { t, y, r, h },
        OdeError::NonFinite { t } => Error::NonFinite { t, y, r },
        OdeError::TooManySteps { t } => Error::StepUnderflow { t, y, r, h: 0.0 },
    }
}

/// Integrate the full ε-system from `(y0, r0)` over `[0, t_end]`.
pub fn integrate(spec: &ModelSpec, y0: f64, r0: f64, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    if t_end < 0.0 || t_end.is_nan() {
        return Err(Error::param("t_end", "must be non-negative"));
    }
    let domain = Domain::default();
    let mut sim = Simulator::full(spec, &domain, y0, r0, opts)?;
    if t_end == 0.0 {
        return Ok(sim.finish());
    }
    sim.advance(t_end)?;
    Ok(sim.finish())
}

/// Singular-limit run starting on arc `arc` of `iso` at income `y0`.
/// `t_end` is fast time; the trajectory stores slow time `τ = εt`.
pub fn reduced_simulate(
    spec: &ModelSpec,
    iso: &LmIsocline,
    y0: f64,
    arc: usize,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if t_end < 0.0 || t_end.is_nan() {
        return Err(Error::param("t_end", "must be non-negative"));
    }
    let branch = iso
        .branch_by_arc(arc)
        .ok_or_else(|| Error::param("arc", format!("isocline has no arc {arc}")))?;
    if branch.stability != Stability::Stable {
        return Err(Error::NotOnStableBranch { y: y0, r: f64::NAN });
    }
    let r0 = iso
        .arc_rate(spec, arc, y0)
        .ok_or(Error::NotOnStableBranch { y: y0, r: f64::NAN })?;
    let mut sim = Simulator::reduced(spec, &iso.domain, y0, r0, opts)?;
    if t_end == 0.0 {
        return Ok(sim.finish());
    }
    sim.advance(t_end)?;
    Ok(sim.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub y_at_jump: f64,
    pub r_from: f64,
    pub r_to: f64,
    pub direction: Direction,
    /// Largest income change observed during the jump.
    pub y_slip: f64,
    /// Arcs left and reached, once attributed against an isocline.
    #[serde(default)]
    pub arcs: Option<[usize; 2]>,
}

impl JumpEvent {
    pub fn height(&self) -> f64 {
        (self.r_to - self.r_from).abs()
    }

    pub fn crosses_zero(&self) -> bool {
        self.r_from.signum() != self.r_to.signum() && self.r_from != 0.0 && self.r_to != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectOptions {
    pub jump_min: f64,
    pub y_slip: f64,
    /// Floor for the rate threshold; the automatic value is ten times the
    /// median sample rate.
    pub rate_threshold: Option<f64>,
    pub recurrence_radius: f64,
    pub transient_fraction: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            jump_min: 0.02,
            y_slip: 0.1,
            rate_threshold: None,
            recurrence_radius: 1e-4,
            transient_fraction: 0.2,
        }
    }
}

impl DetectOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("detect.jump_min", self.jump_min),
            ("detect.y_slip", self.y_slip),
            ("detect.recurrence_radius", self.recurrence_radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(Error::param("detect.transient_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

pub fn detect_jumps(traj: &Trajectory, jump_min: f64, y_slip: f64) -> Vec<JumpEvent> {
    detect_jumps_with(
        traj,
        &DetectOptions {
            jump_min,
            y_slip,
            ..DetectOptions::default()
        },
    )
}

/// Maximal runs of fast `R` motion with small income change.
pub fn detect_jumps_with(traj: &Trajectory, opts: &DetectOptions) -> Vec<JumpEvent> {
    let s = &traj.samples;
    if s.len() < 2 {
        return Vec::new();
    }
    let rates: Vec<f64> = s
        .windows(2)
        .map(|w| {
            let dr = (w[1].r - w[0].r).abs();
            let dt = w[1].t - w[0].t;
            if dt > 0.0 {
                dr / dt
            } else if dr > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    let mut sorted: Vec<f64> = rates.iter().copied().filter(|r| r.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    let threshold = (10.0 * median).max(opts.rate_threshold.unwrap_or(0.0));
    let fast: Vec<bool> = rates.iter().map(|&r| r > threshold && r > 0.0).collect();

    // runs of fast segments as half-open sample ranges, gaps of one merged
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < fast.len() {
        if !fast[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < fast.len() && fast[k] {
            k += 1;
        }
        match runs.last_mut() {
            Some(last) if start - last.1 <= 1 => last.1 = k,
            _ => runs.push((start, k)),
        }
    }

    runs.into_iter()
        .filter_map(|(a, b)| {
            // an instantaneous segment inside the run is the jump itself;
            // the steep fold approach before it is slow motion
            let (a, b) = match (a..b).find(|&k| rates[k].is_infinite()) {
                Some(first) => {
                    let last = (first..b).rev().find(|&k| rates[k].is_infinite()).unwrap_or(first);
                    (first, last + 1)
                }
                None => (a, b),
            };
            let (from, to) = (&s[a], &s[b]);
            let slip = s[a..=b]
                .iter()
                .map(|p| (p.y - from.y).abs())
                .fold(0.0, f64::max);
            let dr = to.r - from.r;
            (dr.abs() > opts.jump_min && slip < opts.y_slip).then_some(JumpEvent {
                t_start: from.t,
                t_end: to.t,
                y_at_jump: from.y,
                r_from: from.r,
                r_to: to.r,
                direction: if dr > 0.0 { Direction::Up } else { Direction::Down },
                y_slip: slip,
                arcs: None,
            })
        })
        .collect()
}

/// Fill in [`JumpEvent::arcs`] from the arcs nearest the jump endpoints.
pub fn attribute_jumps(spec: &ModelSpec, iso: &LmIsocline, jumps: &mut [JumpEvent]) {
    // jumps join stable arcs, and stable arcs occupy disjoint rate
    // intervals, so containment decides; a point that drifted past a fold
    // goes to the stable arc whose curve is nearest at its income
    let stable: Vec<(usize, (f64, f64))> = iso
        .branches
        .iter()
        .filter(|b| b.stability == Stability::Stable)
        .filter_map(|b| Some((b.arc, iso.arc_rate_interval(b.arc)?)))
        .collect();
    let nearest = |y: f64, r: f64| -> Option<usize> {
        if let Some(&(arc, _)) = stable.iter().find(|(_, (lo, hi))| r >= lo - 1e-9 && r <= hi + 1e-9) {
            return Some(arc);
        }
        stable
            .iter()
            .filter_map(|&(arc, _)| Some((arc, (iso.arc_rate(spec, arc, y)? - r).abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(arc, _)| arc)
    };
    for j in jumps {
        j.arcs = match (nearest(j.y_at_jump, j.r_from), nearest(j.y_at_jump, j.r_to)) {
            (Some(a), Some(b)) => Some([a, b]),
            _ => None,
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Counterclockwise,
    Clockwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub period: f64,
    pub orientation: Orientation,
    /// Shoelace area of one loop; positive when counterclockwise.
    pub signed_area: f64,
    pub jumps: Vec<JumpEvent>,
    pub y_turning: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub t_start: f64,
    /// Sample indices bounding one loop.
    pub start_index: usize,
    pub end_index: usize,
    pub recurrences: usize,
}

impl CycleSummary {
    pub fn loop_points(&self, traj: &Trajectory) -> Vec<[f64; 2]> {
        traj.samples[self.start_index..=self.end_index]
            .iter()
            .map(|s| [s.y, s.r])
            .collect()
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + s * d[0], a[1] + s * d[1]];
    (((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(), s)
}

/// Signed area enclosed by a closed polyline (shoelace formula).
pub fn signed_area(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    (0..n)
        .map(|k| {
            let (p, q) = (points[k], points[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Periodic orbit by recurrence to the first post-transient sample.
pub fn detect_cycle(traj: &Trajectory, opts: &DetectOptions) -> Option<CycleSummary> {
    let s = &traj.samples;
    if s.len() < 3 {
        return None;
    }
    let start = ((s.len() as f64 * opts.transient_fraction) as usize).min(s.len() - 2);
    let p0 = [s[start].y, s[start].r];
    let radius = opts.recurrence_radius;
    let mut inside = true;
    // (segment index, interpolated time)
    let mut hits: Vec<(usize, f64)> = Vec::new();
    for k in start..s.len() - 1 {
        let a = [s[k].y, s[k].r];
        let b = [s[k + 1].y, s[k + 1].r];
        let (d, frac) = segment_distance(p0, a, b);
        if inside {
            let far = segment_distance(p0, b, b).0;
            if far > 10.0 * radius {
                inside = false;
            }
        } else if d <= radius {
            hits.push((k, s[k].t + frac * (s[k + 1].t - s[k].t)));
            inside = true;
        }
    }
    let &(end_seg, t1) = hits.first()?;
    let t0 = s[start].t;
    let mut times = vec![t0];
    times.extend(hits.iter().map(|h| h.1));
    let period = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
    let end_index = end_seg + 1;
    let pts: Vec<[f64; 2]> = s[start..=end_index].iter().map(|p| [p.y, p.r]).collect();
    let area = signed_area(&pts);
    let jumps: Vec<JumpEvent> = detect_jumps_with(traj, opts)
        .into_iter()
        .filter(|j| j.t_start >= t0 && j.t_start < t1)
        .collect();
    let (r_min, r_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    Some(CycleSummary {
        period,
        orientation: if area > 0.0 {
            Orientation::Counterclockwise
        } else {
            Orientation::Clockwise
        },
        signed_area: area,
        y_turning: jumps.iter().map(|j| j.y_at_jump).collect(),
        jumps,
        r_min,
        r_max,
        t_start: t0,
        start_index: start,
        end_index,
        recurrences: hits.len(),
    })
}

fn densify(points: &[[f64; 2]], max_len: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        out.push(w[0]);
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        let n = (d / max_len).ceil() as usize;
        for k in 1..n {
            let s = k as f64 / n as f64;
            out.push([w[0][0] + s * (w[1][0] - w[0][0]), w[0][1] + s * (w[1][1] - w[0][1])]);
        }
    }
    if let Some(&last) = points.last() {
        out.push(last);
    }
    out
}

fn decimate(points: &[[f64; 2]], max_n: usize) -> Vec<[f64; 2]> {
    if points.len() <= max_n {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(max_n);
    let mut out: Vec<[f64; 2]> = points.iter().step_by(stride).copied().collect();
    out.push(*points.last().unwrap());
    out
}

fn directed(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    from.iter()
        .map(|&p| {
            if to.len() == 1 {
                return segment_distance(p, to[0], to[0]).0;
            }
            to.windows(2)
                .map(|w| segment_distance(p, w[0], w[1]).0)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each (densified so long straight pieces count) to the
/// segments of the other.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let extent = a
        .iter()
        .chain(b)
        .fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |e, p| {
            [e[0].min(p[0]), e[1].max(p[0]), e[2].min(p[1]), e[3].max(p[1])]
        });
    let step = 1e-3 * ((extent[1] - extent[0]).max(extent[3] - extent[2])).max(1e-12);
    let a = decimate(&densify(a, step), 4000);
    let b = decimate(&densify(b, step), 4000);
    directed(&a, &b).max(directed(&b, &a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn traj(points: &[(f64, f64, f64)]) -> Trajectory {
        Trajectory {
            mode: Mode::Full,
            spec_id: String::new(),
            samples: points
                .iter()
                .map(|&(t, y, r)| Sample {
                    t,
                    y,
                    r,
                    regime: Regime::Slow,
                })
                .collect(),
        }
    }

    #[test]
    fn ramp_values() {
        let ramp = Ramp {
            t0: 1.0,
            y0: 3.0,
            t1: 3.0,
            y1: 5.0,
        };
        assert_eq!(ramp.value(0.0), 3.0);
        assert_eq!(ramp.value(2.0), 4.0);
        assert_eq!(ramp.value(10.0), 5.0);
        assert_eq!(ramp.time_of(4.0, 1.0, 3.0), Some(2.0));
        assert_eq!(ramp.time_of(6.0, 1.0, 3.0), None);
    }

    #[test]
    fn arc_map_of_reference() {
        let spec = presets::reference();
        let arcs = ArcMap::new(&spec, (-0.1, 0.3));
        assert_eq!(arcs.len(), 3);
        assert!(arcs.is_stable(0) && !arcs.is_stable(1) && arcs.is_stable(2));
        assert!((arcs.interval(1).0 - 0.04).abs() < 1e-15);
        assert!((arcs.interval(1).1 - 0.10).abs() < 1e-15);
        assert!((fold_income(&spec, 0.04) - 4.0).abs() < 1e-12);
        assert!((fold_income(&spec, 0.10) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_gives_empty_trajectory() {
        let spec = presets::reference();
        let t = integrate(&spec, 3.0, 0.0, 0.0, &IntegrateOptions::default()).unwrap();
        assert!(t.is_empty());
        assert!(integrate(&spec, 3.0, 0.0, -1.0, &IntegrateOptions::default()).is_err());
    }

    #[test]
    fn jumps_found_in_synthetic_step() {
        let mut pts = Vec::new();
        for k in 0..50 {
            pts.push((k as f64, 1.0 + 0.001 * k as f64, 0.001 * k as f64));
        }
        pts.push((50.0, 1.05, 0.5));
        for k in 51..100 {
            pts.push((k as f64, 1.05, 0.5 + 0.001 * (k - 50) as f64));
        }
        let jumps = detect_jumps(&traj(&pts), 0.02, 0.1);
        assert_eq!(jumps.len(), 1);
        assert_eq!(jumps[0].direction, Direction::Up);
        assert!((jumps[0].r_to - 0.5).abs() < 1e-12);
    }

    #[test]
    fn resting_trajectory_has_no_jumps() {
        let pts: Vec<_> = (0..20).map(|k| (k as f64, 2.0, 0.05)).collect();
        assert!(detect_jumps(&traj(&pts), 0.02, 0.1).is_empty());
        assert!(detect_cycle(&traj(&pts), &DetectOptions::default()).is_none());
    }

    #[test]
    fn circle_orientation_and_period() {
        let pts: Vec<_> = (0..=2000)
            .map(|k| {
                let t = k as f64 * 0.01;
                (t, t.cos(), t.sin())
            })
            .collect();
        let forward = traj(&pts);
        let c = detect_cycle(&forward, &DetectOptions::default()).unwrap();
        assert_eq!(c.orientation, Orientation::Counterclockwise);
        assert!((c.period - std::f64::consts::TAU).abs() < 1e-3);
        let backward: Vec<_> = pts.iter().map(|&(t, y, r)| (t, y, -r)).collect();
        let c = detect_cycle(&traj(&backward), &DetectOptions::default()).unwrap();
        assert_eq!(c.orientation, Orientation::Clockwise);
    }

    #[test]
    fn hausdorff_of_offset_squares() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
        let shifted: Vec<[f64; 2]> = sq.iter().map(|p| [p[0] + 0.1, p[1]]).collect();
        assert!((hausdorff(&sq, &shifted) - 0.1).abs() < 1e-12);
        assert_eq!(hausdorff(&sq, &sq), 0.0);
    }
}
