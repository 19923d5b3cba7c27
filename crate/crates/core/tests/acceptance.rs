//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails on any FAIL outside `UNATTAINABLE`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use islm_core::dynamics::{
    attribute_jumps, detect_cycle, hausdorff, integrate, reduced_simulate, DetectOptions, Direction,
    IntegrateOptions, Mode, Orientation, Regime, Trajectory,
};
use islm_core::geometry::{
    lm_roots, shift_lm, trace_lm_isocline, Classification, Domain, Equilibrium, FoldKind,
    TraceOptions,
};
use islm_core::io::config::{parse_config, Format, RunConfig};
use islm_core::io::output::{emit_outputs, trajectory_csv, Provenance, ResultDoc, TRAJECTORY_HEADER};
use islm_core::io::svg::{render, Portrait};
use islm_core::policy::{
    apply_scenario, fiscal_sweep, fiscal_tangency, negative_rate_probe, plan_stabilization, run_with_controller,
    touching_inflation, FiscalRamp, Instrument, RunSettings, Scenario, Step,
};
use islm_core::validate::{self, validate_properties};
use islm_core::{Error, ModelSpec};

/// Criteria that cannot hold for this model family; see the README.
const UNATTAINABLE: &[u32] = &[8];

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> (RunConfig, ModelSpec) {
    let path = configs().join(name);
    let cfg = parse_config(&path).unwrap();
    let spec = cfg.resolve_model(path.parent().unwrap()).unwrap();
    (cfg, spec)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// 1 ---------------------------------------------------------------------------

fn properties() -> Outcome {
    let (cfg, spec) = config("reference.toml");
    let t = Instant::now();
    let report = validate_properties(&spec, &cfg.domain, 200);
    let elapsed = t.elapsed().as_secs_f64();
    let mut notes = vec![format!("reference passes: {} in {elapsed:.3} s", report.passed)];
    let mut ok = report.passed && elapsed < 1.0;

    let mut broken = Vec::new();
    let mut s = spec.clone();
    s.is_block.i_y = 1.2;
    broken.push(("i_y = 1.2", s, validate::INVESTMENT_INCOME));
    let mut s = spec.clone();
    s.money.m_y = 0.6;
    broken.push(("m_y = 0.6", s, validate::MONEY_INCOME));
    let mut s = spec.clone();
    s.is_block.s_r = -6.0;
    broken.push(("s_r = -6", s, validate::SAVING_RATE));
    let mut s = spec.clone();
    s.money.windows[0].amp_l = -0.4;
    broken.push(("demand falling in trap", s, validate::DEMAND_RATE_TRAP));
    let mut s = spec.clone();
    s.money.windows[0].amp_m = -0.2;
    broken.push(("supply rising in trap", s, validate::SUPPLY_RATE_TRAP));
    for (label, s, expect) in broken {
        let r = validate_properties(&s, &cfg.domain, 200);
        let diagnosed = !r.passed && r.check(expect).is_some_and(|c| !c.passed);
        ok &= diagnosed;
        notes.push(format!("{label} -> {}", if diagnosed { "diagnosed" } else { "MISSED" }));
    }
    outcome(ok, notes.join("; "))
}

// 2 ---------------------------------------------------------------------------

/// Folds from the closed form `Y = -E(0, r*) / E_y` at the sign changes
/// `r*` of `dE/dR`, found by a dense rate scan.
fn fold_oracle(spec: &ModelSpec, d: &Domain) -> Vec<(f64, f64)> {
    let e_y = spec.money.l_y - spec.money.m_y;
    let de = |r: f64| spec.money_gap_dr(r);
    let n = 40_000;
    // exact zeros on nodes are dropped so brackets span them
    let rs: Vec<(f64, f64)> = (0..=n)
        .map(|k| d.r_min + (d.r_max - d.r_min) * k as f64 / n as f64)
        .map(|r| (r, de(r)))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    let mut out = Vec::new();
    for w in rs.windows(2) {
        let ((mut lo, a), (mut hi, b)) = (w[0], w[1]);
        if a.signum() == b.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = de(mid);
            if v == 0.0 {
                (lo, hi) = (mid, mid);
                break;
            }
            if v.signum() == a.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let y = -spec.money_gap(0.0, r) / e_y;
        if y > d.y_min && y < d.y_max {
            out.push((y, r));
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// Largest number of sign changes of `E(y, ·)` over a dense rate scan.
fn count_oracle(spec: &ModelSpec, d: &Domain) -> usize {
    let n = 4000;
    (0..=200)
        .map(|k| d.y_min + (d.y_max - d.y_min) * (k as f64 + 0.5) / 201.0)
        .map(|y| {
            let v: Vec<f64> = (0..=n)
                .map(|j| spec.money_gap(y, d.r_min + (d.r_max - d.r_min) * j as f64 / n as f64))
                .collect();
            v.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
        })
        .max()
        .unwrap()
}

fn geometry() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for (file, folds, branches) in [
        ("no_trap.toml", 0, 1),
        ("reference.toml", 2, 3),
        ("twice_bent.toml", 4, 5),
        ("thrice_bent.toml", 6, 7),
    ] {
        let (cfg, spec) = config(file);
        let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
        let oracle = fold_oracle(&spec, &cfg.domain);
        let alternating = iso.branches.iter().all(|b| {
            let want = if b.arc % 2 == 1 { "Stable" } else { "Unstable" };
            format!("{:?}", b.stability) == want
        });
        let mut worst: f64 = 0.0;
        let matched = oracle.len() == iso.folds.len()
            && iso.folds.iter().zip(&oracle).all(|(f, &(y, r))| {
                worst = worst.max((f.y - y).abs()).max((f.r - r).abs());
                (f.y - y).abs() < 1e-8 && (f.r - r).abs() < 1e-8
            });
        let counted = count_oracle(&spec, &cfg.domain);
        let good = iso.folds.len() == folds
            && iso.max_branch_count == branches
            && counted == branches
            && alternating
            && matched;
        ok &= good;
        notes.push(format!(
            "{file}: {} folds, {} branches, oracle {} folds/{counted} roots, dev {worst:.1e}{}",
            iso.folds.len(),
            iso.max_branch_count,
            oracle.len(),
            if alternating { "" } else { ", stability NOT alternating" }
        ));
    }
    let elapsed = t.elapsed().as_secs_f64();
    ok &= elapsed < 10.0;
    notes.push(format!("{elapsed:.2} s"));
    outcome(ok, notes.join("; "))
}

// 3 ---------------------------------------------------------------------------

fn shift_law() -> Outcome {
    let (cfg, spec) = config("reference.toml");
    let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
    let range = (-0.5, 0.7);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    let mut skipped = 0;
    for delta in [0.01, -0.01, 0.05, -0.05] {
        let shifted = shift_lm(&spec, delta, 0.0).unwrap();
        for k in 0..=400 {
            let y = cfg.domain.y_min + (cfg.domain.y_max - cfg.domain.y_min) * k as f64 / 400.0;
            // a double root is only resolved to about the square root of
            // machine precision, so grid nodes on a fold are left out
            if iso.folds.iter().any(|f| (f.y - y).abs() < 1e-6) {
                skipped += 1;
                continue;
            }
            let a = lm_roots(y, &spec, range, 2000).unwrap();
            let b = lm_roots(y, &shifted, range, 2000).unwrap();
            if a.len() != b.len() {
                mismatched += 1;
                continue;
            }
            for (ra, rb) in a.iter().zip(&b) {
                worst = worst.max((rb - ra + delta).abs());
            }
        }
    }
    outcome(
        worst < 1e-9 && mismatched == 0,
        format!(
            "max |R(pi+d) - R(pi) + d| = {worst:.2e}, root-count mismatches {mismatched}, fold nodes skipped {skipped}"
        ),
    )
}

// 4 ---------------------------------------------------------------------------

/// Classification from a central-difference Jacobian of
/// `(alpha (I - S), beta (L - M - M_S))` and its eigenvalues.
fn eigen_oracle(spec: &ModelSpec, y: f64, r: f64) -> &'static str {
    let (a, b) = (spec.params.alpha, spec.params.beta);
    let f = |y: f64, r: f64| [a * spec.goods_gap(y, r), b * spec.money_gap(y, r)];
    let (hy, hr) = (1e-6, 1e-7);
    let (fy1, fy0) = (f(y + hy, r), f(y - hy, r));
    let (fr1, fr0) = (f(y, r + hr), f(y, r - hr));
    let j = [
        [(fy1[0] - fy0[0]) / (2.0 * hy), (fr1[0] - fr0[0]) / (2.0 * hr)],
        [(fy1[1] - fy0[1]) / (2.0 * hy), (fr1[1] - fr0[1]) / (2.0 * hr)],
    ];
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    let (re, complex) = if disc >= 0.0 {
        let s = disc.sqrt();
        ([0.5 * (tr - s), 0.5 * (tr + s)], false)
    } else {
        ([0.5 * tr, 0.5 * tr], true)
    };
    match (re[0] < 0.0, re[1] < 0.0, complex) {
        (true, true, false) => "stable-node",
        (true, true, true) => "stable-focus",
        (false, false, false) => "unstable-node",
        (false, false, true) => "unstable-focus",
        _ => "saddle",
    }
}

fn class_name(c: Classification) -> String {
    serde_json::to_value(c).unwrap().as_str().unwrap().to_string()
}

/// Equilibria located by sign changes of `E` along the IS line.
fn location_oracle(spec: &ModelSpec, d: &Domain) -> Vec<f64> {
    // I - S is affine in R
    let is = |y: f64| {
        let (a, b) = (spec.goods_gap(y, 0.0), spec.goods_gap(y, 1.0));
        a / (a - b)
    };
    let g = |y: f64| spec.money_gap(y, is(y));
    let n = 100_000;
    let ys: Vec<f64> = (0..=n).map(|k| d.y_min + (d.y_max - d.y_min) * k as f64 / n as f64).collect();
    ys.windows(2)
        .filter(|w| g(w[0]).signum() != g(w[1]).signum())
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

fn multiplicity() -> Outcome {
    let (cfg, spec) = config("reference_fiscal.toml");
    let (d, tr) = (cfg.domain, cfg.isocline);
    let (g_star, at_tangency) = fiscal_tangency(&spec, &d, &tr, 0.0, 1.0).unwrap();
    let gs: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
    let sweep = fiscal_sweep(&spec, &d, &tr, &gs).unwrap();
    let mut notes = vec![format!("tangency at g = {g_star:.9}")];
    let mut ok = at_tangency.len() == 2
        && at_tangency.iter().filter(|e| e.classification == Classification::NearDegenerate).count() == 1;
    notes.push(format!("{} equilibria at tangency", at_tangency.len()));

    let mut counts = Vec::new();
    let mut saddle_ok = true;
    let mut oracle_ok = true;
    let mut location_ok = true;
    let mut check_classes = |spec: &ModelSpec, eq: &[Equilibrium]| {
        for e in eq {
            if e.classification == Classification::NearDegenerate {
                continue;
            }
            let want = eigen_oracle(spec, e.y, e.r);
            if class_name(e.classification) != want {
                oracle_ok = false;
            }
        }
    };
    for (g, eq) in &sweep {
        let shifted = spec.with_fiscal_shift(*g);
        if counts.last() != Some(&eq.len()) {
            counts.push(eq.len());
        }
        if eq.len() == 3 && eq[1].classification != Classification::Saddle {
            saddle_ok = false;
        }
        let loc = location_oracle(&shifted, &d);
        if loc.len() == eq.len() {
            location_ok &= loc.iter().zip(eq).all(|(y, e)| (y - e.y).abs() < 1e-3);
        } else if (g - g_star).abs() > 1e-3 {
            location_ok = false;
        }
        check_classes(&shifted, eq);
        let below = *g < g_star;
        if below && eq.len() != 3 || !below && eq.len() != 1 {
            ok = false;
        }
    }
    check_classes(&spec.with_fiscal_shift(g_star), &at_tangency);
    ok &= saddle_ok && oracle_ok && location_ok && counts == vec![3, 1];
    notes.push(format!("sweep counts {counts:?} with tangency between"));
    notes.push(format!("middle saddle {saddle_ok}, eigen oracle {oracle_ok}, location oracle {location_ok}"));
    outcome(ok, notes.join("; "))
}

// 5 and 6 -------------------------------------------------------------------

struct CycleRuns {
    reduced: Trajectory,
    full: Vec<(f64, Trajectory)>,
    detect: DetectOptions,
    spec: ModelSpec,
    domain: Domain,
    trace: TraceOptions,
}

fn cycle_runs() -> CycleRuns {
    let (cfg, spec) = config("reference.toml");
    let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
    let opts = IntegrateOptions::default();
    let reduced = reduced_simulate(&spec, &iso, 3.0, 1, 60_000.0, &opts).unwrap();
    let r0 = iso.arc_rate(&spec, 1, 3.0).unwrap();
    let full = [1e-2, 1e-3, 1e-4]
        .into_iter()
        .map(|eps| {
            let mut s = spec.clone();
            s.params.epsilon = eps;
            // about three slow periods of fast time
            (eps, integrate(&s, 3.0, r0, 25.0 / eps, &opts).unwrap())
        })
        .collect();
    CycleRuns {
        reduced,
        full,
        detect: cfg.detect,
        spec,
        domain: cfg.domain,
        trace: cfg.isocline,
    }
}

fn oscillation(runs: &CycleRuns, started: Instant) -> Outcome {
    let iso = trace_lm_isocline(&runs.spec, &runs.domain, &runs.trace).unwrap();
    let y_up = iso.folds.iter().find(|f| f.kind == FoldKind::LowerKnee).unwrap().y;
    let y_down = iso.folds.iter().find(|f| f.kind == FoldKind::UpperKnee).unwrap().y;
    let full = &runs.full.iter().find(|(e, _)| *e == 1e-3).unwrap().1;
    let mut ok = true;
    let mut notes = Vec::new();
    for (label, traj) in [("reduced", &runs.reduced), ("full eps=1e-3", full)] {
        let Some(c) = detect_cycle(traj, &runs.detect) else {
            ok = false;
            notes.push(format!("{label}: no cycle"));
            continue;
        };
        let ups: Vec<f64> = c.jumps.iter().filter(|j| j.direction == Direction::Up).map(|j| j.y_at_jump).collect();
        let downs: Vec<f64> =
            c.jumps.iter().filter(|j| j.direction == Direction::Down).map(|j| j.y_at_jump).collect();
        let near = |v: &[f64], y: f64| v.len() == 1 && ((v[0] - y) / y).abs() < 0.02;
        let good = c.orientation == Orientation::Counterclockwise
            && c.jumps.len() == 2
            && near(&ups, y_up)
            && near(&downs, y_down);
        ok &= good;
        notes.push(format!(
            "{label}: {:?}, {} jumps/period, up at {:?} down at {:?}",
            c.orientation,
            c.jumps.len(),
            ups,
            downs
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    ok &= elapsed < 30.0;
    notes.push(format!("{elapsed:.2} s"));
    outcome(ok, notes.join("; "))
}

fn convergence(runs: &CycleRuns) -> Outcome {
    let red = detect_cycle(&runs.reduced, &runs.detect).unwrap();
    let red_loop = red.loop_points(&runs.reduced);
    let mut dists = Vec::new();
    for (eps, traj) in &runs.full {
        match detect_cycle(traj, &runs.detect) {
            Some(c) => dists.push((*eps, hausdorff(&c.loop_points(traj), &red_loop))),
            None => return outcome(false, format!("no cycle at eps = {eps}")),
        }
    }
    let ok = dists.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-6);
    outcome(
        ok,
        dists
            .iter()
            .map(|(e, h)| format!("eps {e:.0e}: {h:.2e}"))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

// 7 ---------------------------------------------------------------------------

fn census() -> Outcome {
    let designated: [(&str, &[[usize; 2]]); 7] = [
        ("thrice_outer.toml", &[[1, 7], [7, 1]]),
        ("thrice_inner.toml", &[[3, 5], [5, 3]]),
        ("thrice_third_down.toml", &[[3, 1]]),
        ("thrice_fifth_up.toml", &[[5, 7]]),
        ("twice_outer.toml", &[[1, 5], [5, 1]]),
        ("twice_middle_down.toml", &[[3, 1]]),
        ("twice_middle_up.toml", &[[3, 5]]),
    ];
    let mut ok = true;
    let mut thrice = Vec::new();
    let mut twice = Vec::new();
    let mut notes = Vec::new();
    for (file, want) in designated {
        let (cfg, spec) = config(&format!("scenarios/{file}"));
        let mut set = RunSettings::new(cfg.simulate.mode, cfg.domain);
        set.detect = cfg.detect;
        let run = apply_scenario(
            &spec,
            cfg.scenario.as_ref().unwrap(),
            cfg.simulate.y0,
            cfg.simulate.r0.unwrap(),
            &set,
        )
        .unwrap();
        let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
        let mut jumps = run.jumps;
        attribute_jumps(&spec, &iso, &mut jumps);
        let got: Vec<[usize; 2]> = jumps.iter().filter_map(|j| j.arcs).collect();
        let exact = got.len() == jumps.len() && got == want;
        ok &= exact;
        if file.starts_with("thrice") {
            thrice.extend(got.iter().copied());
        } else {
            twice.extend(got.iter().copied());
        }
        if !exact {
            notes.push(format!("{file}: got {got:?}, want {want:?}"));
        }
    }
    let distinct = |v: &mut Vec<[usize; 2]>| {
        v.sort();
        let n = v.len();
        v.dedup();
        (v.len(), n)
    };
    let (d3, n3) = distinct(&mut thrice);
    let (d2, n2) = distinct(&mut twice);
    ok &= d3 == 6 && n3 == 6 && d2 == 4 && n2 == 4;
    notes.insert(0, format!("thrice-bent: {d3} distinct segments in {n3} jumps; twice-bent: {d2} in {n2}"));
    outcome(ok, notes.join("; "))
}

// 8 ---------------------------------------------------------------------------

fn controller() -> (Outcome, bool) {
    let (cfg, spec) = config("reference.toml");
    let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
    let fold = *iso.folds.iter().find(|f| f.kind == FoldKind::LowerKnee).unwrap();
    let ramp = FiscalRamp {
        y_start: 3.0,
        y_end: 5.0,
        duration: 2000.0,
        settle: 500.0,
    };
    let mut notes = Vec::new();
    let mut inflation_ok = true;
    for mode in [Mode::Reduced, Mode::Full] {
        let set = RunSettings::new(mode, cfg.domain);
        let plan = plan_stabilization(&spec, &cfg.domain, &fold, Instrument::Inflation, 0.05).unwrap();
        let rep = run_with_controller(&spec, &ramp, &plan, &set).unwrap();
        let good = rep.uncontrolled.jump_count == 1 && rep.controlled.jump_count == 0 && rep.within_band && !rep.late;
        inflation_ok &= good;
        notes.push(format!(
            "inflation ({mode:?}): d_pi {:.6}, jumps {} -> {}, max |R - R_pre| {:.4} vs height {:.4}",
            plan.delta,
            rep.uncontrolled.jump_count,
            rep.controlled.jump_count,
            rep.max_deviation,
            rep.uncontrolled.jumps.first().map_or(f64::NAN, |j| j.height().abs()),
        ));
    }
    let money_ok = match plan_stabilization(&spec, &cfg.domain, &fold, Instrument::MoneyStock, 0.05) {
        Ok(plan) => {
            let set = RunSettings::new(Mode::Reduced, cfg.domain);
            let rep = run_with_controller(&spec, &ramp, &plan, &set).unwrap();
            let good = plan.residual.abs() < 1e-8 && rep.controlled.jump_count == 0 && rep.within_band;
            notes.push(format!("money stock: d_ms {:.6}, residual {:.1e}", plan.delta, plan.residual));
            good
        }
        Err(Error::NoSolution(msg)) => {
            notes.push(format!(
                "money stock: no solution ({msg}); a money-stock change moves the isocline along Y only, \
                 so the landing arc keeps its rate range and cannot pass through the fold rate"
            ));
            false
        }
        Err(e) => {
            notes.push(format!("money stock: {e}"));
            false
        }
    };
    (outcome(inflation_ok && money_ok, notes.join("; ")), inflation_ok)
}

// 9 ---------------------------------------------------------------------------

fn negative_rate() -> Outcome {
    let (cfg, spec) = config("reference.toml");
    let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
    let set = RunSettings::new(Mode::Reduced, cfg.domain);
    let r0 = iso.arc_rate(&spec, 1, 3.0).unwrap();
    let horizon = 60_000.0;

    // cycle minimum is the landing point of the downward jump on the lowest
    // arc; bisect E(Y1, .) from the bottom of the domain
    let y1 = iso.folds.iter().find(|f| f.kind == FoldKind::UpperKnee).unwrap().y;
    let e = |r: f64| spec.money_gap(y1, r);
    let n = 20_000;
    let (mut lo, mut hi) = (0..n)
        .map(|k| {
            let a = cfg.domain.r_min + (cfg.domain.r_max - cfg.domain.r_min) * k as f64 / n as f64;
            (a, a + (cfg.domain.r_max - cfg.domain.r_min) / n as f64)
        })
        .find(|&(a, b)| e(a).signum() != e(b).signum())
        .unwrap();
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if e(mid).signum() == e(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let expected = spec.params.expected_inflation + 0.5 * (lo + hi);

    let found = touching_inflation(&spec, 3.0, r0, horizon, 0.02, 1e-8, &set).unwrap();
    let past = found - spec.params.expected_inflation + 0.005;
    let shifted = shift_lm(&spec, past, 0.0).unwrap();
    let scenario = Scenario {
        horizon,
        steps: Vec::<Step>::new(),
    };
    let probe = negative_rate_probe(&shifted, &scenario, 3.0, r0 - past, &set).unwrap();
    let ok = (found - expected).abs() < 1e-6 && !probe.crossings.is_empty();
    outcome(
        ok,
        format!(
            "touching pi^e {found:.9} vs oracle {expected:.9}; {} sign-crossing jumps past it (cycle min {:?})",
            probe.crossings.len(),
            probe.cycle_r_min
        ),
    )
}

// 10 --------------------------------------------------------------------------

fn simulate_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let (cfg, spec) = config("reference.toml");
    let iso = trace_lm_isocline(&spec, &cfg.domain, &cfg.isocline).unwrap();
    let r0 = iso.arc_rate(&spec, 1, cfg.simulate.y0).unwrap();
    let traj = integrate(&spec, cfg.simulate.y0, r0, cfg.simulate.t_end, &cfg.simulate.solver).unwrap();
    let mut jumps = islm_core::dynamics::detect_jumps_with(&traj, &cfg.detect);
    attribute_jumps(&spec, &iso, &mut jumps);
    let mut doc = ResultDoc::new("simulate");
    doc.spec_id = Some(traj.spec_id.clone());
    doc.isocline = Some(iso.clone());
    doc.jumps = Some(jumps.clone());
    doc.cycle = detect_cycle(&traj, &cfg.detect);
    let svg = render(&Portrait {
        spec: &spec,
        domain: cfg.domain,
        isocline: Some(&iso),
        equilibria: &[],
        trajectory: Some(&traj),
        jumps: &jumps,
        title: "reference",
    });
    let prov = Provenance::new("simulate", &cfg);
    let formats = [Format::Csv, Format::Json, Format::Svg];
    let written = emit_outputs(dir, &formats, &doc, Some(&traj), Some(&svg), &prov).unwrap();
    written
        .into_iter()
        .filter(|p| !p.ends_with("provenance.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let base = std::env::temp_dir().join(format!("islm-acceptance-{}", std::process::id()));
    let a = simulate_outputs(&base.join("a"));
    let b = simulate_outputs(&base.join("b"));
    let identical = a == b && a.len() == 3;

    let mut round_trip = true;
    for (name, bytes) in &a {
        let text = String::from_utf8(bytes.clone()).unwrap();
        match name.as_str() {
            "result.json" => {
                let doc = ResultDoc::from_json(&text).unwrap();
                round_trip &= doc.to_json() == text;
            }
            "trajectory.csv" => {
                let mut lines = text.lines();
                round_trip &= lines.next() == Some(TRAJECTORY_HEADER);
                let samples: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
                let rebuilt = Trajectory {
                    mode: Mode::Full,
                    spec_id: String::new(),
                    samples: samples
                        .iter()
                        .map(|f| islm_core::dynamics::Sample {
                            t: f[0].parse().unwrap(),
                            y: f[1].parse().unwrap(),
                            r: f[2].parse().unwrap(),
                            regime: if f[3] == "jump" { Regime::Jump } else { Regime::Slow },
                        })
                        .collect(),
                };
                round_trip &= trajectory_csv(&rebuilt) == text;
            }
            _ => {}
        }
    }
    for file in [
        "reference.toml",
        "reference_fiscal.toml",
        "no_trap.toml",
        "twice_bent.toml",
        "thrice_bent.toml",
    ] {
        let (cfg, _) = config(file);
        round_trip &= RunConfig::from_toml(&cfg.to_toml(), "echo").unwrap() == cfg;
    }
    let _ = std::fs::remove_dir_all(&base);
    outcome(
        identical && round_trip,
        format!(
            "{} data files byte-identical: {identical}; documents round-trip: {round_trip}",
            a.len()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(u32, Outcome)> = vec![
        (1, properties()),
        (2, geometry()),
        (3, shift_law()),
        (4, multiplicity()),
    ];
    let started = Instant::now();
    let runs = cycle_runs();
    results.push((5, oscillation(&runs, started)));
    results.push((6, convergence(&runs)));
    results.push((7, census()));
    let (c8, inflation_half) = controller();
    results.push((8, c8));
    results.push((9, negative_rate()));
    results.push((10, determinism()));

    let mut unexpected = Vec::new();
    for (n, o) in &results {
        println!("criterion {n:>2}: {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass && !UNATTAINABLE.contains(n) {
            unexpected.push(*n);
        }
    }
    // the attainable half of an unattainable criterion must still hold
    assert!(inflation_half, "inflation-instrument controller regressed");
    assert!(unexpected.is_empty(), "failed criteria: {unexpected:?}");
}
