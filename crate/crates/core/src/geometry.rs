//! IS curve, multivalued LM isocline, folds and equilibria.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::roots::{bisect, bisect_predicate, golden_min, scan_roots};

/// Rectangle of the `(Y, R)` plane on which curves are traced and
/// properties checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Domain {
    pub y_min: f64,
    pub y_max: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            y_min: 0.0,
            y_max: 10.0,
            r_min: -0.1,
            r_max: 0.3,
        }
    }
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_min >= 0.0) {
            return Err(Error::param("domain.y_min", "income range must start at Y >= 0"));
        }
        if !(self.y_max > self.y_min) {
            return Err(Error::param("domain.y_max", "empty income range"));
        }
        if !(self.r_max > self.r_min) {
            return Err(Error::param("domain.r_max", "empty rate range"));
        }
        Ok(())
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    /// Number of income intervals swept by the tracer.
    pub y_steps: usize,
    /// Number of rate intervals scanned for roots at each income level.
    pub scan_n: usize,
    /// Width to which fold incomes are bisected.
    pub fold_tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            y_steps: 800,
            scan_n: 1200,
            fold_tol: 1e-8,
        }
    }
}

impl TraceOptions {
    pub fn validate(&self) -> Result<()> {
        if self.y_steps < 500 {
            return Err(Error::param("isocline.y_steps", "must be at least 500"));
        }
        if self.scan_n < 200 {
            return Err(Error::param("isocline.scan_n", "must be at least 200"));
        }
        if !(self.fold_tol > 0.0) {
            return Err(Error::param("isocline.fold_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Closed-form goods-market equilibrium locus `R_IS(Y) = intercept − slope·Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsCurve {
    pub intercept: f64,
    pub slope: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl IsCurve {
    pub fn rate(&self, y: f64) -> f64 {
        self.intercept - self.slope * y
    }
}

pub fn is_curve(spec: &ModelSpec, domain: &Domain) -> IsCurve {
    let b = &spec.is_block;
    let k = b.i_r + b.s_r;
    IsCurve {
        intercept: (b.i0 - b.s0) / k,
        slope: (b.s_y - b.i_y) / k,
        y_min: domain.y_min,
        y_max: domain.y_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    /// Stability of the fast subsystem from the sign of `∂(L − M − M_S)/∂R`.
    pub fn from_slope(d_dr: f64) -> Self {
        if d_dr < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    /// A stable arc below meets an unstable arc above; leaving it jumps up.
    LowerKnee,
    /// An unstable arc below meets a stable arc above; leaving it falls.
    UpperKnee,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub y: f64,
    pub r: f64,
    pub kind: FoldKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "fold")]
pub enum BranchEnd {
    Fold(usize),
    Boundary,
}

/// One single-valued piece of the LM isocline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    /// 1-based arc number, ascending in `R`.
    pub arc: usize,
    pub stability: Stability,
    pub start: BranchEnd,
    pub end: BranchEnd,
    pub y: Vec<f64>,
    pub r: Vec<f64>,
}

impl Branch {
    pub fn y_extent(&self) -> (f64, f64) {
        (self.y[0], *self.y.last().unwrap())
    }

    pub fn r_extent(&self) -> (f64, f64) {
        self.r
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmIsocline {
    pub domain: Domain,
    pub branches: Vec<Branch>,
    pub folds: Vec<FoldPoint>,
    pub max_branch_count: usize,
}

impl LmIsocline {
    pub fn branch_by_arc(&self, arc: usize) -> Option<&Branch> {
        self.branches.iter().find(|b| b.arc == arc)
    }

    /// Rate interval occupied by an arc; boundary ends extend to the domain.
    pub fn arc_rate_interval(&self, arc: usize) -> Option<(f64, f64)> {
        let b = self.branch_by_arc(arc)?;
        let (mut lo, mut hi) = b.r_extent();
        let ends = [b.start, b.end];
        let fold_r: Vec<f64> = ends
            .iter()
            .filter_map(|e| match e {
                BranchEnd::Fold(k) => Some(self.folds[*k].r),
                BranchEnd::Boundary => None,
            })
            .collect();
        if !fold_r.iter().any(|&r| r <= lo) {
            lo = self.domain.r_min;
        }
        if !fold_r.iter().any(|&r| r >= hi) {
            hi = self.domain.r_max;
        }
        Some((lo, hi))
    }

    /// `R` on the given arc at income `y`, if the arc exists there.
    pub fn arc_rate(&self, spec: &ModelSpec, arc: usize, y: f64) -> Option<f64> {
        let (lo, hi) = self.arc_rate_interval(arc)?;
        let f = |r: f64| spec.money_gap(y, r);
        let (f_lo, f_hi) = (f(lo), f(hi));
        if f_lo == 0.0 {
            return Some(lo);
        }
        if f_hi == 0.0 {
            return Some(hi);
        }
        if f_lo.signum() == f_hi.signum() {
            return None;
        }
        Some(bisect(f, lo, hi))
    }

    /// Arc whose rate interval contains `r`.
    pub fn arc_containing(&self, r: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for b in &self.branches {
            let (lo, hi) = self.arc_rate_interval(b.arc)?;
            let dist = if r < lo {
                lo - r
            } else if r > hi {
                r - hi
            } else {
                0.0
            };
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((b.arc, dist));
            }
        }
        best.filter(|&(_, d)| d <= 1e-9).map(|(arc, _)| arc)
    }

    pub fn arc_count(&self) -> usize {
        self.branches.iter().map(|b| b.arc).max().unwrap_or(0)
    }
}

/// All rates in `r_range` where money demand equals total supply at
/// income `y`, ascending.
pub fn lm_roots(y: f64, spec: &ModelSpec, r_range: (f64, f64), scan_n: usize) -> Result<Vec<f64>> {
    if scan_n < 200 {
        return Err(Error::param("scan_n", "must be at least 200"));
    }
    if y < 0.0 {
        return Err(Error::NegativeIncome(y));
    }
    let roots = roots_unchecked(spec, y, r_range, scan_n);
    for &r in &roots {
        let i = spec.short_rate(r);
        let tol = 1e-6 * (r_range.1 - r_range.0);
        if spec
            .money
            .windows
            .iter()
            .any(|w| (i - w.p).abs() < tol || (i - w.q).abs() < tol)
        {
            log::warn!(
                "LM root at Y = {y}, R = {r} lies on a trap-window endpoint where the rate derivative vanishes"
            );
        }
    }
    Ok(roots)
}

fn roots_unchecked(spec: &ModelSpec, y: f64, r_range: (f64, f64), scan_n: usize) -> Vec<f64> {
    scan_roots(
        |r| spec.money_gap(y, r),
        r_range.0,
        r_range.1,
        scan_n,
        0.0,
        0.0,
    )
    .into_iter()
    .map(|root| root.x)
    .collect()
}

struct FoldEvent {
    y: f64,
    r: f64,
    kind: FoldKind,
    /// Index of the lower root of the merging pair on the side with more roots.
    pair: usize,
    born: bool,
}

/// Sweep `y` across the domain, link roots into branches and refine folds.
pub fn trace_lm_isocline(spec: &ModelSpec, domain: &Domain, opts: &TraceOptions) -> Result<LmIsocline> {
    domain.validate()?;
    opts.validate()?;
    let r_range = domain.r_range();
    let n = opts.y_steps;
    let ys: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                domain.y_max
            } else {
                domain.y_min + (domain.y_max - domain.y_min) * k as f64 / n as f64
            }
        })
        .collect();
    let (ys, roots) = roots_on_grid(spec, &ys, r_range, opts.scan_n);

    let dy = ys[1] - ys[0];
    let r_spacing = (r_range.1 - r_range.0) / opts.scan_n as f64;
    let mut folds: Vec<FoldPoint> = Vec::new();
    let mut branches: Vec<Branch> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut max_count = roots[0].len();

    for &r in &roots[0] {
        active.push(branches.len());
        branches.push(new_branch(BranchEnd::Boundary, ys[0], r));
    }

    for k in 0..n {
        max_count = max_count.max(roots[k + 1].len());
        let mut events = Vec::new();
        if roots[k].len() != roots[k + 1].len() {
            refine_cell(
                spec,
                r_range,
                opts,
                (ys[k], &roots[k]),
                (ys[k + 1], &roots[k + 1]),
                0,
                &mut events,
            )?;
        }
        for ev in events {
            let fold_idx = folds.len();
            folds.push(FoldPoint {
                y: ev.y,
                r: ev.r,
                kind: ev.kind,
            });
            if ev.born {
                for slot in [ev.pair, ev.pair + 1] {
                    active.insert(slot, branches.len());
                    branches.push(new_branch(BranchEnd::Fold(fold_idx), ev.y, ev.r));
                }
            } else {
                if ev.pair + 1 >= active.len() {
                    return Err(Error::Tracing(format!(
                        "fold at Y = {} merges branches that are not active",
                        ev.y
                    )));
                }
                for id in active.drain(ev.pair..ev.pair + 2) {
                    let b = &mut branches[id];
                    b.y.push(ev.y);
                    b.r.push(ev.r);
                    b.end = BranchEnd::Fold(fold_idx);
                }
            }
        }
        let next = &roots[k + 1];
        if next.len() != active.len() {
            return Err(Error::Tracing(format!(
                "branch linkage lost between Y = {} and Y = {}",
                ys[k],
                ys[k + 1]
            )));
        }
        for (slot, &r) in next.iter().enumerate() {
            let b = &mut branches[active[slot]];
            let (y_prev, r_prev) = (*b.y.last().unwrap(), *b.r.last().unwrap());
            let predicted = (spec.money_gap_dy() / spec.money_gap_dr(r_prev)).abs()
                * (ys[k + 1] - y_prev).abs();
            let allowed = 10.0 * predicted.max(r_spacing).max(dy * 1e-12);
            if (r - r_prev).abs() > allowed && !predicted.is_nan() {
                return Err(Error::Tracing(format!(
                    "continuation jump of {:e} at Y = {} exceeds {:e}",
                    (r - r_prev).abs(),
                    ys[k + 1],
                    allowed
                )));
            }
            b.y.push(ys[k + 1]);
            b.r.push(r);
        }
    }

    for b in &mut branches {
        b.stability = branch_stability(spec, b);
    }
    // arcs ordered by their rate interval
    let mut order: Vec<usize> = (0..branches.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = branches[a].r_extent();
        let kb = branches[b].r_extent();
        (ka.0 + ka.1).total_cmp(&(kb.0 + kb.1))
    });
    for (rank, &idx) in order.iter().enumerate() {
        branches[idx].arc = rank + 1;
    }
    branches.sort_by_key(|b| b.arc);
    for (id, b) in branches.iter_mut().enumerate() {
        b.id = id;
    }

    Ok(LmIsocline {
        domain: *domain,
        branches,
        folds,
        max_branch_count: max_count,
    })
}

fn new_branch(start: BranchEnd, y: f64, r: f64) -> Branch {
    Branch {
        id: 0,
        arc: 0,
        stability: Stability::Stable,
        start,
        end: BranchEnd::Boundary,
        y: vec![y],
        r: vec![r],
    }
}

fn branch_stability(spec: &ModelSpec, b: &Branch) -> Stability {
    let n = b.r.len();
    let r = if n >= 3 {
        b.r[n / 2]
    } else {
        0.5 * (b.r[0] + b.r[n - 1])
    };
    Stability::from_slope(spec.money_gap_dr(r))
}

/// Roots at every grid income. A node that sits exactly on a fold shows an
/// even root count; such nodes are nudged off the fold.
fn roots_on_grid(spec: &ModelSpec, ys: &[f64], r_range: (f64, f64), scan_n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let span = ys[ys.len() - 1] - ys[0];
    let (y_lo, y_hi) = (ys[0], ys[ys.len() - 1]);
    let solve = |y: f64| -> (f64, Vec<f64>) {
        let roots = roots_unchecked(spec, y, r_range, scan_n);
        if roots.len() % 2 == 1 {
            return (y, roots);
        }
        for dy in [1e-9 * span, -1e-9 * span] {
            let y2 = (y + dy).clamp(y_lo, y_hi);
            let roots2 = roots_unchecked(spec, y2, r_range, scan_n);
            if roots2.len() % 2 == 1 {
                return (y2, roots2);
            }
        }
        (y, roots)
    };
    // no threads in the browser
    if cfg!(target_arch = "wasm32") {
        return ys.iter().map(|&y| solve(y)).unzip();
    }
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = ys.len().div_ceil(workers).max(1);
    let solved: Vec<(f64, Vec<f64>)> = thread::scope(|s| {
        let handles: Vec<_> = ys
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|&y| solve(y)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("root scan worker panicked"))
            .collect()
    });
    solved.into_iter().unzip()
}

fn refine_cell(
    spec: &ModelSpec,
    r_range: (f64, f64),
    opts: &TraceOptions,
    left: (f64, &[f64]),
    right: (f64, &[f64]),
    depth: usize,
    events: &mut Vec<FoldEvent>,
) -> Result<()> {
    let (ya, ra) = left;
    let (yb, rb) = right;
    let (na, nb) = (ra.len(), rb.len());
    if na == nb {
        return Ok(());
    }
    if na.abs_diff(nb) != 2 {
        if depth > 40 || (na + nb) % 2 == 1 {
            return Err(Error::Tracing(format!(
                "root count jumps from {na} to {nb} between Y = {ya} and Y = {yb}; \
                 widen the rate window or refine the scan"
            )));
        }
        let ym = 0.5 * (ya + yb);
        let rm = roots_unchecked(spec, ym, r_range, opts.scan_n);
        refine_cell(spec, r_range, opts, (ya, ra), (ym, &rm), depth + 1, events)?;
        return refine_cell(spec, r_range, opts, (ym, &rm), (yb, rb), depth + 1, events);
    }

    let count = |y: f64| roots_unchecked(spec, y, r_range, opts.scan_n).len();
    let (lo, hi) = bisect_predicate(|y| count(y) == na, ya, yb, opts.fold_tol);
    let y_fold = 0.5 * (lo + hi);
    let (more_y, fewer_y, born) = if nb > na { (hi, lo, true) } else { (lo, hi, false) };
    let more = roots_unchecked(spec, more_y, r_range, opts.scan_n);
    let fewer = roots_unchecked(spec, fewer_y, r_range, opts.scan_n);
    if more.len() != fewer.len() + 2 {
        return Err(Error::Tracing(format!("ambiguous fold near Y = {y_fold}")));
    }
    let pair = merging_pair(&more, &fewer);
    let (r_lo, r_hi) = (more[pair], more[pair + 1]);
    // the slope changes sign at the fold; the pair may sit on one side of
    // it or on an exact zero of the slope, so widen until it is bracketed
    let mut bracket = None;
    let mut w = 0.0;
    for _ in 0..24 {
        let (a, b) = (r_lo - w, r_hi + w);
        let (da, db) = (spec.money_gap_dr(a), spec.money_gap_dr(b));
        if da != 0.0 && db != 0.0 && da.signum() != db.signum() {
            bracket = Some((a, b, da));
            break;
        }
        w = if w == 0.0 { (r_hi - r_lo).max(1e-9) } else { 2.0 * w };
    }
    let r_fold = if let Some((a, b, _)) = bracket {
        bisect(|r| spec.money_gap_dr(r), a, b)
    } else {
        let s = spec.money_gap(y_fold, 0.5 * (r_lo + r_hi)).signum();
        golden_min(|r| s * spec.money_gap(y_fold, r), r_lo, r_hi).0
    };
    // E is affine in Y, so the fold income follows from the fold rate; keep
    // the bisected value if the two disagree beyond the bracket
    let y_closed = -spec.money_gap(0.0, r_fold) / spec.money_gap_dy();
    let y_fold = if (y_closed - y_fold).abs() <= (hi - lo) + opts.fold_tol {
        y_closed
    } else {
        y_fold
    };
    // stable (falling) below the fold rate means the lower arc ends here
    let below = bracket.map_or_else(|| spec.money_gap_dr(r_lo), |(_, _, da)| da);
    let kind = if below < 0.0 {
        FoldKind::LowerKnee
    } else {
        FoldKind::UpperKnee
    };
    events.push(FoldEvent {
        y: y_fold,
        r: r_fold,
        kind,
        pair,
        born,
    });
    Ok(())
}

/// Index `j` such that removing `more[j]` and `more[j + 1]` best matches `fewer`.
fn merging_pair(more: &[f64], fewer: &[f64]) -> usize {
    (0..more.len() - 1)
        .map(|j| {
            let cost: f64 = more
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j && i != j + 1)
                .zip(fewer)
                .map(|((_, a), b)| (a - b).abs())
                .sum();
            (j, cost)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    /// Trace vanishes with positive determinant.
    CenterDegenerate,
    /// Discriminant inside the node/focus tolerance band.
    FocusDegenerate,
    /// Determinant below tolerance, or IS tangent to LM.
    NearDegenerate,
}

impl Classification {
    pub fn is_stable(self) -> bool {
        matches!(self, Classification::StableNode | Classification::StableFocus)
    }
}

pub const DET_TOL: f64 = 1e-10;
pub const DISC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub y: f64,
    pub r: f64,
    pub classification: Classification,
    /// Eigenvalues as `[re, im]` pairs.
    pub eigenvalues: [[f64; 2]; 2],
    pub jacobian: [[f64; 2]; 2],
    /// LM arc the equilibrium lies on, when attributable.
    pub arc: Option<usize>,
}

/// Jacobian of `(α(I − S), β(L − M − M_S))`.
pub fn jacobian(spec: &ModelSpec, _y: f64, r: f64) -> [[f64; 2]; 2] {
    let (a, b) = (spec.params.alpha, spec.params.beta);
    [
        [a * spec.goods_gap_dy(), a * spec.goods_gap_dr()],
        [b * spec.money_gap_dy(), b * spec.money_gap_dr(r)],
    ]
}

pub fn classify(j: &[[f64; 2]; 2]) -> (Classification, [[f64; 2]; 2]) {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    let eig = if disc >= 0.0 {
        let s = disc.sqrt();
        [[0.5 * (tr - s), 0.0], [0.5 * (tr + s), 0.0]]
    } else {
        let s = (-disc).sqrt();
        [[0.5 * tr, -0.5 * s], [0.5 * tr, 0.5 * s]]
    };
    let class = if det.abs() <= DET_TOL {
        Classification::NearDegenerate
    } else if det < 0.0 {
        Classification::Saddle
    } else if tr.abs() <= DISC_TOL {
        Classification::CenterDegenerate
    } else if disc.abs() <= DISC_TOL {
        Classification::FocusDegenerate
    } else {
        match (tr < 0.0, disc > 0.0) {
            (true, true) => Classification::StableNode,
            (true, false) => Classification::StableFocus,
            (false, true) => Classification::UnstableNode,
            (false, false) => Classification::UnstableFocus,
        }
    };
    (class, eig)
}

/// Intersections of IS and LM on the domain, classified by the Jacobian.
pub fn find_equilibria(spec: &ModelSpec, domain: &Domain, opts: &TraceOptions) -> Result<Vec<Equilibrium>> {
    let iso = trace_lm_isocline(spec, domain, opts)?;
    Ok(equilibria_on(spec, &iso, opts))
}

/// Equilibria given an already traced isocline: roots of
/// `Y ↦ (L − M − M_S)(Y, R_IS(Y))`, attributed to the arc they lie on.
pub fn equilibria_on(spec: &ModelSpec, iso: &LmIsocline, opts: &TraceOptions) -> Vec<Equilibrium> {
    let domain = &iso.domain;
    let is = is_curve(spec, domain);
    let scale = spec.money_gap_dy().abs() * (domain.y_max - domain.y_min);
    let roots = scan_roots(
        |y| spec.money_gap(y, is.rate(y)),
        domain.y_min,
        domain.y_max,
        opts.y_steps * 4,
        1e-12 * scale.max(1.0),
        1e-6 * (domain.y_max - domain.y_min),
    );
    roots
        .into_iter()
        .filter_map(|root| {
            let (y, r) = (root.x, is.rate(root.x));
            if r < domain.r_min || r > domain.r_max {
                return None;
            }
            let jac = jacobian(spec, y, r);
            let (mut class, eig) = classify(&jac);
            if root.tangent {
                class = Classification::NearDegenerate;
            }
            Some(Equilibrium {
                y,
                r,
                classification: class,
                eigenvalues: eig,
                jacobian: jac,
                arc: iso.arc_containing(r),
            })
        })
        .collect()
}

/// New spec with `π^e += d_pi` and `M_S += d_ms`.
pub fn shift_lm(spec: &ModelSpec, d_pi: f64, d_ms: f64) -> Result<ModelSpec> {
    let m_stock = spec.params.m_stock + d_ms;
    if !(m_stock > 0.0) {
        return Err(Error::param(
            "d_ms",
            format!("shift leaves money stock non-positive ({m_stock})"),
        ));
    }
    let mut shifted = spec.clone();
    shifted.params.expected_inflation += d_pi;
    shifted.params.m_stock = m_stock;
    Ok(shifted)
}
