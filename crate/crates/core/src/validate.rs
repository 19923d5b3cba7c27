//! Numerical check of the sign conditions on the behavioural functions.
//!
//! Derivatives are central finite differences with a step of `1e-6` times
//! the axis span. A derivative with magnitude at most `1e-9` is counted as
//! degenerate rather than signed.

use serde::{Deserialize, Serialize};

use crate::geometry::{is_curve, Domain};
use crate::model::ModelSpec;
use crate::roots::scan_roots;

pub const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub y: f64,
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Grid points where the condition fails.
    pub violations: usize,
    /// Grid points where the derivative is too small to carry a sign.
    pub degenerate: usize,
    /// Point with the smallest margin (the worst violation when failing).
    pub worst: Option<Location>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub grid_n: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const INVESTMENT_INCOME: &str = "investment rises with income, by less than one";
pub const INVESTMENT_RATE: &str = "investment falls with the rate";
pub const SAVING_INCOME: &str = "saving rises with income, by less than one";
pub const SAVING_RATE: &str = "saving rises with the rate";
pub const IS_DECREASING: &str = "goods excess falls with income (IS decreasing)";
pub const MONEY_INCOME: &str = "money demand rises with income faster than endogenous supply";
pub const DEMAND_RATE: &str = "money demand falls with the short rate outside trap windows";
pub const SUPPLY_RATE: &str = "endogenous supply rises with the short rate outside trap windows";
pub const DEMAND_RATE_TRAP: &str = "money demand rises with the short rate inside trap windows";
pub const SUPPLY_RATE_TRAP: &str = "endogenous supply falls with the short rate inside trap windows";
pub const IS_ABOVE_LM: &str = "IS starts above the lowest LM root at zero income";
pub const GRID: &str = "grid has at least 100 points per axis";

struct Acc {
    name: &'static str,
    violations: usize,
    degenerate: usize,
    worst: Option<Location>,
    seen: bool,
}

impl Acc {
    fn new(name: &'static str) -> Self {
        Acc {
            name,
            violations: 0,
            degenerate: 0,
            worst: None,
            seen: false,
        }
    }

    /// Record a margin that must be positive. `signed` is the derivative the
    /// margin refers to, used for the degeneracy test.
    fn add(&mut self, y: f64, r: f64, margin: f64, signed: f64) {
        self.seen = true;
        if signed.abs() <= SIGN_TOL {
            self.degenerate += 1;
            return;
        }
        if margin <= 0.0 {
            self.violations += 1;
        }
        if self.worst.is_none_or(|w| margin < w.value) {
            self.worst = Some(Location { y, r, value: margin });
        }
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.to_string(),
            passed: self.violations == 0,
            violations: self.violations,
            degenerate: self.degenerate,
            worst: self.worst,
        }
    }
}

/// Evaluate every sign condition on a `grid_n × grid_n` grid over `domain`.
/// Never fails; problems are reported as failed checks.
pub fn validate_properties(spec: &ModelSpec, domain: &Domain, grid_n: usize) -> ValidationReport {
    let mut checks = Vec::new();
    if grid_n < 100 {
        checks.push(Check {
            name: GRID.to_string(),
            passed: false,
            violations: 1,
            degenerate: 0,
            worst: None,
        });
        return ValidationReport {
            passed: false,
            grid_n,
            checks,
        };
    }
    let hy = 1e-6 * (domain.y_max - domain.y_min);
    let hr = 1e-6 * (domain.r_max - domain.r_min);
    let b = &spec.is_block;
    let m = &spec.money;

    let mut inv_y = Acc::new(INVESTMENT_INCOME);
    let mut inv_r = Acc::new(INVESTMENT_RATE);
    let mut sav_y = Acc::new(SAVING_INCOME);
    let mut sav_r = Acc::new(SAVING_RATE);
    let mut is_dec = Acc::new(IS_DECREASING);
    let mut money_y = Acc::new(MONEY_INCOME);
    let mut dem_r = Acc::new(DEMAND_RATE);
    let mut sup_r = Acc::new(SUPPLY_RATE);
    let mut dem_trap = Acc::new(DEMAND_RATE_TRAP);
    let mut sup_trap = Acc::new(SUPPLY_RATE_TRAP);

    let axis = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (grid_n - 1) as f64;
    for a in 0..grid_n {
        let y = axis(domain.y_min, domain.y_max, a);
        for c in 0..grid_n {
            let r = axis(domain.r_min, domain.r_max, c);
            let dy = |f: &dyn Fn(f64, f64) -> f64| (f(y + hy, r) - f(y - hy, r)) / (2.0 * hy);
            let dr = |f: &dyn Fn(f64, f64) -> f64| (f(y, r + hr) - f(y, r - hr)) / (2.0 * hr);

            let i_y = dy(&|y, r| b.investment(y, r));
            inv_y.add(y, r, i_y.min(1.0 - i_y), i_y);
            let i_r = dr(&|y, r| b.investment(y, r));
            inv_r.add(y, r, -i_r, i_r);
            let s_y = dy(&|y, r| b.saving(y, r));
            sav_y.add(y, r, s_y.min(1.0 - s_y), s_y);
            let s_r = dr(&|y, r| b.saving(y, r));
            sav_r.add(y, r, s_r, s_r);
            let g_y = dy(&|y, r| spec.goods_gap(y, r));
            is_dec.add(y, r, -g_y, g_y);

            let i = spec.short_rate(r);
            let l_y = dy(&|y, _| m.demand(y, i));
            let m_y = dy(&|y, _| m.supply(y, i));
            money_y.add(y, r, m_y.min(l_y - m_y), m_y);

            let l_i = dr(&|y, r| m.demand(y, spec.short_rate(r)));
            let m_i = dr(&|y, r| m.supply(y, spec.short_rate(r)));
            if m.in_trap(i) {
                dem_trap.add(y, r, l_i, l_i);
                sup_trap.add(y, r, -m_i, m_i);
            } else {
                dem_r.add(y, r, -l_i, l_i);
                sup_r.add(y, r, m_i, m_i);
            }
        }
    }

    for acc in [inv_y, inv_r, sav_y, sav_r, is_dec, money_y, dem_r, sup_r] {
        checks.push(acc.finish());
    }
    for acc in [dem_trap, sup_trap] {
        // only meaningful when some window is visible on the grid
        if acc.seen || !spec.money.windows.is_empty() {
            checks.push(acc.finish());
        }
    }
    checks.push(boundary_check(spec, domain));

    ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        grid_n,
        checks,
    }
}

fn boundary_check(spec: &ModelSpec, domain: &Domain) -> Check {
    let y0 = domain.y_min;
    let r_is = is_curve(spec, domain).rate(y0);
    let roots = scan_roots(|r| spec.money_gap(y0, r), domain.r_min, domain.r_max, 4000, 0.0, 0.0);
    let (passed, worst) = match roots.first() {
        Some(root) => {
            let margin = r_is - root.x;
            (
                margin > 0.0,
                Some(Location {
                    y: y0,
                    r: root.x,
                    value: margin,
                }),
            )
        }
        None => (false, None),
    };
    Check {
        name: IS_ABOVE_LM.to_string(),
        passed,
        violations: usize::from(!passed),
        degenerate: 0,
        worst,
    }
}
