//! Behavioural functions of the slow-fast IS-LM economy.
//!
//! Goods market: linear investment and saving schedules,
//! `I(Y,R) = i0 + i_y·Y − i_r·R` and `S(Y,R) = s0 + s_y·Y + s_r·R`.
//!
//! Money market: demand `L(Y,i) = l0 + l_y·Y + f_L(i)` and endogenous supply
//! `M(Y,i) = m0 + m_y·Y + f_M(i)`, both functions of the short nominal rate
//! `i = R − MP + π^e`. The rate profiles `f_L`, `f_M` are built derivative
//! first: outside the liquidity-trap windows `f_L' = −l_slope` and
//! `f_M' = +m_slope`; on `[P − w, P]` the baseline slope fades to zero with a
//! quintic smoothstep, on `(P, Q)` the sign is reversed by a smooth bump, and
//! on `[Q, Q + w]` the baseline slope returns. The derivatives vanish exactly
//! at every window endpoint and both profiles are integrated in closed form,
//! so `L` and `M` are C².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default `ε` below which a run counts as slow-fast.
pub const SLOW_FAST_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Goods-market adjustment speed.
    pub alpha: f64,
    /// Money-market adjustment speed.
    pub beta: f64,
    /// Ratio of slow (income) to fast (rate) time scales.
    pub epsilon: f64,
    /// Exogenous money stock `M_S`.
    pub m_stock: f64,
    pub maturity_premium: f64,
    pub expected_inflation: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        positive("params.alpha", self.alpha)?;
        positive("params.beta", self.beta)?;
        positive("params.m_stock", self.m_stock)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::param(
                "params.epsilon",
                format!("must satisfy 0 < epsilon <= 1, got {}", self.epsilon),
            ));
        }
        finite("params.maturity_premium", self.maturity_premium)?;
        finite("params.expected_inflation", self.expected_inflation)?;
        Ok(())
    }

    pub fn is_slow_fast(&self) -> bool {
        self.epsilon < SLOW_FAST_THRESHOLD
    }
}

/// Linear investment and saving schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsBlock {
    pub i0: f64,
    pub i_y: f64,
    pub i_r: f64,
    pub s0: f64,
    pub s_y: f64,
    pub s_r: f64,
}

impl IsBlock {
    pub fn validate(&self) -> Result<()> {
        finite("is.i0", self.i0)?;
        finite("is.s0", self.s0)?;
        unit_open("is.i_y", self.i_y)?;
        unit_open("is.s_y", self.s_y)?;
        positive("is.i_r", self.i_r)?;
        positive("is.s_r", self.s_r)?;
        if self.i_y >= self.s_y {
            return Err(Error::param(
                "is.i_y",
                format!(
                    "income slope of investment ({}) must be below that of saving ({})",
                    self.i_y, self.s_y
                ),
            ));
        }
        Ok(())
    }

    pub fn investment(&self, y: f64, r: f64) -> f64 {
        self.i0 + self.i_y * y - self.i_r * r
    }

    pub fn saving(&self, y: f64, r: f64) -> f64 {
        self.s0 + self.s_y * y + self.s_r * r
    }
}

/// A liquidity-trap interval `(p, q)` of the short nominal rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapWindow {
    pub p: f64,
    pub q: f64,
    /// Total rise of money demand across the window.
    pub amp_l: f64,
    /// Total fall of endogenous money supply across the window.
    pub amp_m: f64,
    /// Width of the transition zones outside `[p, q]`; defaults to a quarter
    /// of the window width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<f64>,
}

impl TrapWindow {
    pub fn new(p: f64, q: f64, amp_l: f64, amp_m: f64) -> Self {
        TrapWindow {
            p,
            q,
            amp_l,
            amp_m,
            edge: None,
        }
    }

    pub fn edge_width(&self) -> f64 {
        self.edge.unwrap_or(0.25 * (self.q - self.p))
    }

    pub fn contains(&self, i: f64) -> bool {
        i > self.p && i < self.q
    }

    /// Integral of `1 − env` from −∞ to `i`, where `env` is this window's
    /// baseline-slope envelope.
    fn deficit(&self, i: f64) -> f64 {
        let w = self.edge_width();
        let a = self.p - w;
        if i <= a {
            0.0
        } else if i <= self.p {
            w * smoothstep_integral((i - a) / w)
        } else if i <= self.q {
            0.5 * w + (i - self.p)
        } else if i <= self.q + w {
            let u = (i - self.q) / w;
            0.5 * w + (self.q - self.p) + w * (u - smoothstep_integral(u))
        } else {
            (self.q - self.p) + w
        }
    }

    /// `env(i)` inside this window's zone, `None` outside it.
    fn envelope(&self, i: f64) -> Option<f64> {
        let w = self.edge_width();
        if i <= self.p - w || i >= self.q + w {
            None
        } else if i <= self.p {
            Some(smoothstep((self.p - i) / w))
        } else if i <= self.q {
            Some(0.0)
        } else {
            Some(smoothstep((i - self.q) / w))
        }
    }

    /// Normalised reversed-slope bump: integrates to 1 over `(p, q)`.
    fn bump(&self, i: f64) -> f64 {
        if i <= self.p || i >= self.q {
            0.0
        } else {
            let span = self.q - self.p;
            smoothstep_deriv((i - self.p) / span) / span
        }
    }

    fn bump_integral(&self, i: f64) -> f64 {
        smoothstep(((i - self.p) / (self.q - self.p)).clamp(0.0, 1.0))
    }
}

/// Money demand, endogenous supply and their liquidity-trap windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoneyBlock {
    pub l0: f64,
    pub l_y: f64,
    /// Magnitude of `∂L/∂i` away from trap windows (applied negative).
    pub l_slope: f64,
    pub m0: f64,
    pub m_y: f64,
    /// Magnitude of `∂M/∂i` away from trap windows (applied positive).
    pub m_slope: f64,
    #[serde(default)]
    pub windows: Vec<TrapWindow>,
}

/// Construct a three-phase money block after checking every structural
/// invariant.
#[allow(clippy::too_many_arguments)]
pub fn build_three_phase_money(
    l_y: f64,
    m_y: f64,
    l_slope: f64,
    m_slope: f64,
    l0: f64,
    m0: f64,
    windows: Vec<TrapWindow>,
) -> Result<MoneyBlock> {
    let block = MoneyBlock {
        l0,
        l_y,
        l_slope,
        m0,
        m_y,
        m_slope,
        windows,
    };
    block.validate()?;
    Ok(block)
}

impl MoneyBlock {
    pub fn validate(&self) -> Result<()> {
        finite("money.l0", self.l0)?;
        finite("money.m0", self.m0)?;
        positive("money.m_y", self.m_y)?;
        if !(self.m_y < self.l_y) {
            return Err(Error::param(
                "money.m_y",
                format!(
                    "income slope of money supply ({}) must be below that of demand ({})",
                    self.m_y, self.l_y
                ),
            ));
        }
        positive("money.l_slope", self.l_slope)?;
        positive("money.m_slope", self.m_slope)?;
        for (k, w) in self.windows.iter().enumerate() {
            let field = |name: &str| format!("money.windows[{k}].{name}");
            positive(&field("p"), w.p)?;
            if !(w.q > w.p) {
                return Err(Error::param(
                    field("q"),
                    format!("upper bound {} must exceed lower bound {}", w.q, w.p),
                ));
            }
            positive(&field("edge"), w.edge_width())?;
            // a non-positive amplitude leaves the derivative sign unchanged
            // inside the window, so no S-bend forms
            positive(&field("amp_l"), w.amp_l)?;
            positive(&field("amp_m"), w.amp_m)?;
            if k > 0 {
                let prev = &self.windows[k - 1];
                if prev.q + prev.edge_width() >= w.p - w.edge_width() {
                    return Err(Error::param(
                        field("p"),
                        "windows (including transition zones) must be sorted ascending and disjoint",
                    ));
                }
            }
        }
        Ok(())
    }

    fn total_deficit(&self, i: f64) -> f64 {
        self.windows.iter().map(|w| w.deficit(i)).sum()
    }

    /// Baseline-slope envelope; zones are disjoint, so at most one window
    /// applies. Evaluated directly rather than as `1 − (1 − env)` to keep
    /// its tiny values near the window ends.
    fn envelope(&self, i: f64) -> f64 {
        self.windows.iter().find_map(|w| w.envelope(i)).unwrap_or(1.0)
    }

    /// Rate profile of money demand, `f_L(i)`.
    pub fn demand_profile(&self, i: f64) -> f64 {
        let baseline = i - self.total_deficit(i);
        let bumps: f64 = self
            .windows
            .iter()
            .map(|w| w.amp_l * w.bump_integral(i))
            .sum();
        -self.l_slope * baseline + bumps
    }

    /// `f_L'(i)`, exactly zero at every window endpoint.
    pub fn demand_profile_deriv(&self, i: f64) -> f64 {
        let bumps: f64 = self.windows.iter().map(|w| w.amp_l * w.bump(i)).sum();
        -self.l_slope * self.envelope(i) + bumps
    }

    /// Rate profile of endogenous money supply, `f_M(i)`.
    pub fn supply_profile(&self, i: f64) -> f64 {
        let baseline = i - self.total_deficit(i);
        let bumps: f64 = self
            .windows
            .iter()
            .map(|w| w.amp_m * w.bump_integral(i))
            .sum();
        self.m_slope * baseline - bumps
    }

    pub fn supply_profile_deriv(&self, i: f64) -> f64 {
        let bumps: f64 = self.windows.iter().map(|w| w.amp_m * w.bump(i)).sum();
        self.m_slope * self.envelope(i) - bumps
    }

    pub fn demand(&self, y: f64, i: f64) -> f64 {
        self.l0 + self.l_y * y + self.demand_profile(i)
    }

    pub fn supply(&self, y: f64, i: f64) -> f64 {
        self.m0 + self.m_y * y + self.supply_profile(i)
    }

    pub fn in_trap(&self, i: f64) -> bool {
        self.windows.iter().any(|w| w.contains(i))
    }
}

/// Complete parameterisation of one economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub params: ModelParams,
    #[serde(rename = "is")]
    pub is_block: IsBlock,
    pub money: MoneyBlock,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.is_block.validate()?;
        self.money.validate()
    }

    pub fn short_rate(&self, r: f64) -> f64 {
        short_rate(r, &self.params)
    }

    /// `I − S` at `(y, r)`; drives the slow variable.
    pub fn excess_goods(&self, y: f64, r: f64) -> Result<f64> {
        check_income(y)?;
        Ok(self.goods_gap(y, r))
    }

    /// `L − M − M_S` at `(y, r)`; drives the fast variable.
    pub fn excess_money(&self, y: f64, r: f64) -> Result<f64> {
        check_income(y)?;
        Ok(self.money_gap(y, r))
    }

    /// [`excess_goods`](Self::excess_goods) without the domain check, for
    /// inner loops that already guarantee `y ≥ 0`.
    #[inline]
    pub fn goods_gap(&self, y: f64, r: f64) -> f64 {
        self.is_block.investment(y, r) - self.is_block.saving(y, r)
    }

    #[inline]
    pub fn money_gap(&self, y: f64, r: f64) -> f64 {
        let i = self.short_rate(r);
        self.money.demand(y, i) - self.money.supply(y, i) - self.params.m_stock
    }

    /// `∂(L − M − M_S)/∂R`; negative on stable arcs.
    pub fn money_gap_dr(&self, r: f64) -> f64 {
        let i = self.short_rate(r);
        self.money.demand_profile_deriv(i) - self.money.supply_profile_deriv(i)
    }

    pub fn money_gap_dy(&self) -> f64 {
        self.money.l_y - self.money.m_y
    }

    pub fn goods_gap_dy(&self) -> f64 {
        self.is_block.i_y - self.is_block.s_y
    }

    pub fn goods_gap_dr(&self) -> f64 {
        -(self.is_block.i_r + self.is_block.s_r)
    }

    /// Full vector field `(ε·α·(I − S), β·(L − M − M_S))`.
    pub fn vector_field(&self, y: f64, r: f64) -> [f64; 2] {
        [
            self.params.epsilon * self.params.alpha * self.goods_gap(y, r),
            self.params.beta * self.money_gap(y, r),
        ]
    }

    /// Shift the IS curve by adding `g` to the goods-market excess.
    pub fn with_fiscal_shift(&self, g: f64) -> ModelSpec {
        let mut spec = self.clone();
        spec.is_block.i0 += g;
        spec
    }
}

/// Short nominal rate implied by the long real rate: `r − MP + π^e`.
pub fn short_rate(r: f64, params: &ModelParams) -> f64 {
    r - params.maturity_premium + params.expected_inflation
}

fn check_income(y: f64) -> Result<()> {
    if y < 0.0 || y.is_nan() {
        Err(Error::NegativeIncome(y))
    } else {
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be finite, got {v}")))
    }
}

fn unit_open(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must lie in (0, 1), got {v}")))
    }
}

/// Quintic smoothstep `10u³ − 15u⁴ + 6u⁵`.
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

fn smoothstep_deriv(u: f64) -> f64 {
    let v = u * (1.0 - u);
    30.0 * v * v
}

/// `∫₀ᵘ smoothstep = 2.5u⁴ − 3u⁵ + u⁶`.
fn smoothstep_integral(u: f64) -> f64 {
    u * u * u * u * (2.5 + u * (-3.0 + u))
}
