//! Domain types shared by every analysis module.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::special::{reg_lower_gamma_int, reg_upper_gamma_int};

/// Economic primitives of one supply-chain scenario.
///
/// Fields are public and never clamped. Call [`validate_params`] to learn
/// whether a value set is usable and which standing assumptions it breaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Retail price `r` per unit sold by the OEM.
    pub retail: f64,
    /// Capacity cost `c` per unit, paid before demand is known.
    pub capacity_cost: f64,
    /// Production cost `k` per unit actually produced.
    pub production_cost: f64,
    /// Base demand `b` (advance orders).
    pub base_demand: f64,
    /// Rate `λ` of the uncertain tail, so `E[A] = 1/λ` for an exponential tail.
    pub tail_rate: f64,
    /// Per-generation discount factor `δ`; only multi-generation analyses read it.
    pub discount: f64,
    /// Supplier reservation profit `Z`.
    pub reservation: f64,
}

impl MarketParams {
    /// Single-generation parameters with `δ = 0.9` and `Z = 0`.
    pub fn new(retail: f64, capacity_cost: f64, production_cost: f64, base_demand: f64, tail_rate: f64) -> Self {
        Self {
            retail,
            capacity_cost,
            production_cost,
            base_demand,
            tail_rate,
            discount: 0.9,
            reservation: 0.0,
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn with_reservation(mut self, reservation: f64) -> Self {
        self.reservation = reservation;
        self
    }

    /// Gross margin `r - k`.
    pub fn gross_margin(&self) -> f64 {
        self.retail - self.production_cost
    }

    /// `(r - k) / c`, the ratio that drives almost every closed form.
    pub fn margin_ratio(&self) -> f64 {
        self.gross_margin() / self.capacity_cost
    }

    /// `bλ + 1`.
    pub fn base_load(&self) -> f64 {
        self.base_demand * self.tail_rate + 1.0
    }

    pub fn assumptions(&self) -> Assumptions {
        Assumptions {
            high_margin: self.retail - self.production_cost - self.capacity_cost > self.capacity_cost,
            tail_dominance: 1.0 / self.tail_rate >= self.base_demand,
        }
    }

    /// Exponential demand model built from `b` and `λ`.
    pub fn exponential_demand(&self) -> DemandModel {
        DemandModel::exponential(self.base_demand, self.tail_rate)
    }

    /// Erlang-`n` demand model built from `b` and `λ`.
    pub fn erlang_demand(&self, shape: u32) -> DemandModel {
        DemandModel::erlang(self.base_demand, self.tail_rate, shape)
    }
}

/// Which standing assumptions a parameter set satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumptions {
    /// `r - k - c > c`.
    pub high_margin: bool,
    /// `1/λ >= b`.
    pub tail_dominance: bool,
}

impl Assumptions {
    pub fn all_hold(&self) -> bool {
        self.high_margin && self.tail_dominance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssumptionWarning {
    /// `r - k - c <= c`.
    HighMarginViolated,
    /// `1/λ < b`.
    TailDominanceViolated,
}

impl fmt::Display for AssumptionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HighMarginViolated => f.write_str("high-margin assumption violated: r - k - c <= c"),
            Self::TailDominanceViolated => f.write_str("tail-dominance assumption violated: 1/lambda < b"),
        }
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationResult {
    Ok,
    Warnings(Vec<AssumptionWarning>),
    /// Name of the first violated constraint.
    Fatal(&'static str),
}

impl ValidationResult {
    pub fn is_fatal(&self) -> bool {
        matches!(self, Self::Fatal(_))
    }

    pub fn warnings(&self) -> &[AssumptionWarning] {
        match self {
            Self::Warnings(w) => w,
            _ => &[],
        }
    }
}

/// Checks positivity and range constraints, then the standing assumptions.
///
/// A margin `r - k <= c` is fatal: no capacity is worth building.
pub fn validate_params(p: &MarketParams) -> ValidationResult {
    let checks: [(&'static str, bool); 9] = [
        ("retail > 0", p.retail > 0.0),
        ("capacity_cost > 0", p.capacity_cost > 0.0),
        ("production_cost >= 0", p.production_cost >= 0.0),
        ("base_demand >= 0", p.base_demand >= 0.0),
        ("tail_rate > 0", p.tail_rate > 0.0 && p.tail_rate.is_finite()),
        ("0 < discount < 1", p.discount > 0.0 && p.discount < 1.0),
        ("reservation >= 0", p.reservation >= 0.0 && p.reservation.is_finite()),
        (
            "finite parameters",
            p.retail.is_finite()
                && p.capacity_cost.is_finite()
                && p.production_cost.is_finite()
                && p.base_demand.is_finite(),
        ),
        (
            "retail - production_cost > capacity_cost",
            p.retail - p.production_cost > p.capacity_cost,
        ),
    ];
    if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
        return ValidationResult::Fatal(name);
    }
    let a = p.assumptions();
    let mut warnings = Vec::new();
    if !a.high_margin {
        warnings.push(AssumptionWarning::HighMarginViolated);
    }
    if !a.tail_dominance {
        warnings.push(AssumptionWarning::TailDominanceViolated);
    }
    if warnings.is_empty() {
        ValidationResult::Ok
    } else {
        ValidationResult::Warnings(warnings)
    }
}

/// Distribution of the uncertain demand tail `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    Exponential { rate: f64 },
    Erlang { rate: f64, shape: u32 },
}

/// Demand `D = b + A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub base: f64,
    pub tail: Tail,
}

impl DemandModel {
    pub fn exponential(base: f64, rate: f64) -> Self {
        Self {
            base,
            tail: Tail::Exponential { rate },
        }
    }

    pub fn erlang(base: f64, rate: f64, shape: u32) -> Self {
        assert!(shape >= 1, "Erlang shape must be a positive integer");
        Self {
            base,
            tail: Tail::Erlang { rate, shape },
        }
    }

    pub fn rate(&self) -> f64 {
        match self.tail {
            Tail::Exponential { rate } | Tail::Erlang { rate, .. } => rate,
        }
    }

    /// Erlang shape; 1 for the exponential tail.
    pub fn shape(&self) -> u32 {
        match self.tail {
            Tail::Exponential { .. } => 1,
            Tail::Erlang { shape, .. } => shape,
        }
    }

    /// True when every query can use the exponential closed forms.
    pub fn is_exponential(&self) -> bool {
        self.shape() == 1
    }

    /// `E[A]`.
    pub fn tail_mean(&self) -> f64 {
        f64::from(self.shape()) / self.rate()
    }

    pub fn mean(&self) -> f64 {
        self.base + self.tail_mean()
    }

    pub fn tail_variance(&self) -> f64 {
        f64::from(self.shape()) / (self.rate() * self.rate())
    }

    /// `P(D > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        let y = x - self.base;
        if y <= 0.0 {
            return 1.0;
        }
        let z = self.rate() * y;
        match self.shape() {
            1 => (-z).exp(),
            n => reg_upper_gamma_int(n, z),
        }
    }

    /// Density of `D` at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let y = x - self.base;
        if y < 0.0 {
            return 0.0;
        }
        let rate = self.rate();
        let z = rate * y;
        match self.shape() {
            1 => rate * (-z).exp(),
            n => {
                // λ z^{n-1} e^{-z} / (n-1)!, evaluated in log space
                let log_fact: f64 = (1..n).map(|j| f64::from(j).ln()).sum();
                if z == 0.0 {
                    return 0.0;
                }
                rate * (f64::from(n - 1) * z.ln() - z - log_fact).exp()
            }
        }
    }

    /// Renewal probability `R(x) = P(D <= x)`.
    pub fn renewal_prob(&self, x: f64) -> f64 {
        let y = x - self.base;
        if y <= 0.0 {
            return 0.0;
        }
        let z = self.rate() * y;
        match self.shape() {
            1 => -(-z).exp_m1(),
            n => reg_lower_gamma_int(n, z),
        }
    }

    /// Expected sales `E[min(D, x)]`.
    pub fn expected_sales(&self, x: f64) -> f64 {
        if x <= self.base {
            return x.max(0.0);
        }
        let y = x - self.base;
        let rate = self.rate();
        let z = rate * y;
        match self.shape() {
            1 => self.base - (-z).exp_m1() / rate,
            n => {
                // E[min(A, y)] = (n/λ) P(n+1, λy) + y Q(n, λy)
                self.base + f64::from(n) / rate * reg_lower_gamma_int(n + 1, z) + y * reg_upper_gamma_int(n, z)
            }
        }
    }

    /// Expected shortfall `E[(D - x)^+]`.
    pub fn expected_shortfall(&self, x: f64) -> f64 {
        if x <= self.base {
            return self.mean() - x;
        }
        let y = x - self.base;
        let rate = self.rate();
        let z = rate * y;
        match self.shape() {
            1 => (-z).exp() / rate,
            n => (f64::from(n) / rate * reg_upper_gamma_int(n + 1, z) - y * reg_upper_gamma_int(n, z)).max(0.0),
        }
    }

    /// Inverse survival: the `x` with `P(D > x) = q`, for `q` in `(0, 1]`.
    pub fn survival_quantile(&self, q: f64) -> f64 {
        if q >= 1.0 {
            return self.base;
        }
        let rate = self.rate();
        match self.shape() {
            1 => self.base - q.ln() / rate,
            _ => {
                // survival is strictly decreasing past the base; bisect on it
                let mut lo = self.base;
                let mut hi = self.base + self.tail_mean();
                while self.survival(hi) > q {
                    hi = self.base + 2.0 * (hi - self.base);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.survival(mid) > q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Draws `b + A`. The Erlang tail is an exact sum of `n` exponentials.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let rate = self.rate();
        let mut tail = 0.0;
        for _ in 0..self.shape() {
            tail += exp_draw(rng, rate);
        }
        self.base + tail
    }
}

/// Inverse-CDF exponential draw `-ln(U)/λ` with `U` in `(0, 1]`.
fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

/// Whether a renewal contract's renewal probability is given or driven by capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RenewalMode {
    ExogenousProb(f64),
    Endogenous,
}

/// A concrete contract offer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContractTerms {
    Wholesale {
        w: f64,
    },
    /// Wholesale price plus a lump-sum penalty `ρ` paid when `D > x`.
    LumpSumPenalty {
        w: f64,
        rho: f64,
    },
    /// Wholesale price plus a penalty `ρ₁` per unit short.
    UnitPenalty {
        w: f64,
        rho1: f64,
    },
    Renewal {
        w: f64,
        mode: RenewalMode,
    },
}

impl ContractTerms {
    pub fn wholesale_price(&self) -> f64 {
        match *self {
            Self::Wholesale { w }
            | Self::LumpSumPenalty { w, .. }
            | Self::UnitPenalty { w, .. }
            | Self::Renewal { w, .. } => w,
        }
    }

    /// Name of the first violated constraint, if any.
    pub fn violation(&self) -> Option<&'static str> {
        let valid = |v: f64| v >= 0.0 && v.is_finite();
        match *self {
            Self::Wholesale { w } if !valid(w) => Some("w >= 0"),
            Self::LumpSumPenalty { w, rho } => {
                if !valid(w) {
                    Some("w >= 0")
                } else if !valid(rho) {
                    Some("rho >= 0")
                } else {
                    None
                }
            }
            Self::UnitPenalty { w, rho1 } => {
                if !valid(w) {
                    Some("w >= 0")
                } else if !valid(rho1) {
                    Some("rho1 >= 0")
                } else {
                    None
                }
            }
            Self::Renewal { w, mode } => {
                if !valid(w) {
                    Some("w >= 0")
                } else if let RenewalMode::ExogenousProb(r) = mode {
                    (!(0.0..=1.0).contains(&r)).then_some("0 <= renewal_prob <= 1")
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Capacities, profits and efficiency of one evaluated contract.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub capacity: f64,
    pub supplier_profit: f64,
    pub oem_profit: f64,
    pub chain_profit: f64,
    pub first_best_profit: f64,
    /// `(π_s + π_m) / Π*`.
    pub efficiency: f64,
    pub supplier_npv: Option<f64>,
    pub oem_npv: Option<f64>,
    pub chain_npv: Option<f64>,
    /// OEM NPV over the first-best chain NPV.
    pub oem_fraction: Option<f64>,
    /// Expected number of generations the relationship lasts.
    pub expected_duration: Option<f64>,
}

impl OutcomeReport {
    pub fn single_generation(capacity: f64, supplier_profit: f64, oem_profit: f64, first_best_profit: f64) -> Self {
        let chain_profit = supplier_profit + oem_profit;
        Self {
            capacity,
            supplier_profit,
            oem_profit,
            chain_profit,
            first_best_profit,
            efficiency: chain_profit / first_best_profit,
            ..Self::default()
        }
    }
}
