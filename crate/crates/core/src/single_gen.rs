//! One-generation contracting: the centralized benchmark, the wholesale
//! Stackelberg game, penalty-augmented coordinating contracts and the
//! reservation-profit variants.
//!
//! Exponential tails use closed forms throughout. Erlang tails fall back to
//! golden-section best responses and bisection, with capacities searched on
//! `[b, b + 50n/λ]` where the tail survival is below `e^{-30}`.

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, Result};
use crate::model::{validate_params, DemandModel, MarketParams, OutcomeReport, ValidationResult};
use crate::numerics::{bisect_root, golden_section_max, SolveConfig};
use crate::special::lambert_wm1_of_neg_exp;

/// Capacity and profit of the centrally controlled chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstBest {
    pub capacity: f64,
    pub profit: f64,
}

pub(crate) fn check_params(p: &MarketParams) -> Result<()> {
    match validate_params(p) {
        ValidationResult::Fatal("retail - production_cost > capacity_cost") => Err(ContractError::NoViableMargin {
            margin: p.gross_margin(),
            capacity_cost: p.capacity_cost,
        }),
        ValidationResult::Fatal(name) => Err(ContractError::InvalidParams(name)),
        _ => Ok(()),
    }
}

/// Upper end of the capacity search bracket.
pub(crate) fn capacity_ceiling(d: &DemandModel) -> f64 {
    d.base + 50.0 * d.tail_mean()
}

pub(crate) fn capacity_config(d: &DemandModel, lo: f64) -> SolveConfig {
    SolveConfig::new(lo, capacity_ceiling(d))
        .abs_tol(1e-8 * d.mean())
        .rel_tol(1e-14)
        .max_iter(400)
}

pub(crate) fn price_config(p: &MarketParams, lo: f64, hi: f64) -> SolveConfig {
    SolveConfig::new(lo, hi)
        .abs_tol(1e-8 * p.gross_margin())
        .rel_tol(1e-14)
        .max_iter(400)
}

/// Expected chain profit `-cx + (r-k)·E[min(D, x)]`.
pub fn chain_profit(p: &MarketParams, d: &DemandModel, x: f64) -> f64 {
    -p.capacity_cost * x + p.gross_margin() * d.expected_sales(x)
}

/// Capacity `x*` and profit `Π*` of the centralized chain.
pub fn centralized_optimum(p: &MarketParams, d: &DemandModel) -> Result<FirstBest> {
    check_params(p)?;
    let (c, lam) = (p.capacity_cost, d.rate());
    if d.is_exponential() {
        let log_ratio = p.margin_ratio().ln();
        let capacity = d.base + log_ratio / lam;
        let profit = (p.gross_margin() - c) * (d.base + 1.0 / lam) - c / lam * log_ratio;
        return Ok(FirstBest { capacity, profit });
    }
    let m = golden_section_max(|x| chain_profit(p, d, x), &capacity_config(d, d.base))?;
    Ok(FirstBest {
        capacity: m.x,
        profit: m.value,
    })
}

/// Supplier expected profit under a plain wholesale price.
pub fn supplier_profit(p: &MarketParams, d: &DemandModel, w: f64, x: f64) -> f64 {
    -p.capacity_cost * x + (w - p.production_cost) * d.expected_sales(x)
}

/// OEM expected profit under a plain wholesale price.
pub fn oem_profit(p: &MarketParams, d: &DemandModel, w: f64, x: f64) -> f64 {
    (p.retail - w) * d.expected_sales(x)
}

/// Supplier profit with a lump-sum penalty `ρ` due whenever `D > x`.
pub fn supplier_profit_lump_sum(p: &MarketParams, d: &DemandModel, w: f64, rho: f64, x: f64) -> f64 {
    supplier_profit(p, d, w, x) - rho * d.survival(x)
}

pub fn oem_profit_lump_sum(p: &MarketParams, d: &DemandModel, w: f64, rho: f64, x: f64) -> f64 {
    oem_profit(p, d, w, x) + rho * d.survival(x)
}

/// Supplier profit with a penalty `ρ₁` per unit of unmet demand.
pub fn supplier_profit_unit_penalty(p: &MarketParams, d: &DemandModel, w: f64, rho1: f64, x: f64) -> f64 {
    supplier_profit(p, d, w, x) - rho1 * d.expected_shortfall(x)
}

pub fn oem_profit_unit_penalty(p: &MarketParams, d: &DemandModel, w: f64, rho1: f64, x: f64) -> f64 {
    oem_profit(p, d, w, x) + rho1 * d.expected_shortfall(x)
}

/// Supplier's capacity choice under wholesale price `w`; zero below `c + k`.
pub fn supplier_best_response_wholesale(p: &MarketParams, d: &DemandModel, w: f64) -> f64 {
    let floor = p.capacity_cost + p.production_cost;
    if w < floor {
        return 0.0;
    }
    if d.is_exponential() {
        return d.base + ((w - p.production_cost) / p.capacity_cost).ln() / d.rate();
    }
    golden_section_max(|x| supplier_profit(p, d, w, x), &capacity_config(d, d.base))
        .map(|m| m.x)
        .unwrap_or(d.base)
}

/// Supplier's optimal profit `π̃_s(w)` at its own best response.
pub fn supplier_optimal_profit(p: &MarketParams, d: &DemandModel, w: f64) -> f64 {
    if d.is_exponential() && w >= p.capacity_cost + p.production_cost {
        let lam = d.rate();
        let margin = w - p.production_cost;
        return (margin - p.capacity_cost) * (d.base + 1.0 / lam)
            - p.capacity_cost / lam * (margin / p.capacity_cost).ln();
    }
    supplier_profit(p, d, w, supplier_best_response_wholesale(p, d, w))
}

/// Capacity chosen under a lump-sum penalty contract `(w, ρ)`.
pub fn supplier_best_response_lump_sum(p: &MarketParams, d: &DemandModel, w: f64, rho: f64) -> f64 {
    let lam = d.rate();
    if d.is_exponential() {
        let ratio = (w - p.production_cost + rho * lam) / p.capacity_cost;
        if ratio >= 1.0 {
            return d.base + ratio.ln() / lam;
        }
    }
    golden_section_max(|x| supplier_profit_lump_sum(p, d, w, rho, x), &capacity_config(d, 0.0))
        .map(|m| m.x)
        .unwrap_or(0.0)
}

/// Capacity chosen under a per-unit penalty contract `(w, ρ₁)`.
///
/// The first-order condition is `(w - k + ρ₁)·P(D > x) = c`.
pub fn supplier_best_response_unit_penalty(p: &MarketParams, d: &DemandModel, w: f64, rho1: f64) -> f64 {
    let effective = w - p.production_cost + rho1;
    if effective < p.capacity_cost {
        return 0.0;
    }
    if d.is_exponential() {
        return d.base + (effective / p.capacity_cost).ln() / d.rate();
    }
    d.survival_quantile(p.capacity_cost / effective)
}

/// How the reported wholesale optimum was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolutionMethod {
    ClosedForm,
    /// Golden-section search, with the reason the closed form did not apply.
    Numeric(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholesaleSolution {
    pub w: f64,
    pub report: OutcomeReport,
    pub method: SolutionMethod,
}

/// The OEM's profit-maximizing wholesale price and the resulting outcome.
pub fn oem_optimal_wholesale(p: &MarketParams, d: &DemandModel) -> Result<WholesaleSolution> {
    let first_best = centralized_optimum(p, d)?;
    let (c, k) = (p.capacity_cost, p.production_cost);
    let margin = p.gross_margin();
    let (w, method) = if d.is_exponential() && margin > p.base_load() * c {
        (k + (margin * c / p.base_load()).sqrt(), SolutionMethod::ClosedForm)
    } else {
        let reason = if d.is_exponential() {
            "r - k <= (b*lambda + 1) c".to_string()
        } else {
            format!("Erlang-{} tail", d.shape())
        };
        let m = golden_section_max(
            |w| oem_profit(p, d, w, supplier_best_response_wholesale(p, d, w)),
            &price_config(p, c + k, p.retail),
        )?;
        (m.x, SolutionMethod::Numeric(reason))
    };
    let x = supplier_best_response_wholesale(p, d, w);
    let report = OutcomeReport::single_generation(
        x,
        supplier_profit(p, d, w, x),
        oem_profit(p, d, w, x),
        first_best.profit,
    );
    Ok(WholesaleSolution { w, report, method })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyKind {
    LumpSum,
    PerUnit,
}

/// Whether a penalty is realistically collectible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enforceability {
    /// Supplier profit when demand exactly equals capacity.
    pub best_case_profit: f64,
    /// `P(D > x)`.
    pub shortfall_probability: f64,
    pub penalty_to_best_case_ratio: f64,
    pub penalty_to_wholesale_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyContractSolution {
    pub kind: PenaltyKind,
    pub w_hat: f64,
    /// Lump-sum `ρ̂` or per-unit `ρ̂₁`, depending on `kind`.
    pub penalty: f64,
    pub capacity: f64,
    pub supplier_profit: f64,
    pub oem_profit: f64,
    pub first_best_profit: f64,
    pub enforceability: Enforceability,
}

impl PenaltyContractSolution {
    pub fn report(&self) -> OutcomeReport {
        OutcomeReport::single_generation(
            self.capacity,
            self.supplier_profit,
            self.oem_profit,
            self.first_best_profit,
        )
    }
}

fn enforceability(p: &MarketParams, d: &DemandModel, w: f64, penalty: f64, x: f64) -> Enforceability {
    let best_case_profit = (w - p.production_cost - p.capacity_cost) * x;
    Enforceability {
        best_case_profit,
        shortfall_probability: d.survival(x),
        penalty_to_best_case_ratio: penalty / best_case_profit,
        penalty_to_wholesale_ratio: penalty / w,
    }
}

fn reservation_guard(p: &MarketParams, first_best: &FirstBest) -> Result<()> {
    if p.reservation > first_best.profit {
        return Err(ContractError::ReservationTooHigh {
            reservation: p.reservation,
            first_best: first_best.profit,
        });
    }
    Ok(())
}

/// Coordinating `(ŵ, ρ̂)` with a lump-sum penalty that leaves the supplier
/// exactly its reservation profit. Exponential tail only.
pub fn coordinated_lump_sum(p: &MarketParams, d: &DemandModel) -> Result<PenaltyContractSolution> {
    if !d.is_exponential() {
        return Err(ContractError::RequiresExponentialTail);
    }
    let first_best = centralized_optimum(p, d)?;
    reservation_guard(p, &first_best)?;
    let (w_hat, rho1) = exponential_penalty_terms(p, d);
    let rho = rho1 / d.rate();
    let x = first_best.capacity;
    Ok(PenaltyContractSolution {
        kind: PenaltyKind::LumpSum,
        w_hat,
        penalty: rho,
        capacity: x,
        supplier_profit: supplier_profit_lump_sum(p, d, w_hat, rho, x),
        oem_profit: oem_profit_lump_sum(p, d, w_hat, rho, x),
        first_best_profit: first_best.profit,
        enforceability: enforceability(p, d, w_hat, rho, x),
    })
}

/// `(ŵ, ρ̂₁)` for the exponential tail; `ρ̂ = ρ̂₁/λ`.
fn exponential_penalty_terms(p: &MarketParams, d: &DemandModel) -> (f64, f64) {
    let (c, k, lam) = (p.capacity_cost, p.production_cost, d.rate());
    let load = d.base * lam + 1.0;
    let log_term = c / load * p.margin_ratio().ln();
    let reservation_term = p.reservation * lam / load;
    // the reservation raises ŵ and lowers ρ̂₁, keeping ŵ + ρ̂₁ = r
    let w_hat = k + c + log_term + reservation_term;
    let rho1 = p.gross_margin() - c - log_term - reservation_term;
    (w_hat, rho1)
}

/// Coordinating `(ŵ, ρ̂₁)` with a per-unit shortfall penalty. Exponential tail only.
pub fn coordinated_unit_penalty(p: &MarketParams, d: &DemandModel) -> Result<PenaltyContractSolution> {
    if !d.is_exponential() {
        return Err(ContractError::RequiresExponentialTail);
    }
    let first_best = centralized_optimum(p, d)?;
    reservation_guard(p, &first_best)?;
    let (w_hat, rho1) = exponential_penalty_terms(p, d);
    let x = first_best.capacity;
    Ok(PenaltyContractSolution {
        kind: PenaltyKind::PerUnit,
        w_hat,
        penalty: rho1,
        capacity: x,
        supplier_profit: supplier_profit_unit_penalty(p, d, w_hat, rho1, x),
        oem_profit: oem_profit_unit_penalty(p, d, w_hat, rho1, x),
        first_best_profit: first_best.profit,
        enforceability: enforceability(p, d, w_hat, rho1, x),
    })
}

/// Coordinating lump-sum contract for any tail, found numerically.
///
/// The supplier's first-order condition at `x*`,
/// `(w - k)·P(D > x*) + ρ·f(x*) = c`, fixes `ρ` as a function of `w`; bisection
/// on `w ∈ [k + c, r]` then drives the supplier's profit to `Z`.
pub fn coordinated_penalty_numeric(p: &MarketParams, d: &DemandModel) -> Result<PenaltyContractSolution> {
    let first_best = centralized_optimum(p, d)?;
    reservation_guard(p, &first_best)?;
    let x = first_best.capacity;
    let (c, k) = (p.capacity_cost, p.production_cost);
    let surv = d.survival(x);
    let dens = d.density(x);
    let rho_of = |w: f64| (c - (w - k) * surv) / dens;
    let residual = |w: f64| supplier_profit_lump_sum(p, d, w, rho_of(w), x) - p.reservation;
    let (lo, hi) = (k + c, p.retail);
    let cfg = SolveConfig::new(lo, hi)
        .abs_tol(1e-15 * hi)
        .rel_tol(1e-16)
        .max_iter(2000);
    let w_hat = bisect_root(residual, &cfg).map_err(|_| ContractError::BracketFailure { lo, hi })?;
    let rho = rho_of(w_hat);
    Ok(PenaltyContractSolution {
        kind: PenaltyKind::LumpSum,
        w_hat,
        penalty: rho,
        capacity: x,
        supplier_profit: supplier_profit_lump_sum(p, d, w_hat, rho, x),
        oem_profit: oem_profit_lump_sum(p, d, w_hat, rho, x),
        first_best_profit: first_best.profit,
        enforceability: enforceability(p, d, w_hat, rho, x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservationPrice {
    pub w_min: f64,
    /// The supplier's reservation profit cannot be met below the retail price.
    pub exceeds_retail: bool,
}

/// Lowest wholesale price at which the supplier's best response earns `Z`.
/// Exponential tail only.
pub fn min_wholesale_for_reservation(p: &MarketParams) -> Result<ReservationPrice> {
    check_params(p)?;
    let (c, k, lam) = (p.capacity_cost, p.production_cost, p.tail_rate);
    let load = p.base_load();
    // W₋₁(-(bλ+1) e^{-(bλ+1+Zλ/c)}) through its log argument
    let log_arg = load.ln() - load - p.reservation * lam / c;
    let w = lambert_wm1_of_neg_exp(log_arg)?;
    let w_min = k - c / load * w;
    Ok(ReservationPrice {
        w_min,
        exceeds_retail: w_min > p.retail,
    })
}
