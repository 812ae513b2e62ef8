//! Multi-generation contracts: geometric renewal NPVs, the endogenous-renewal
//! best response, the coordinating wholesale price and the OEM's share of the
//! chain's NPV.
//!
//! With renewal probability `R(x) = P(D <= x)`, the supplier's NPV is
//! `π_s(x, w) / (1 - δR(x))`. The denominator is evaluated as
//! `1 - δ + δ·P(D > x)` so large capacities never lose precision to `1 - R`.
//! When a relationship ends the OEM continues with an identical fresh
//! supplier, so its NPV is always `π_m / (1 - δ)`.

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, Result};
use crate::model::{DemandModel, MarketParams, OutcomeReport};
use crate::numerics::{bisect_root, golden_section_max, grid_agrees_with_max, SolveConfig};
use crate::single_gen::{
    capacity_config, centralized_optimum, check_params, oem_profit, price_config, supplier_best_response_wholesale,
    supplier_profit,
};
use crate::special::lambert_w0_of_exp;

/// One wholesale price evaluated over an infinite horizon of generations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalAnalysis {
    pub wholesale: f64,
    pub capacity: f64,
    pub renewal_prob: f64,
    /// `1 / (1 - R)`.
    pub expected_generations: f64,
    pub supplier_profit: f64,
    pub oem_profit: f64,
    pub supplier_npv: f64,
    pub oem_npv: f64,
    pub first_best_profit: f64,
    /// `Π* / (1 - δ)`.
    pub chain_npv_first_best: f64,
    pub oem_fraction: f64,
}

impl RenewalAnalysis {
    pub fn report(&self) -> OutcomeReport {
        let mut report = OutcomeReport::single_generation(
            self.capacity,
            self.supplier_profit,
            self.oem_profit,
            self.first_best_profit,
        );
        report.supplier_npv = Some(self.supplier_npv);
        report.oem_npv = Some(self.oem_npv);
        report.chain_npv = Some(self.supplier_npv + self.oem_npv);
        report.oem_fraction = Some(self.oem_fraction);
        report.expected_duration = Some(self.expected_generations);
        report
    }
}

fn renewal_denominator(d: &DemandModel, discount: f64, x: f64) -> f64 {
    1.0 - discount + discount * d.survival(x)
}

/// Supplier NPV `π_s(x, w) / (1 - δR(x))` when renewal depends on capacity.
pub fn supplier_npv_endogenous(p: &MarketParams, d: &DemandModel, w: f64, x: f64) -> f64 {
    supplier_profit(p, d, w, x) / renewal_denominator(d, p.discount, x)
}

fn analysis(
    p: &MarketParams,
    d: &DemandModel,
    w: f64,
    x: f64,
    renewal_prob: f64,
    supplier_npv: f64,
    first_best: f64,
) -> RenewalAnalysis {
    let oem = oem_profit(p, d, w, x);
    let oem_npv = oem / (1.0 - p.discount);
    let chain_npv_first_best = first_best / (1.0 - p.discount);
    RenewalAnalysis {
        wholesale: w,
        capacity: x,
        renewal_prob,
        expected_generations: 1.0 / (1.0 - renewal_prob),
        supplier_profit: supplier_profit(p, d, w, x),
        oem_profit: oem,
        supplier_npv,
        oem_npv,
        first_best_profit: first_best,
        chain_npv_first_best,
        oem_fraction: oem_npv / chain_npv_first_best,
    }
}

fn endogenous_analysis(p: &MarketParams, d: &DemandModel, w: f64, x: f64, first_best: f64) -> RenewalAnalysis {
    let mut a = analysis(
        p,
        d,
        w,
        x,
        d.renewal_prob(x),
        supplier_npv_endogenous(p, d, w, x),
        first_best,
    );
    a.expected_generations = 1.0 / d.survival(x);
    a
}

/// Wholesale contract renewed with a fixed probability `R`.
///
/// `R` does not enter the supplier's capacity choice, which stays at the
/// single-generation best response.
pub fn npv_exogenous(p: &MarketParams, d: &DemandModel, w: f64, renewal_prob: f64) -> Result<RenewalAnalysis> {
    if !(0.0..1.0).contains(&renewal_prob) {
        return Err(ContractError::InvalidParams("0 <= renewal_prob < 1"));
    }
    let first_best = centralized_optimum(p, d)?;
    let x = supplier_best_response_wholesale(p, d, w);
    let npv = supplier_profit(p, d, w, x) / (1.0 - p.discount * renewal_prob);
    Ok(analysis(p, d, w, x, renewal_prob, npv, first_best.profit))
}

/// Supplier capacity when the contract is renewed only if demand is met.
///
/// The exponential tail has the Lambert-W closed form, evaluated through
/// `W₀(e^y)` in log space; other tails use golden-section search.
pub fn supplier_best_response_endogenous(p: &MarketParams, d: &DemandModel, w: f64) -> Result<f64> {
    check_params(p)?;
    let (c, k, delta) = (p.capacity_cost, p.production_cost, p.discount);
    if w < c + k {
        return Err(ContractError::ParticipationViolated { w, floor: c + k });
    }
    let lam = d.rate();
    if d.is_exponential() {
        let odds = (1.0 - delta) / delta;
        let y = odds.ln() + (w - k) / (delta * c) - 1.0 + d.base * lam * (w - k - c) / c;
        let lw = lambert_w0_of_exp(y);
        return Ok(d.base + (lw / odds).ln() / lam);
    }
    let m = golden_section_max(|x| supplier_npv_endogenous(p, d, w, x), &capacity_config(d, d.base))?;
    Ok(m.x)
}

/// Wholesale contract renewed only while demand is met, with the supplier
/// best-responding to the renewal rule.
pub fn npv_endogenous(p: &MarketParams, d: &DemandModel, w: f64) -> Result<RenewalAnalysis> {
    let first_best = centralized_optimum(p, d)?;
    let x = supplier_best_response_endogenous(p, d, w)?;
    Ok(endogenous_analysis(p, d, w, x, first_best.profit))
}

/// Wholesale price `w^δ` that makes the endogenous-renewal best response
/// equal the first-best capacity.
pub fn coordinating_wholesale(p: &MarketParams, d: &DemandModel) -> Result<f64> {
    let first_best = centralized_optimum(p, d)?;
    let (c, k, delta) = (p.capacity_cost, p.production_cost, p.discount);
    if d.is_exponential() {
        let bl = d.base * d.rate();
        let numer = delta * c * (1.0 + bl + p.margin_ratio().ln()) + (1.0 - delta) * p.gross_margin();
        return Ok(k + numer / (1.0 + delta * bl));
    }
    coordinating_wholesale_by_bisection(p, d, first_best.capacity)
}

/// Bisection on `x̃(w, δ) - x*` over `[c + k, r]`.
pub fn coordinating_wholesale_by_bisection(p: &MarketParams, d: &DemandModel, target: f64) -> Result<f64> {
    let (lo, hi) = (p.capacity_cost + p.production_cost, p.retail);
    let cfg = SolveConfig::new(lo, hi)
        .abs_tol(1e-13 * hi)
        .rel_tol(1e-15)
        .max_iter(500);
    let residual = |w: f64| supplier_best_response_endogenous(p, d, w).map_or(f64::NAN, |x| x - target);
    bisect_root(residual, &cfg).map_err(|_| ContractError::BracketFailure { lo, hi })
}

/// Outcome of the coordinating renewal contract `w^δ`.
pub fn coordinated_renewal_report(p: &MarketParams, d: &DemandModel) -> Result<RenewalAnalysis> {
    let first_best = centralized_optimum(p, d)?;
    let w = coordinating_wholesale(p, d)?;
    Ok(endogenous_analysis(p, d, w, first_best.capacity, first_best.profit))
}

/// Limit of the OEM's NPV share as `(r - k)/c → ∞`: `(δbλ + δ)/(δbλ + 1)`.
pub fn asymptotic_oem_fraction(p: &MarketParams) -> f64 {
    let dbl = p.discount * p.base_demand * p.tail_rate;
    (dbl + p.discount) / (dbl + 1.0)
}

/// OEM-optimal versus coordinating wholesale price under endogenous renewal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndogenousComparison {
    pub optimal: RenewalAnalysis,
    pub coordinated: RenewalAnalysis,
    /// `100 (π_m(w_opt) - π_m(w^δ)) / π_m(w_opt)`, per generation.
    pub profit_difference_pct: f64,
    /// The 200-point scan agreed with the golden-section maximizer.
    pub unimodal_guard_passed: bool,
}

/// OEM per-generation profit `(r - w)·E[min(D, x̃(w, δ))]`.
pub fn oem_profit_endogenous(p: &MarketParams, d: &DemandModel, w: f64) -> f64 {
    match supplier_best_response_endogenous(p, d, w) {
        Ok(x) => oem_profit(p, d, w, x),
        Err(_) => f64::NEG_INFINITY,
    }
}

const GUARD_POINTS: usize = 200;

/// Golden-section search for the OEM's best wholesale price under endogenous
/// renewal, compared with the coordinating price.
pub fn optimal_wholesale_endogenous(p: &MarketParams, d: &DemandModel) -> Result<EndogenousComparison> {
    let first_best = centralized_optimum(p, d)?;
    let (lo, hi) = (p.capacity_cost + p.production_cost, p.retail);
    let f = |w: f64| oem_profit_endogenous(p, d, w);
    let mut best = golden_section_max(f, &price_config(p, lo, hi))?;
    let guard = grid_agrees_with_max(f, lo, hi, GUARD_POINTS, best.x);
    if !guard {
        // restart around the best grid point and keep whichever is higher
        let step = (hi - lo) / (GUARD_POINTS - 1) as f64;
        let grid_best = (0..GUARD_POINTS)
            .map(|i| lo + step * i as f64)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap_or(lo);
        let local = golden_section_max(
            f,
            &price_config(p, (grid_best - step).max(lo), (grid_best + step).min(hi)),
        )?;
        if local.value > best.value {
            best = local;
        }
    }
    let w_opt = best.x;
    let x_opt = supplier_best_response_endogenous(p, d, w_opt)?;
    let optimal = endogenous_analysis(p, d, w_opt, x_opt, first_best.profit);

    let w_coord = coordinating_wholesale(p, d)?;
    let x_coord = supplier_best_response_endogenous(p, d, w_coord)?;
    let coordinated = endogenous_analysis(p, d, w_coord, x_coord, first_best.profit);

    let profit_difference_pct = 100.0 * (optimal.oem_profit - coordinated.oem_profit) / optimal.oem_profit;
    Ok(EndogenousComparison {
        optimal,
        coordinated,
        profit_difference_pct,
        unimodal_guard_passed: guard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_gen::supplier_best_response_wholesale;

    fn fig2() -> MarketParams {
        MarketParams::new(10.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9)
    }

    /// Direct maximization of the NPV on a fine grid followed by local refinement.
    fn npv_argmax(p: &MarketParams, d: &DemandModel, w: f64) -> f64 {
        let (mut lo, mut hi) = (d.base, d.base + 30.0 * d.tail_mean());
        for _ in 0..6 {
            let n = 2000;
            let step = (hi - lo) / n as f64;
            let mut best = (lo, f64::NEG_INFINITY);
            for i in 0..=n {
                let x = lo + step * i as f64;
                let v = supplier_npv_endogenous(p, d, w, x);
                if v > best.1 {
                    best = (x, v);
                }
            }
            lo = (best.0 - step).max(d.base);
            hi = best.0 + step;
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn exogenous_npv_examples() {
        let p = fig2();
        let d = p.exponential_demand();
        let a = npv_exogenous(&p, &d, 2.0, 0.0).unwrap();
        let x = supplier_best_response_wholesale(&p, &d, 2.0);
        assert_eq!(a.supplier_npv, supplier_profit(&p, &d, 2.0, x));
        for r in [0.5, 0.9] {
            assert_eq!(npv_exogenous(&p, &d, 2.0, r).unwrap().capacity, a.capacity);
        }
        let q = p.with_discount(0.999);
        let a = npv_exogenous(&q, &d, 2.0, 0.999).unwrap();
        assert!(a.supplier_npv.is_finite() && a.oem_npv.is_finite());
        assert!(npv_exogenous(&p, &d, 2.0, 1.0).is_err());
    }

    #[test]
    fn exogenous_argmax_independent_of_renewal() {
        let p = fig2();
        let d = p.exponential_demand();
        let w = 3.0;
        let expected = supplier_best_response_wholesale(&p, &d, w);
        for r in [0.0, 0.5, 0.9] {
            let m = golden_section_max(
                |x| supplier_profit(&p, &d, w, x) / (1.0 - p.discount * r),
                &SolveConfig::new(0.0, 20.0).abs_tol(1e-10),
            )
            .unwrap();
            assert!((m.x - expected).abs() < 1e-6, "R={r}");
        }
    }

    #[test]
    fn endogenous_best_response_matches_direct_maximization() {
        let p = fig2();
        let d = p.exponential_demand();
        let x = supplier_best_response_endogenous(&p, &d, 2.0).unwrap();
        let oracle = npv_argmax(&p, &d, 2.0);
        assert!((x - oracle).abs() < 1e-6, "{x} vs {oracle}");
        assert!(x > supplier_best_response_wholesale(&p, &d, 2.0));
    }

    #[test]
    fn endogenous_best_response_at_participation_floor() {
        let p = fig2();
        let d = p.exponential_demand();
        let x = supplier_best_response_endogenous(&p, &d, 1.0).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
        assert!(matches!(
            supplier_best_response_endogenous(&p, &d, 0.5),
            Err(ContractError::ParticipationViolated { .. })
        ));
    }

    #[test]
    fn endogenous_best_response_at_large_scale() {
        let p = MarketParams::new(1e7, 1e5, 0.0, 50.0, 0.01).with_discount(0.9);
        let d = p.exponential_demand();
        for w in [4e5, 5e6, 9.9e6] {
            let x = supplier_best_response_endogenous(&p, &d, w).unwrap();
            assert!(x.is_finite() && x > supplier_best_response_wholesale(&p, &d, w));
            // first-order condition of the NPV, relative to the scale of π_s
            let h = 1e-5 * x;
            let deriv =
                (supplier_npv_endogenous(&p, &d, w, x + h) - supplier_npv_endogenous(&p, &d, w, x - h)) / (2.0 * h);
            let scale = supplier_npv_endogenous(&p, &d, w, x) / x;
            assert!((deriv / scale).abs() < 1e-5, "w={w} deriv={deriv}");
        }
        // extreme margin where e^y would overflow
        let q = MarketParams::new(1e9, 1.0, 0.0, 1.0, 1.0).with_discount(0.5);
        let x = supplier_best_response_endogenous(&q, &q.exponential_demand(), 1e5).unwrap();
        assert!(x.is_finite());
    }

    #[test]
    fn erlang_endogenous_matches_grid() {
        let p = MarketParams::new(10.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9);
        let d = p.erlang_demand(3);
        let x = supplier_best_response_endogenous(&p, &d, 2.5).unwrap();
        assert!((x - npv_argmax(&p, &d, 2.5)).abs() < 1e-5);
    }

    #[test]
    fn coordinating_price_example() {
        let p = MarketParams::new(11.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9);
        let d = p.exponential_demand();
        let w = coordinating_wholesale(&p, &d).unwrap();
        let expected = (0.9 * (2.0 + 11f64.ln()) + 0.1 * 11.0) / 1.9;
        assert!((w - expected).abs() < 1e-12);
        assert!((w - 2.662).abs() < 1e-3);
        let x = supplier_best_response_endogenous(&p, &d, w).unwrap();
        assert!((x - (1.0 + 11f64.ln())).abs() < 1e-8 * x);
    }

    #[test]
    fn bisection_recovers_closed_form() {
        let p = MarketParams::new(20.0, 1.0, 1.0, 1.0, 0.5).with_discount(0.85);
        let d = p.exponential_demand();
        let fb = centralized_optimum(&p, &d).unwrap();
        let closed = coordinating_wholesale(&p, &d).unwrap();
        let numeric = coordinating_wholesale_by_bisection(&p, &d, fb.capacity).unwrap();
        assert!((closed - numeric).abs() < 1e-6);
    }

    #[test]
    fn coordinating_price_shape() {
        let base = |ratio: f64, delta: f64| {
            let p = MarketParams::new(ratio, 1.0, 0.0, 1.0, 1.0).with_discount(delta);
            coordinating_wholesale(&p, &p.exponential_demand()).unwrap()
        };
        for delta in [0.3, 0.6, 0.9] {
            let mut prev = 0.0;
            for ratio in [2.0, 5.0, 10.0, 20.0, 50.0] {
                let w = base(ratio, delta);
                assert!(w > prev && w < ratio);
                prev = w;
            }
        }
        for ratio in [2.0, 10.0, 50.0] {
            assert!(base(ratio, 0.3) > base(ratio, 0.6) && base(ratio, 0.6) > base(ratio, 0.9));
        }
    }

    #[test]
    fn coordinated_report_identities() {
        let p = MarketParams::new(10.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9);
        let d = p.exponential_demand();
        let a = coordinated_renewal_report(&p, &d).unwrap();
        assert!((a.expected_generations - 10.0).abs() < 1e-12);
        let expected_oem = (p.retail - a.wholesale) * (1.0 + (1.0 - 0.1)) / 0.1;
        assert!((a.oem_npv - expected_oem).abs() < 1e-10);
        assert!(a.oem_fraction > 0.0 && a.oem_fraction < 1.0);
        let r = a.report();
        assert_eq!(r.expected_duration, Some(a.expected_generations));
        assert!((r.efficiency - 1.0).abs() < 1e-12);
    }

    #[test]
    fn erlang_coordination_by_bisection() {
        let p = MarketParams::new(10.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9);
        let d = p.erlang_demand(3);
        let a = coordinated_renewal_report(&p, &d).unwrap();
        let x = supplier_best_response_endogenous(&p, &d, a.wholesale).unwrap();
        assert!((x - a.capacity).abs() < 1e-6 * a.capacity);
        // survival at x* is c/(r-k) for any tail
        assert!((a.expected_generations - 10.0).abs() < 1e-5);
        assert!(a.oem_fraction > 0.0 && a.oem_fraction < 1.0);
    }

    #[test]
    fn asymptotic_fraction_examples() {
        let mut p = MarketParams::new(10.0, 1.0, 0.0, 0.0, 1.0).with_discount(0.9);
        assert!((asymptotic_oem_fraction(&p) - 0.9).abs() < 1e-15);
        p.base_demand = 1.0;
        assert!((asymptotic_oem_fraction(&p) - 1.8 / 1.9).abs() < 1e-15);
        let p = MarketParams::new(10.0, 1.0, 0.0, 1e6, 1.0).with_discount(0.5);
        assert!((asymptotic_oem_fraction(&p) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn optimal_endogenous_small_cell() {
        let p = MarketParams::new(5.0, 1.0, 0.0, 0.0, 1.0).with_discount(0.95);
        let cmp = optimal_wholesale_endogenous(&p, &p.exponential_demand()).unwrap();
        assert!(cmp.unimodal_guard_passed);
        assert!(cmp.profit_difference_pct >= 0.90 && cmp.profit_difference_pct <= 11.89);
        assert!(cmp.optimal.wholesale < cmp.coordinated.wholesale);
        assert!(cmp.optimal.expected_generations < cmp.coordinated.expected_generations);
    }
}
