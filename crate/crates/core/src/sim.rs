//! Monte-Carlo oracle for the expected-profit and NPV formulas.
//!
//! Every replication owns its own ChaCha8 stream (the run seed plus the
//! replication index as stream id), so estimates do not depend on how the
//! work is split across threads. Replications are grouped into fixed chunks
//! whose statistics are merged in chunk order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ContractError, Result};
use crate::model::{ContractTerms, DemandModel, MarketParams};
use crate::multi_gen::supplier_best_response_endogenous;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    pub discount: f64,
    /// Maximum number of generations simulated per relationship.
    pub horizon_cap: usize,
}

impl SimConfig {
    /// Horizon chosen so that `δ^cap < 1e-12`.
    pub fn new(seed: u64, replications: usize, discount: f64) -> Self {
        Self {
            seed,
            replications,
            discount,
            horizon_cap: horizon_for(discount),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(ContractError::InvalidParams("replications >= 1"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(ContractError::InvalidParams("0 < discount < 1"));
        }
        if self.horizon_cap < 1 {
            return Err(ContractError::InvalidParams("horizon_cap >= 1"));
        }
        Ok(())
    }

    fn rng(&self, replication: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64);
        rng
    }
}

pub fn horizon_for(discount: f64) -> usize {
    if !(discount > 0.0 && discount < 1.0) {
        return 1;
    }
    ((1e-12f64).ln() / discount.ln()).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

impl SimEstimate {
    /// `|mean - value| / std_error`, or 0 when both agree exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.mean - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Self { n, mean, m2 }
    }

    fn estimate(&self) -> SimEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        SimEstimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            replications: self.n,
        }
    }
}

/// Runs `body` once per replication and reduces the `N` returned values in
/// replication order.
fn replicate<const N: usize, F>(cfg: &SimConfig, body: F) -> [Moments; N]
where
    F: Fn(&mut ChaCha8Rng) -> [f64; N] + Sync,
{
    let chunks = cfg.replications.div_ceil(CHUNK);
    let partial: Vec<[Moments; N]> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = [Moments::default(); N];
            for rep in ci * CHUNK..((ci + 1) * CHUNK).min(cfg.replications) {
                let mut rng = cfg.rng(rep);
                for (m, v) in acc.iter_mut().zip(body(&mut rng)) {
                    m.push(v);
                }
            }
            acc
        })
        .collect();
    partial.into_iter().fold([Moments::default(); N], |mut total, chunk| {
        for (t, c) in total.iter_mut().zip(chunk) {
            *t = t.merge(c);
        }
        total
    })
}

pub fn sample_demand(d: &DemandModel, rng: &mut ChaCha8Rng) -> f64 {
    d.sample(rng)
}

/// Realized `(supplier, OEM)` profit of one generation with demand `demand`.
pub fn realized_profits(p: &MarketParams, terms: &ContractTerms, x: f64, demand: f64) -> (f64, f64) {
    let k = p.production_cost;
    let w = terms.wholesale_price();
    let sales = demand.min(x);
    let supplier = (w - k) * sales - p.capacity_cost * x;
    let oem = (p.retail - w) * sales;
    let transfer = match *terms {
        ContractTerms::LumpSumPenalty { rho, .. } if demand > x => rho,
        ContractTerms::UnitPenalty { rho1, .. } if demand > x => rho1 * (demand - x),
        _ => 0.0,
    };
    (supplier - transfer, oem + transfer)
}

/// Single-generation expected profits of `(supplier, OEM)` at capacity `x`.
pub fn estimate_single_gen_profit(
    p: &MarketParams,
    d: &DemandModel,
    terms: &ContractTerms,
    x: f64,
    cfg: &SimConfig,
) -> Result<(SimEstimate, SimEstimate)> {
    cfg.validate()?;
    if x.is_nan() || x < 0.0 {
        return Err(ContractError::InvalidParams("x >= 0"));
    }
    let [s, m] = replicate(cfg, |rng| {
        let (s, m) = realized_profits(p, terms, x, sample_demand(d, rng));
        [s, m]
    });
    Ok((s.estimate(), m.estimate()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationshipEstimate {
    pub capacity: f64,
    pub supplier_npv: SimEstimate,
    /// Number of generations until the first shortfall, capped at the horizon.
    pub duration: SimEstimate,
}

/// Simulates wholesale relationships renewed while demand never exceeds
/// capacity. Capacity defaults to the endogenous-renewal best response.
pub fn estimate_relationship_npv(
    p: &MarketParams,
    d: &DemandModel,
    w: f64,
    x: Option<f64>,
    cfg: &SimConfig,
) -> Result<RelationshipEstimate> {
    cfg.validate()?;
    let x = match x {
        Some(x) if x >= 0.0 => x,
        Some(_) => return Err(ContractError::InvalidParams("x >= 0")),
        None => supplier_best_response_endogenous(&p.with_discount(cfg.discount), d, w)?,
    };
    let terms = ContractTerms::Wholesale { w };
    let [npv, duration] = replicate(cfg, |rng| {
        let mut npv = 0.0;
        let mut factor = 1.0;
        let mut generations = 0;
        while generations < cfg.horizon_cap {
            let demand = sample_demand(d, rng);
            npv += factor * realized_profits(p, &terms, x, demand).0;
            generations += 1;
            if demand > x {
                break;
            }
            factor *= cfg.discount;
        }
        [npv, generations as f64]
    });
    Ok(RelationshipEstimate {
        capacity: x,
        supplier_npv: npv.estimate(),
        duration: duration.estimate(),
    })
}
