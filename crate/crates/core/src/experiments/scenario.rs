//! Flat `key = value` scenario files.
//!
//! ```text
//! # lump-sum penalty example
//! r = 1e7
//! c = 1e5
//! k = 0
//! b = 50
//! lambda = 0.01
//! demand.kind = exponential
//! contract.kind = lump_sum
//! contract.directive = coordinate
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{format_float, CsvTable};
use crate::error::{ContractError, Result};
use crate::model::{
    validate_params, AssumptionWarning, ContractTerms, DemandModel, MarketParams, OutcomeReport, RenewalMode, Tail,
    ValidationResult,
};
use crate::multi_gen::{
    coordinated_renewal_report, npv_endogenous, npv_exogenous, optimal_wholesale_endogenous, RenewalAnalysis,
};
use crate::sim::{estimate_relationship_npv, estimate_single_gen_profit, horizon_for, SimConfig};
use crate::single_gen::{
    centralized_optimum, coordinated_lump_sum, coordinated_penalty_numeric, coordinated_unit_penalty,
    oem_optimal_wholesale, oem_profit, oem_profit_lump_sum, oem_profit_unit_penalty, supplier_best_response_lump_sum,
    supplier_best_response_unit_penalty, supplier_best_response_wholesale, supplier_profit, supplier_profit_lump_sum,
    supplier_profit_unit_penalty, PenaltyContractSolution, PenaltyKind,
};

pub const DEFAULT_SIM_REPLICATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractKind {
    Wholesale,
    LumpSum,
    UnitPenalty,
    Renewal,
}

impl ContractKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Wholesale => "wholesale",
            Self::LumpSum => "lump_sum",
            Self::UnitPenalty => "unit_penalty",
            Self::Renewal => "renewal",
        }
    }
}

impl FromStr for ContractKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wholesale" => Ok(Self::Wholesale),
            "lump_sum" => Ok(Self::LumpSum),
            "unit_penalty" => Ok(Self::UnitPenalty),
            "renewal" => Ok(Self::Renewal),
            _ => Err(format!("unknown contract kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Directive {
    Coordinate,
    Optimize,
}

impl Directive {
    pub fn name(self) -> &'static str {
        match self {
            Self::Coordinate => "coordinate",
            Self::Optimize => "optimize",
        }
    }
}

/// Either fixed contract terms or an instruction to solve for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContractSpec {
    Terms(ContractTerms),
    Directive {
        kind: ContractKind,
        directive: Directive,
        mode: RenewalMode,
    },
}

impl ContractSpec {
    pub fn kind(&self) -> ContractKind {
        match self {
            Self::Terms(ContractTerms::Wholesale { .. }) => ContractKind::Wholesale,
            Self::Terms(ContractTerms::LumpSumPenalty { .. }) => ContractKind::LumpSum,
            Self::Terms(ContractTerms::UnitPenalty { .. }) => ContractKind::UnitPenalty,
            Self::Terms(ContractTerms::Renewal { .. }) => ContractKind::Renewal,
            Self::Directive { kind, .. } => *kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub market: MarketParams,
    pub demand: DemandModel,
    pub contract: ContractSpec,
    pub sim: Option<SimConfig>,
}

const KEYS: &[&str] = &[
    "r",
    "c",
    "k",
    "b",
    "lambda",
    "delta",
    "reservation",
    "demand.kind",
    "demand.n",
    "contract.kind",
    "contract.directive",
    "contract.w",
    "contract.rho",
    "contract.rho1",
    "contract.mode",
    "contract.renewal_prob",
    "sim.seed",
    "sim.replications",
    "sim.horizon_cap",
];

struct Entry<'a> {
    value: &'a str,
    line: usize,
    column: usize,
}

struct Entries<'a> {
    map: HashMap<&'a str, Entry<'a>>,
    end_line: usize,
}

impl<'a> Entries<'a> {
    fn missing(&self, key: &str) -> ParseError {
        ParseError {
            line: self.end_line,
            column: 1,
            message: format!("missing required key `{key}`"),
        }
    }

    fn parse_opt<T: FromStr>(&self, key: &str, what: &str) -> std::result::Result<Option<T>, ParseError> {
        let Some(e) = self.map.get(key) else { return Ok(None) };
        e.value.parse().map(Some).map_err(|_| ParseError {
            line: e.line,
            column: e.column,
            message: format!("`{key}` expects {what}, got `{}`", e.value),
        })
    }

    fn float_opt(&self, key: &str) -> std::result::Result<Option<f64>, ParseError> {
        let v: Option<f64> = self.parse_opt(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.invalid(key, "a finite number")),
            _ => Ok(v),
        }
    }

    fn float(&self, key: &str) -> std::result::Result<f64, ParseError> {
        self.float_opt(key)?.ok_or_else(|| self.missing(key))
    }

    fn invalid(&self, key: &str, what: &str) -> ParseError {
        let e = &self.map[key];
        ParseError {
            line: e.line,
            column: e.column,
            message: format!("`{key}` expects {what}, got `{}`", e.value),
        }
    }

    fn forbid(&self, key: &str, reason: &str) -> std::result::Result<(), ParseError> {
        match self.map.get(key) {
            Some(e) => Err(ParseError {
                line: e.line,
                column: e.column,
                message: format!("`{key}` {reason}"),
            }),
            None => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> std::result::Result<Entries<'_>, ParseError> {
    let mut map: HashMap<&str, Entry> = HashMap::new();
    let mut end_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        end_line = line + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let key_col = content.len() - content.trim_start().len() + 1;
        let Some((key, value)) = content.split_once('=') else {
            return Err(ParseError {
                line,
                column: key_col,
                message: "expected `key = value`".into(),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ParseError {
                line,
                column: key_col,
                message: format!("unknown key `{key}`"),
            });
        }
        let after_eq = key_col + content[key_col - 1..].find('=').expect("has =") + 1;
        let value_col = after_eq + value.len() - value.trim_start().len();
        let value = value.trim();
        if value.is_empty() {
            return Err(ParseError {
                line,
                column: value_col,
                message: format!("`{key}` has no value"),
            });
        }
        if let Some(prev) = map.get(key) {
            return Err(ParseError {
                line,
                column: key_col,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        map.insert(
            key,
            Entry {
                value,
                line,
                column: value_col,
            },
        );
    }
    Ok(Entries { map, end_line })
}

impl Scenario {
    pub fn parse(text: &str) -> std::result::Result<Self, ParseError> {
        let e = tokenize(text)?;
        let mut market = MarketParams::new(
            e.float("r")?,
            e.float("c")?,
            e.float("k")?,
            e.float("b")?,
            e.float("lambda")?,
        );
        if let Some(delta) = e.float_opt("delta")? {
            market.discount = delta;
        }
        if let Some(z) = e.float_opt("reservation")? {
            market.reservation = z;
        }

        let demand = match e.map.get("demand.kind").map(|x| x.value).unwrap_or("exponential") {
            "exponential" => {
                e.forbid("demand.n", "only applies to erlang demand")?;
                market.exponential_demand()
            }
            "erlang" => {
                let n: u32 = e
                    .parse_opt("demand.n", "a positive integer")?
                    .ok_or_else(|| e.missing("demand.n"))?;
                if n == 0 {
                    return Err(e.invalid("demand.n", "a positive integer"));
                }
                market.erlang_demand(n)
            }
            _ => return Err(e.invalid("demand.kind", "`exponential` or `erlang`")),
        };

        let kind_entry = e.map.get("contract.kind").ok_or_else(|| e.missing("contract.kind"))?;
        let kind: ContractKind = kind_entry
            .value
            .parse()
            .map_err(|_| e.invalid("contract.kind", "wholesale, lump_sum, unit_penalty or renewal"))?;
        let mode = match kind {
            ContractKind::Renewal => match e.map.get("contract.mode").map(|x| x.value).unwrap_or("endogenous") {
                "endogenous" => {
                    e.forbid("contract.renewal_prob", "only applies to exogenous renewal")?;
                    RenewalMode::Endogenous
                }
                "exogenous" => {
                    let prob = e
                        .float_opt("contract.renewal_prob")?
                        .ok_or_else(|| e.missing("contract.renewal_prob"))?;
                    RenewalMode::ExogenousProb(prob)
                }
                _ => return Err(e.invalid("contract.mode", "`endogenous` or `exogenous`")),
            },
            _ => {
                e.forbid("contract.mode", "only applies to renewal contracts")?;
                e.forbid("contract.renewal_prob", "only applies to renewal contracts")?;
                RenewalMode::Endogenous
            }
        };
        if kind != ContractKind::LumpSum {
            e.forbid("contract.rho", "only applies to lump_sum contracts")?;
        }
        if kind != ContractKind::UnitPenalty {
            e.forbid("contract.rho1", "only applies to unit_penalty contracts")?;
        }

        let contract = match e.map.get("contract.directive").map(|x| x.value) {
            Some(d) => {
                let directive = match d {
                    "coordinate" => Directive::Coordinate,
                    "optimize" => Directive::Optimize,
                    _ => return Err(e.invalid("contract.directive", "`coordinate` or `optimize`")),
                };
                for key in ["contract.w", "contract.rho", "contract.rho1"] {
                    e.forbid(key, "cannot be combined with contract.directive")?;
                }
                ContractSpec::Directive { kind, directive, mode }
            }
            None => {
                let w = e.float("contract.w")?;
                let terms = match kind {
                    ContractKind::Wholesale => ContractTerms::Wholesale { w },
                    ContractKind::LumpSum => ContractTerms::LumpSumPenalty {
                        w,
                        rho: e.float("contract.rho")?,
                    },
                    ContractKind::UnitPenalty => ContractTerms::UnitPenalty {
                        w,
                        rho1: e.float("contract.rho1")?,
                    },
                    ContractKind::Renewal => ContractTerms::Renewal { w, mode },
                };
                ContractSpec::Terms(terms)
            }
        };

        let has_sim = e.map.keys().any(|k| k.starts_with("sim."));
        let sim = if has_sim {
            let seed = e.parse_opt("sim.seed", "an unsigned integer")?.unwrap_or(0);
            let replications = e
                .parse_opt("sim.replications", "a positive integer")?
                .unwrap_or(DEFAULT_SIM_REPLICATIONS);
            if replications == 0 {
                return Err(e.invalid("sim.replications", "a positive integer"));
            }
            let mut cfg = SimConfig::new(seed, replications, market.discount);
            if let Some(cap) = e.parse_opt("sim.horizon_cap", "a positive integer")? {
                if cap == 0 {
                    return Err(e.invalid("sim.horizon_cap", "a positive integer"));
                }
                cfg.horizon_cap = cap;
            }
            Some(cfg)
        } else {
            None
        };

        Ok(Self {
            market,
            demand,
            contract,
            sim,
        })
    }

    /// Canonical text form; `Scenario::parse` reads it back unchanged.
    pub fn to_text(&self) -> String {
        let m = &self.market;
        let mut s = String::new();
        for (key, v) in [
            ("r", m.retail),
            ("c", m.capacity_cost),
            ("k", m.production_cost),
            ("b", m.base_demand),
            ("lambda", m.tail_rate),
            ("delta", m.discount),
            ("reservation", m.reservation),
        ] {
            let _ = writeln!(s, "{key} = {v:?}");
        }
        match self.demand.tail {
            Tail::Exponential { .. } => s.push_str("demand.kind = exponential\n"),
            Tail::Erlang { shape, .. } => {
                let _ = writeln!(s, "demand.kind = erlang\ndemand.n = {shape}");
            }
        }
        let _ = writeln!(s, "contract.kind = {}", self.contract.kind().name());
        let mode = match self.contract {
            ContractSpec::Directive { directive, mode, .. } => {
                let _ = writeln!(s, "contract.directive = {}", directive.name());
                mode
            }
            ContractSpec::Terms(terms) => {
                let _ = writeln!(s, "contract.w = {:?}", terms.wholesale_price());
                match terms {
                    ContractTerms::LumpSumPenalty { rho, .. } => {
                        let _ = writeln!(s, "contract.rho = {rho:?}");
                    }
                    ContractTerms::UnitPenalty { rho1, .. } => {
                        let _ = writeln!(s, "contract.rho1 = {rho1:?}");
                    }
                    _ => {}
                }
                match terms {
                    ContractTerms::Renewal { mode, .. } => mode,
                    _ => RenewalMode::Endogenous,
                }
            }
        };
        if self.contract.kind() == ContractKind::Renewal {
            match mode {
                RenewalMode::Endogenous => s.push_str("contract.mode = endogenous\n"),
                RenewalMode::ExogenousProb(prob) => {
                    let _ = writeln!(s, "contract.mode = exogenous\ncontract.renewal_prob = {prob:?}");
                }
            }
        }
        if let Some(cfg) = &self.sim {
            let _ = writeln!(
                s,
                "sim.seed = {}\nsim.replications = {}\nsim.horizon_cap = {}",
                cfg.seed, cfg.replications, cfg.horizon_cap
            );
        }
        s
    }

    /// Adds a default simulation section when none is present.
    pub fn with_default_sim(mut self, seed: Option<u64>) -> Self {
        let cfg = self
            .sim
            .get_or_insert_with(|| SimConfig::new(0, DEFAULT_SIM_REPLICATIONS, self.market.discount));
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        cfg.discount = self.market.discount;
        if cfg.horizon_cap == 0 {
            cfg.horizon_cap = horizon_for(cfg.discount);
        }
        self
    }
}

/// Named results of one scenario, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub title: String,
    pub warnings: Vec<AssumptionWarning>,
    pub fields: Vec<(&'static str, f64)>,
    pub outcome: OutcomeReport,
}

impl ScenarioReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.fields.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    /// Aligned `name  value` lines under the title.
    pub fn render(&self) -> String {
        let width = self.fields.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let mut s = format!("{}\n", self.title);
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for (name, v) in &self.fields {
            let _ = writeln!(s, "  {name:<width$}  {}", format_float(*v));
        }
        s
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(self.fields.iter().map(|(n, _)| *n));
        t.push_numbers(&self.fields.iter().map(|(_, v)| *v).collect::<Vec<_>>());
        t
    }
}

fn outcome_fields(fields: &mut Vec<(&'static str, f64)>, r: &OutcomeReport) {
    fields.extend([
        ("capacity", r.capacity),
        ("supplier_profit", r.supplier_profit),
        ("oem_profit", r.oem_profit),
        ("chain_profit", r.chain_profit),
        ("first_best_profit", r.first_best_profit),
        ("efficiency", r.efficiency),
    ]);
}

fn penalty_fields(fields: &mut Vec<(&'static str, f64)>, s: &PenaltyContractSolution) {
    let penalty_name = match s.kind {
        PenaltyKind::LumpSum => "rho_hat",
        PenaltyKind::PerUnit => "rho1_hat",
    };
    fields.extend([("w_hat", s.w_hat), (penalty_name, s.penalty)]);
    outcome_fields(fields, &s.report());
    let e = &s.enforceability;
    fields.extend([
        ("best_case_profit", e.best_case_profit),
        ("shortfall_probability", e.shortfall_probability),
        ("penalty_to_best_case_ratio", e.penalty_to_best_case_ratio),
        ("penalty_to_wholesale_ratio", e.penalty_to_wholesale_ratio),
    ]);
}

fn renewal_fields(fields: &mut Vec<(&'static str, f64)>, a: &RenewalAnalysis) {
    fields.extend([
        ("w", a.wholesale),
        ("capacity", a.capacity),
        ("renewal_prob", a.renewal_prob),
        ("expected_generations", a.expected_generations),
        ("supplier_profit", a.supplier_profit),
        ("oem_profit", a.oem_profit),
        ("supplier_npv", a.supplier_npv),
        ("oem_npv", a.oem_npv),
        ("chain_npv_first_best", a.chain_npv_first_best),
        ("oem_fraction", a.oem_fraction),
    ]);
}

/// Solves or evaluates the scenario's contract and, when the scenario has a
/// simulation section, appends Monte-Carlo estimates of the same quantities.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let p = &s.market;
    let d = &s.demand;
    let warnings = match validate_params(p) {
        ValidationResult::Fatal(name) => return Err(ContractError::InvalidParams(name)),
        v => v.warnings().to_vec(),
    };
    if let ContractSpec::Terms(t) = &s.contract {
        if let Some(name) = t.violation() {
            return Err(ContractError::InvalidParams(name));
        }
    }
    let first_best = centralized_optimum(p, d)?;
    let mut fields = vec![("first_best_capacity", first_best.capacity)];
    let mut renewal: Option<RenewalAnalysis> = None;

    // (terms evaluated by the simulator, capacity, outcome)
    let (title, terms, x, outcome) = match s.contract {
        ContractSpec::Terms(terms) => {
            let w = terms.wholesale_price();
            fields.push(("w", w));
            match terms {
                ContractTerms::Wholesale { w } => {
                    let x = supplier_best_response_wholesale(p, d, w);
                    let r = OutcomeReport::single_generation(
                        x,
                        supplier_profit(p, d, w, x),
                        oem_profit(p, d, w, x),
                        first_best.profit,
                    );
                    outcome_fields(&mut fields, &r);
                    ("wholesale contract", terms, x, r)
                }
                ContractTerms::LumpSumPenalty { w, rho } => {
                    fields.push(("rho", rho));
                    let x = supplier_best_response_lump_sum(p, d, w, rho);
                    let r = OutcomeReport::single_generation(
                        x,
                        supplier_profit_lump_sum(p, d, w, rho, x),
                        oem_profit_lump_sum(p, d, w, rho, x),
                        first_best.profit,
                    );
                    outcome_fields(&mut fields, &r);
                    fields.push(("shortfall_probability", d.survival(x)));
                    ("lump-sum penalty contract", terms, x, r)
                }
                ContractTerms::UnitPenalty { w, rho1 } => {
                    fields.push(("rho1", rho1));
                    let x = supplier_best_response_unit_penalty(p, d, w, rho1);
                    let r = OutcomeReport::single_generation(
                        x,
                        supplier_profit_unit_penalty(p, d, w, rho1, x),
                        oem_profit_unit_penalty(p, d, w, rho1, x),
                        first_best.profit,
                    );
                    outcome_fields(&mut fields, &r);
                    fields.push(("shortfall_probability", d.survival(x)));
                    ("per-unit penalty contract", terms, x, r)
                }
                ContractTerms::Renewal { w, mode } => {
                    fields.pop();
                    let a = match mode {
                        RenewalMode::ExogenousProb(prob) => npv_exogenous(p, d, w, prob)?,
                        RenewalMode::Endogenous => npv_endogenous(p, d, w)?,
                    };
                    renewal_fields(&mut fields, &a);
                    renewal = Some(a);
                    ("renewal contract", terms, a.capacity, a.report())
                }
            }
        }
        ContractSpec::Directive { kind, directive, mode } => match (kind, directive, mode) {
            (ContractKind::Wholesale, Directive::Optimize, _) => {
                let sol = oem_optimal_wholesale(p, d)?;
                fields.push(("w", sol.w));
                outcome_fields(&mut fields, &sol.report);
                (
                    "OEM-optimal wholesale contract",
                    ContractTerms::Wholesale { w: sol.w },
                    sol.report.capacity,
                    sol.report,
                )
            }
            (ContractKind::Wholesale, Directive::Coordinate, _) => {
                let w = p.retail;
                let x = supplier_best_response_wholesale(p, d, w);
                let r = OutcomeReport::single_generation(
                    x,
                    supplier_profit(p, d, w, x),
                    oem_profit(p, d, w, x),
                    first_best.profit,
                );
                fields.push(("w", w));
                outcome_fields(&mut fields, &r);
                (
                    "coordinating wholesale contract (w = r)",
                    ContractTerms::Wholesale { w },
                    x,
                    r,
                )
            }
            // the coordinating penalty contract already leaves the supplier only Z
            (ContractKind::LumpSum, _, _) => {
                let sol = if d.is_exponential() {
                    coordinated_lump_sum(p, d)?
                } else {
                    coordinated_penalty_numeric(p, d)?
                };
                penalty_fields(&mut fields, &sol);
                let terms = ContractTerms::LumpSumPenalty {
                    w: sol.w_hat,
                    rho: sol.penalty,
                };
                (
                    "coordinating lump-sum penalty contract",
                    terms,
                    sol.capacity,
                    sol.report(),
                )
            }
            (ContractKind::UnitPenalty, _, _) => {
                let sol = coordinated_unit_penalty(p, d)?;
                penalty_fields(&mut fields, &sol);
                let terms = ContractTerms::UnitPenalty {
                    w: sol.w_hat,
                    rho1: sol.penalty,
                };
                (
                    "coordinating per-unit penalty contract",
                    terms,
                    sol.capacity,
                    sol.report(),
                )
            }
            (ContractKind::Renewal, Directive::Coordinate, RenewalMode::Endogenous) => {
                let a = coordinated_renewal_report(p, d)?;
                renewal_fields(&mut fields, &a);
                renewal = Some(a);
                let terms = ContractTerms::Renewal { w: a.wholesale, mode };
                ("coordinating renewal contract", terms, a.capacity, a.report())
            }
            (ContractKind::Renewal, Directive::Optimize, RenewalMode::Endogenous) => {
                let cmp = optimal_wholesale_endogenous(p, d)?;
                renewal_fields(&mut fields, &cmp.optimal);
                fields.extend([
                    ("w_coordinating", cmp.coordinated.wholesale),
                    ("oem_profit_coordinating", cmp.coordinated.oem_profit),
                    (
                        "expected_generations_coordinating",
                        cmp.coordinated.expected_generations,
                    ),
                    ("profit_difference_pct", cmp.profit_difference_pct),
                ]);
                renewal = Some(cmp.optimal);
                let terms = ContractTerms::Renewal {
                    w: cmp.optimal.wholesale,
                    mode,
                };
                (
                    "OEM-optimal renewal contract",
                    terms,
                    cmp.optimal.capacity,
                    cmp.optimal.report(),
                )
            }
            (ContractKind::Renewal, directive, RenewalMode::ExogenousProb(prob)) => {
                let w = match directive {
                    Directive::Coordinate => p.retail,
                    Directive::Optimize => oem_optimal_wholesale(p, d)?.w,
                };
                let a = npv_exogenous(p, d, w, prob)?;
                renewal_fields(&mut fields, &a);
                renewal = Some(a);
                (
                    "renewal contract with exogenous renewal",
                    ContractTerms::Renewal { w, mode },
                    a.capacity,
                    a.report(),
                )
            }
        },
    };

    if let Some(cfg) = &s.sim {
        let mut cfg = *cfg;
        cfg.discount = p.discount;
        let (sup, oem) = estimate_single_gen_profit(p, d, &terms, x, &cfg)?;
        fields.extend([
            ("sim_supplier_profit", sup.mean),
            ("sim_supplier_profit_se", sup.std_error),
            ("sim_oem_profit", oem.mean),
            ("sim_oem_profit_se", oem.std_error),
        ]);
        if let (
            Some(a),
            ContractTerms::Renewal {
                mode: RenewalMode::Endogenous,
                ..
            },
        ) = (renewal, terms)
        {
            let est = estimate_relationship_npv(p, d, a.wholesale, Some(a.capacity), &cfg)?;
            fields.extend([
                ("sim_supplier_npv", est.supplier_npv.mean),
                ("sim_supplier_npv_se", est.supplier_npv.std_error),
                ("sim_duration", est.duration.mean),
                ("sim_duration_se", est.duration.std_error),
            ]);
        }
    }

    Ok(ScenarioReport {
        title: title.to_string(),
        warnings,
        fields,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LUMP_SUM: &str = "\
# lump-sum example
r = 1e7
c = 1e5
k = 0
b = 50
lambda = 0.01
contract.kind = lump_sum
contract.directive = coordinate
";

    #[test]
    fn lump_sum_scenario_report() {
        let s = Scenario::parse(LUMP_SUM).unwrap();
        let rep = run_scenario(&s).unwrap();
        assert!((rep.get("w_hat").unwrap() / 0.4e6 - 1.0).abs() < 0.02);
        assert!((rep.get("rho_hat").unwrap() / 959e6 - 1.0).abs() < 0.005);
        assert!((rep.get("penalty_to_best_case_ratio").unwrap() - 6.0).abs() < 0.2);
        assert!(rep.render().contains("rho_hat"));
        assert_eq!(rep.to_csv().headers.len(), rep.fields.len());
    }

    #[test]
    fn renewal_coordinate_scenario() {
        let text = "r = 10\nc = 1\nk = 0\nb = 1\nlambda = 1\ndelta = 0.9\ncontract.kind = renewal\ncontract.mode = endogenous\ncontract.directive = coordinate\n";
        let rep = run_scenario(&Scenario::parse(text).unwrap()).unwrap();
        let expected_w = (0.9 * (2.0 + 10f64.ln()) + 0.1 * 10.0) / 1.9;
        assert!((rep.get("w").unwrap() - expected_w).abs() < 1e-12);
        assert!((rep.get("capacity").unwrap() - rep.get("first_best_capacity").unwrap()).abs() < 1e-9);
    }

    #[test]
    fn simulated_scenario_fields() {
        let text = "r = 10\nc = 1\nk = 0\nb = 1\nlambda = 1\ncontract.kind = renewal\ncontract.w = 3\nsim.seed = 4\nsim.replications = 20000\n";
        let rep = run_scenario(&Scenario::parse(text).unwrap()).unwrap();
        let z = (rep.get("sim_supplier_npv").unwrap() - rep.get("supplier_npv").unwrap()).abs()
            / rep.get("sim_supplier_npv_se").unwrap();
        assert!(z < 3.0);
        let again = run_scenario(&Scenario::parse(text).unwrap()).unwrap();
        assert_eq!(rep.to_csv().to_csv_string(), again.to_csv().to_csv_string());
    }

    #[test]
    fn parse_errors_have_positions() {
        let err = Scenario::parse("").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        assert!(err.message.contains("`r`"));

        let err = Scenario::parse("r = 10\n  c = abc\n").unwrap_err();
        assert_eq!((err.line, err.column), (2, 7));

        let err = Scenario::parse("r = 10\nfoo = 1\n").unwrap_err();
        assert_eq!((err.line, err.column), (2, 1));

        let err = Scenario::parse("r = 10\nr = 11\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("duplicate"));

        let err = Scenario::parse("r 10\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));

        let base = "r = 10\nc = 1\nk = 0\nb = 1\nlambda = 1\n";
        let err = Scenario::parse(&format!(
            "{base}contract.kind = wholesale\ncontract.w = 2\ncontract.rho = 3\n"
        ))
        .unwrap_err();
        assert_eq!(err.line, 8);
        let err = Scenario::parse(&format!(
            "{base}contract.kind = lump_sum\ncontract.directive = coordinate\ncontract.w = 1\n"
        ))
        .unwrap_err();
        assert!(err.message.contains("directive"));
        let err = Scenario::parse(&format!(
            "{base}demand.kind = erlang\ncontract.kind = wholesale\ncontract.w = 2\n"
        ))
        .unwrap_err();
        assert!(err.message.contains("demand.n"));
    }

    #[test]
    fn fatal_validation_is_reported() {
        let s = Scenario::parse("r = 1\nc = 1\nk = 0\nb = 1\nlambda = 1\ncontract.kind = wholesale\ncontract.w = 1\n")
            .unwrap();
        assert!(run_scenario(&s).is_err());
    }

    #[test]
    fn warnings_are_echoed() {
        let s = Scenario::parse(
            "r = 3\nc = 1\nk = 1\nb = 2\nlambda = 1\ncontract.kind = wholesale\ncontract.directive = optimize\n",
        )
        .unwrap();
        let rep = run_scenario(&s).unwrap();
        assert!(!rep.warnings.is_empty());
        assert!(rep.render().contains("warning"));
    }

    fn scenario_strategy() -> impl Strategy<Value = Scenario> {
        let market = (
            0.0f64..1e6,
            0.01f64..10.0,
            0.0f64..5.0,
            0.0f64..100.0,
            0.001f64..10.0,
            0.01f64..0.99,
            0.0f64..10.0,
        )
            .prop_map(|(r, c, k, b, lam, delta, z)| {
                MarketParams::new(r, c, k, b, lam)
                    .with_discount(delta)
                    .with_reservation(z)
            });
        let shape = prop_oneof![Just(None), (1u32..8).prop_map(Some)];
        let contract = prop_oneof![
            (0.0f64..100.0).prop_map(|w| ContractSpec::Terms(ContractTerms::Wholesale { w })),
            (0.0f64..100.0, 0.0f64..1e9)
                .prop_map(|(w, rho)| ContractSpec::Terms(ContractTerms::LumpSumPenalty { w, rho })),
            (0.0f64..100.0, 0.0f64..1e3)
                .prop_map(|(w, rho1)| ContractSpec::Terms(ContractTerms::UnitPenalty { w, rho1 })),
            (0.0f64..100.0).prop_map(|w| ContractSpec::Terms(ContractTerms::Renewal {
                w,
                mode: RenewalMode::Endogenous
            })),
            (0.0f64..100.0, 0.0f64..1.0).prop_map(|(w, q)| ContractSpec::Terms(ContractTerms::Renewal {
                w,
                mode: RenewalMode::ExogenousProb(q)
            })),
            Just(ContractSpec::Directive {
                kind: ContractKind::LumpSum,
                directive: Directive::Coordinate,
                mode: RenewalMode::Endogenous
            }),
            (0.0f64..1.0).prop_map(|q| ContractSpec::Directive {
                kind: ContractKind::Renewal,
                directive: Directive::Optimize,
                mode: RenewalMode::ExogenousProb(q)
            }),
        ];
        let sim = prop_oneof![
            Just(None),
            (any::<u64>(), 1usize..1_000_000, 1usize..5000).prop_map(Some)
        ];
        (market, shape, contract, sim).prop_map(|(market, shape, contract, sim)| Scenario {
            demand: match shape {
                None => market.exponential_demand(),
                Some(n) => market.erlang_demand(n),
            },
            sim: sim.map(|(seed, reps, cap)| SimConfig {
                seed,
                replications: reps,
                discount: market.discount,
                horizon_cap: cap,
            }),
            market,
            contract,
        })
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(s in scenario_strategy()) {
            let text = s.to_text();
            let back = Scenario::parse(&text).unwrap();
            prop_assert_eq!(back, s);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
