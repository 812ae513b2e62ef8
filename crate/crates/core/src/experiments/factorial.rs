//! Full-factorial comparison of the OEM-optimal and the coordinating wholesale
//! price under endogenous renewal.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{format_float, CsvTable};
use crate::model::MarketParams;
use crate::multi_gen::{optimal_wholesale_endogenous, EndogenousComparison};

pub const DEFAULT_CELL_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    RMinusK,
    C,
    K,
    B,
    Lambda,
    Delta,
    N,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::RMinusK,
        Axis::C,
        Axis::K,
        Axis::B,
        Axis::Lambda,
        Axis::Delta,
        Axis::N,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::RMinusK => "r_minus_k",
            Axis::C => "c",
            Axis::K => "k",
            Axis::B => "b",
            Axis::Lambda => "lambda",
            Axis::Delta => "delta",
            Axis::N => "n",
        }
    }

    /// Value used when the grid does not vary this axis.
    pub fn default_value(self) -> f64 {
        match self {
            Axis::RMinusK => 10.0,
            Axis::C => 1.0,
            Axis::K => 0.0,
            Axis::B => 1.0,
            Axis::Lambda => 1.0,
            Axis::Delta => 0.9,
            Axis::N => 1.0,
        }
    }
}

impl FromStr for Axis {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| GridError::UnknownAxis(s.to_string()))
    }
}

/// Column groups a factorial run can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Prices,
    Profits,
    ProfitDifference,
    Durations,
    Fractions,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Prices,
        Metric::Profits,
        Metric::ProfitDifference,
        Metric::Durations,
        Metric::Fractions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Prices => "prices",
            Metric::Profits => "profits",
            Metric::ProfitDifference => "profit_difference",
            Metric::Durations => "durations",
            Metric::Fractions => "fractions",
        }
    }

    fn columns(self) -> &'static [&'static str] {
        match self {
            Metric::Prices => &["w_opt", "w_coord"],
            Metric::Profits => &["oem_profit_opt", "oem_profit_coord"],
            Metric::ProfitDifference => &["profit_difference_pct"],
            Metric::Durations => &["duration_opt", "duration_coord"],
            Metric::Fractions => &["oem_fraction_opt", "oem_fraction_coord"],
        }
    }
}

impl FromStr for Metric {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GridError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("axis `{0}` listed twice")]
    DuplicateAxis(&'static str),
    #[error("axis `{0}` has no values")]
    EmptyAxis(&'static str),
    #[error("axis `n` needs positive integers, got {0}")]
    InvalidShape(f64),
    #[error("grid has {cells} cells, above the cap of {cap}")]
    TooLarge { cells: usize, cap: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub axes: Vec<(Axis, Vec<f64>)>,
    pub metrics: Vec<Metric>,
    pub cap: usize,
}

impl ExperimentGrid {
    pub fn new(axes: Vec<(Axis, Vec<f64>)>) -> Self {
        Self {
            axes,
            metrics: Metric::ALL.to_vec(),
            cap: DEFAULT_CELL_CAP,
        }
    }

    /// The 54-cell design: `c = 1, k = 0`, three margins, two base demands,
    /// three tail rates and three discount factors.
    pub fn table1() -> Self {
        Self::new(vec![
            (Axis::RMinusK, vec![5.0, 10.0, 20.0]),
            (Axis::B, vec![0.0, 1.0]),
            (Axis::Lambda, vec![0.1, 0.5, 1.0]),
            (Axis::Delta, vec![0.85, 0.9, 0.95]),
        ])
    }

    /// Reads `axis = v1, v2, ...` lines plus optional `metrics = ...` and
    /// `cap = ...`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut axes = Vec::new();
        let mut metrics = None;
        let mut cap = DEFAULT_CELL_CAP;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |message: String| GridError::Syntax { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let items = value.split(',').map(str::trim).filter(|s| !s.is_empty());
            match key {
                "metrics" => metrics = Some(items.map(str::parse).collect::<Result<Vec<Metric>, _>>()?),
                "cap" => {
                    cap = value
                        .parse()
                        .map_err(|_| syntax(format!("cap expects an integer, got `{value}`")))?
                }
                _ => {
                    let axis: Axis = key.parse()?;
                    let values = items
                        .map(|s| s.parse::<f64>().map_err(|_| syntax(format!("`{s}` is not a number"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    axes.push((axis, values));
                }
            }
        }
        let mut grid = Self::new(axes);
        if let Some(m) = metrics {
            grid.metrics = m;
        }
        grid.cap = cap;
        grid.validate()?;
        Ok(grid)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (axis, values) in &self.axes {
            let list: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{} = {}", axis.name(), list.join(", "));
        }
        let names: Vec<&str> = self.metrics.iter().map(|m| m.name()).collect();
        let _ = writeln!(s, "metrics = {}\ncap = {}", names.join(", "), self.cap);
        s
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let mut seen = Vec::new();
        for (axis, values) in &self.axes {
            if seen.contains(axis) {
                return Err(GridError::DuplicateAxis(axis.name()));
            }
            seen.push(*axis);
            if values.is_empty() {
                return Err(GridError::EmptyAxis(axis.name()));
            }
            if *axis == Axis::N {
                if let Some(&bad) = values.iter().find(|v| !(**v >= 1.0 && v.fract() == 0.0)) {
                    return Err(GridError::InvalidShape(bad));
                }
            }
        }
        let cells = self.cell_count();
        if cells > self.cap {
            return Err(GridError::TooLarge { cells, cap: self.cap });
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes
            .iter()
            .map(|(_, v)| v.len())
            .fold(1usize, |acc, n| acc.saturating_mul(n))
    }

    fn value_of(&self, axis: Axis, cell: usize) -> f64 {
        // first axis varies slowest
        let mut stride = 1;
        for (a, values) in self.axes.iter().rev() {
            if *a == axis {
                return values[(cell / stride) % values.len()];
            }
            stride *= values.len();
        }
        axis.default_value()
    }

    /// Parameter values of cell `index`, in `Axis::ALL` order.
    pub fn cell(&self, index: usize) -> [f64; 7] {
        Axis::ALL.map(|a| self.value_of(a, index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialRow {
    pub index: usize,
    pub params: [f64; 7],
    pub comparison: Option<EndogenousComparison>,
    pub error: Option<String>,
}

impl FactorialRow {
    pub fn param(&self, axis: Axis) -> f64 {
        self.params[Axis::ALL.iter().position(|a| *a == axis).expect("axis listed")]
    }

    fn metric_values(&self, metric: Metric) -> Vec<f64> {
        let Some(c) = &self.comparison else {
            return vec![f64::NAN; metric.columns().len()];
        };
        match metric {
            Metric::Prices => vec![c.optimal.wholesale, c.coordinated.wholesale],
            Metric::Profits => vec![c.optimal.oem_profit, c.coordinated.oem_profit],
            Metric::ProfitDifference => vec![c.profit_difference_pct],
            Metric::Durations => vec![c.optimal.expected_generations, c.coordinated.expected_generations],
            Metric::Fractions => vec![c.optimal.oem_fraction, c.coordinated.oem_fraction],
        }
    }
}

/// Aggregates over the cells sharing one axis value, or over all cells when
/// `value` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: Option<Axis>,
    pub value: Option<f64>,
    pub cells: usize,
    pub errors: usize,
    pub pct_mean: f64,
    pub pct_max: f64,
    pub pct_min: f64,
    pub oem_profit_opt_mean: f64,
    pub oem_profit_coord_mean: f64,
    pub duration_opt_mean: f64,
    pub duration_coord_mean: f64,
}

impl SummaryRow {
    fn from_rows<'a>(axis: Option<Axis>, value: Option<f64>, rows: impl Iterator<Item = &'a FactorialRow>) -> Self {
        let mut cells = 0;
        let mut ok: Vec<&EndogenousComparison> = Vec::new();
        for r in rows {
            cells += 1;
            if let Some(c) = &r.comparison {
                ok.push(c);
            }
        }
        let mean = |f: &dyn Fn(&EndogenousComparison) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|c| f(c)).sum::<f64>() / ok.len() as f64
            }
        };
        let pct = ok.iter().map(|c| c.profit_difference_pct);
        Self {
            axis,
            value,
            cells,
            errors: cells - ok.len(),
            pct_mean: mean(&|c| c.profit_difference_pct),
            pct_max: pct.clone().fold(f64::NAN, f64::max),
            pct_min: pct.fold(f64::NAN, f64::min),
            oem_profit_opt_mean: mean(&|c| c.optimal.oem_profit),
            oem_profit_coord_mean: mean(&|c| c.coordinated.oem_profit),
            duration_opt_mean: mean(&|c| c.optimal.expected_generations),
            duration_coord_mean: mean(&|c| c.coordinated.expected_generations),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialResult {
    pub grid: ExperimentGrid,
    pub rows: Vec<FactorialRow>,
    /// One block per grid axis in grid order, then the overall row.
    pub summary: Vec<SummaryRow>,
}

impl FactorialResult {
    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn overall(&self) -> &SummaryRow {
        self.summary.last().expect("summary always has the overall row")
    }

    /// One row per cell: index, all parameters, requested metrics, error.
    pub fn rows_csv(&self) -> CsvTable {
        let mut headers = vec!["cell".to_string()];
        headers.extend(Axis::ALL.iter().map(|a| a.name().to_string()));
        for m in &self.grid.metrics {
            headers.extend(m.columns().iter().map(|c| c.to_string()));
        }
        headers.push("error".into());
        let mut t = CsvTable::new(headers);
        for row in &self.rows {
            let mut rec = vec![row.index.to_string()];
            rec.extend(row.params.iter().map(|v| format_float(*v)));
            for m in &self.grid.metrics {
                rec.extend(row.metric_values(*m).iter().map(|v| format_float(*v)));
            }
            rec.push(row.error.clone().unwrap_or_default());
            t.rows.push(rec);
        }
        t
    }

    pub fn summary_csv(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "axis",
            "value",
            "cells",
            "errors",
            "pct_difference_mean",
            "pct_difference_max",
            "pct_difference_min",
            "oem_profit_opt_mean",
            "oem_profit_coord_mean",
            "duration_opt_mean",
            "duration_coord_mean",
        ]);
        for s in &self.summary {
            let mut rec = vec![
                s.axis.map_or("overall", Axis::name).to_string(),
                s.value.map(format_float).unwrap_or_default(),
                s.cells.to_string(),
                s.errors.to_string(),
            ];
            rec.extend(
                [
                    s.pct_mean,
                    s.pct_max,
                    s.pct_min,
                    s.oem_profit_opt_mean,
                    s.oem_profit_coord_mean,
                    s.duration_opt_mean,
                    s.duration_coord_mean,
                ]
                .iter()
                .map(|v| format_float(*v)),
            );
            t.rows.push(rec);
        }
        t
    }

    /// Plain-text summary laid out like the published factorial table.
    pub fn render_summary(&self) -> String {
        let mut s = format!(
            "{:<18} {:>8} {:>8} {:>8}   {:>10} {:>10}   {:>8} {:>8}\n",
            "", "avg %", "max %", "min %", "profit opt", "profit crd", "dur opt", "dur crd"
        );
        for r in &self.summary {
            let label = match (r.axis, r.value) {
                (Some(a), Some(v)) => format!("{} = {}", a.name(), format_float(v)),
                _ => "overall".to_string(),
            };
            let _ = writeln!(
                s,
                "{label:<18} {:>8.2} {:>8.2} {:>8.2}   {:>10.2} {:>10.2}   {:>8.2} {:>8.2}",
                r.pct_mean,
                r.pct_max,
                r.pct_min,
                r.oem_profit_opt_mean,
                r.oem_profit_coord_mean,
                r.duration_opt_mean,
                r.duration_coord_mean
            );
        }
        if self.error_count() > 0 {
            let _ = writeln!(s, "{} of {} cells failed", self.error_count(), self.rows.len());
        }
        s
    }
}

fn evaluate_cell(params: [f64; 7]) -> Result<EndogenousComparison, String> {
    let [r_minus_k, c, k, b, lambda, delta, n] = params;
    let p = MarketParams::new(k + r_minus_k, c, k, b, lambda).with_discount(delta);
    let d = if n == 1.0 {
        p.exponential_demand()
    } else {
        p.erlang_demand(n as u32)
    };
    optimal_wholesale_endogenous(&p, &d).map_err(|e| e.to_string())
}

/// Evaluates every cell in parallel; rows stay in cell order and a failing
/// cell only fills its `error` column.
pub fn run_factorial(grid: &ExperimentGrid) -> Result<FactorialResult, GridError> {
    grid.validate()?;
    let rows: Vec<FactorialRow> = (0..grid.cell_count())
        .into_par_iter()
        .map(|index| {
            let params = grid.cell(index);
            let (comparison, error) = match evaluate_cell(params) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e)),
            };
            FactorialRow {
                index,
                params,
                comparison,
                error,
            }
        })
        .collect();

    let mut summary = Vec::new();
    for (axis, values) in &grid.axes {
        for v in values {
            let matching = rows.iter().filter(|r| r.param(*axis) == *v);
            summary.push(SummaryRow::from_rows(Some(*axis), Some(*v), matching));
        }
    }
    summary.push(SummaryRow::from_rows(None, None, rows.iter()));
    Ok(FactorialResult {
        grid: grid.clone(),
        rows,
        summary,
    })
}
