//! Data series behind the published figures, one CSV per figure.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use super::CsvTable;
use crate::model::{DemandModel, MarketParams};
use crate::multi_gen::{coordinated_renewal_report, coordinating_wholesale, supplier_best_response_endogenous};
use crate::single_gen::{oem_optimal_wholesale, supplier_best_response_wholesale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    /// Efficiency of the OEM-optimal wholesale contract against `(r-k)/c`.
    EffWholesale,
    /// Exogenous versus endogenous-renewal capacity against `w`.
    CapacityCompare,
    /// Coordinating renewal price against `(r-k)/c`.
    CoordPrice,
    /// OEM share of the first-best NPV, exponential tail.
    NpvFraction,
    /// OEM share of the first-best NPV, Erlang tails.
    ErlangFraction,
    /// OEM share of the first-best NPV, Erlang-3 tail, several discount factors.
    ErlangDelta,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::EffWholesale,
        FigureId::CapacityCompare,
        FigureId::CoordPrice,
        FigureId::NpvFraction,
        FigureId::ErlangFraction,
        FigureId::ErlangDelta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::EffWholesale => "eff_wholesale",
            FigureId::CapacityCompare => "capacity_compare",
            FigureId::CoordPrice => "coord_price",
            FigureId::NpvFraction => "npv_fraction",
            FigureId::ErlangFraction => "erlang_fraction",
            FigureId::ErlangDelta => "erlang_delta",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown figure `{0}`")]
pub struct UnknownFigure(pub String);

impl FromStr for FigureId {
    type Err = UnknownFigure;

    fn from_str(s: &str) -> Result<Self, UnknownFigure> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFigure(s.to_string()))
    }
}

/// An x-axis column followed by one column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub figure: FigureId,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureData {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(self.headers.clone());
        for row in &self.rows {
            t.push_numbers(row);
        }
        t
    }
}

/// `(r-k)/c` from 2 to 50 in steps of 0.5.
fn margin_ratios() -> Vec<f64> {
    (0..=96).map(|i| 2.0 + 0.5 * i as f64).collect()
}

/// Header-safe rendering of a parameter value: `0.9` becomes `0_9`.
fn tag(v: f64) -> String {
    format!("{v}").replace('.', "_").replace('-', "m")
}

/// `c = 1, k = 0` market with the given margin ratio.
fn unit_market(ratio: f64, b: f64, lambda: f64, delta: f64) -> MarketParams {
    MarketParams::new(ratio, 1.0, 0.0, b, lambda).with_discount(delta)
}

struct Series {
    header: String,
    eval: Box<dyn Fn(f64) -> f64 + Sync>,
}

fn tabulate(figure: FigureId, x_name: &str, xs: Vec<f64>, series: Vec<Series>) -> FigureData {
    let mut headers = vec![x_name.to_string()];
    headers.extend(series.iter().map(|s| s.header.clone()));
    let rows = xs
        .into_par_iter()
        .map(|x| {
            let mut row = vec![x];
            row.extend(series.iter().map(|s| (s.eval)(x)));
            row
        })
        .collect();
    FigureData { figure, headers, rows }
}

fn fraction_series(b: f64, delta: f64, shape: u32, header: String) -> Series {
    Series {
        header,
        eval: Box::new(move |ratio| {
            let p = unit_market(ratio, b, 1.0, delta);
            let d = demand(&p, shape);
            coordinated_renewal_report(&p, &d).map_or(f64::NAN, |a| a.oem_fraction)
        }),
    }
}

fn demand(p: &MarketParams, shape: u32) -> DemandModel {
    if shape == 1 {
        p.exponential_demand()
    } else {
        p.erlang_demand(shape)
    }
}

pub const EFF_INV_LAMBDA: [f64; 3] = [1.0, 2.0, 10.0];
pub const COORD_DELTAS: [f64; 3] = [0.3, 0.6, 0.9];
pub const FRACTION_BASES: [f64; 3] = [0.0, 1.0, 5.0];
pub const FRACTION_DELTAS: [f64; 3] = [0.5, 0.7, 0.9];
pub const ERLANG_SHAPES: [u32; 4] = [1, 2, 3, 5];

pub fn emit_figure_data(figure: FigureId) -> FigureData {
    match figure {
        FigureId::EffWholesale => {
            let series = EFF_INV_LAMBDA
                .iter()
                .map(|&mean| Series {
                    header: format!("efficiency_inv_lambda_{}", tag(mean)),
                    eval: Box::new(move |ratio| {
                        let p = unit_market(ratio, 1.0, 1.0 / mean, 0.9);
                        oem_optimal_wholesale(&p, &p.exponential_demand()).map_or(f64::NAN, |s| s.report.efficiency)
                    }),
                })
                .collect();
            tabulate(figure, "margin_ratio", margin_ratios(), series)
        }
        FigureId::CapacityCompare => {
            let p = MarketParams::new(11.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9);
            let ws = (0..=90).map(|i| 1.0 + 0.1 * i as f64).collect();
            let series = vec![
                Series {
                    header: "capacity_exogenous".into(),
                    eval: Box::new(move |w| supplier_best_response_wholesale(&p, &p.exponential_demand(), w)),
                },
                Series {
                    header: "capacity_endogenous".into(),
                    eval: Box::new(move |w| {
                        supplier_best_response_endogenous(&p, &p.exponential_demand(), w).unwrap_or(f64::NAN)
                    }),
                },
            ];
            tabulate(figure, "wholesale", ws, series)
        }
        FigureId::CoordPrice => {
            let series = COORD_DELTAS
                .iter()
                .map(|&delta| Series {
                    header: format!("w_coord_delta_{}", tag(delta)),
                    eval: Box::new(move |ratio| {
                        let p = unit_market(ratio, 1.0, 1.0, delta);
                        coordinating_wholesale(&p, &p.exponential_demand()).unwrap_or(f64::NAN)
                    }),
                })
                .collect();
            tabulate(figure, "margin_ratio", margin_ratios(), series)
        }
        FigureId::NpvFraction => {
            let mut series = Vec::new();
            for &delta in &FRACTION_DELTAS {
                for &b in &FRACTION_BASES {
                    series.push(fraction_series(
                        b,
                        delta,
                        1,
                        format!("oem_fraction_b_{}_delta_{}", tag(b), tag(delta)),
                    ));
                }
            }
            tabulate(figure, "margin_ratio", margin_ratios(), series)
        }
        FigureId::ErlangFraction => {
            let mut series = Vec::new();
            for &b in &FRACTION_BASES {
                for &n in &ERLANG_SHAPES {
                    series.push(fraction_series(b, 0.9, n, format!("oem_fraction_b_{}_n_{n}", tag(b))));
                }
            }
            tabulate(figure, "margin_ratio", margin_ratios(), series)
        }
        FigureId::ErlangDelta => {
            let series = FRACTION_DELTAS
                .iter()
                .map(|&delta| fraction_series(1.0, delta, 3, format!("oem_fraction_delta_{}", tag(delta))))
                .collect();
            tabulate(figure, "margin_ratio", margin_ratios(), series)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_gen::{centralized_optimum, oem_profit, supplier_profit};

    #[test]
    fn names_round_trip() {
        for f in FigureId::ALL {
            assert_eq!(f.name().parse::<FigureId>().unwrap(), f);
        }
        assert_eq!("fig9".parse::<FigureId>(), Err(UnknownFigure("fig9".into())));
    }

    #[test]
    fn efficiency_point_matches_closed_forms() {
        let data = emit_figure_data(FigureId::EffWholesale);
        let eff = data.column("efficiency_inv_lambda_1").unwrap()[0];
        assert_eq!(data.rows[0][0], 2.0);
        // b = 1, λ = 1, r - k = 2 = (bλ + 1)c: w̃ = k + sqrt((r-k)c/(bλ+1)) = 1
        let p = unit_market(2.0, 1.0, 1.0, 0.9);
        let d = p.exponential_demand();
        let w = 1.0;
        let x = 1.0 + ((w - 0.0) / 1.0f64).ln();
        let expected =
            (supplier_profit(&p, &d, w, x) + oem_profit(&p, &d, w, x)) / centralized_optimum(&p, &d).unwrap().profit;
        assert!((eff - expected).abs() < 1e-6, "{eff} vs {expected}");
    }

    #[test]
    fn capacity_series_are_ordered() {
        let data = emit_figure_data(FigureId::CapacityCompare);
        let exo = data.column("capacity_exogenous").unwrap();
        let endo = data.column("capacity_endogenous").unwrap();
        assert!(exo.iter().zip(&endo).all(|(a, b)| b >= a));
        assert!(exo.iter().zip(&endo).skip(1).all(|(a, b)| b > a));
    }

    #[test]
    fn zero_base_fraction_tends_to_delta() {
        let data = emit_figure_data(FigureId::NpvFraction);
        let col = data.column("oem_fraction_b_0_delta_0_9").unwrap();
        let last = *col.last().unwrap();
        assert!((last - 0.9).abs() < (col[0] - 0.9).abs());
        assert!(last < 0.9);
    }

    #[test]
    fn erlang_one_column_matches_exponential() {
        let erl = emit_figure_data(FigureId::ErlangFraction);
        let exp = emit_figure_data(FigureId::NpvFraction);
        let a = erl.column("oem_fraction_b_1_n_1").unwrap();
        let b = exp.column("oem_fraction_b_1_delta_0_9").unwrap();
        assert_eq!(a, b);
        assert!(erl
            .column("oem_fraction_b_5_n_5")
            .unwrap()
            .iter()
            .all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn csv_round_trips() {
        let data = emit_figure_data(FigureId::CoordPrice);
        let text = data.to_csv().to_csv_string();
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back.headers, data.headers);
        let reparsed: Vec<f64> = back
            .column("w_coord_delta_0_6")
            .unwrap()
            .into_iter()
            .map(Option::unwrap)
            .collect();
        let original = data.column("w_coord_delta_0_6").unwrap();
        assert!(reparsed.iter().zip(&original).all(|(a, b)| ((a - b) / b).abs() < 1e-11));
        assert_eq!(emit_figure_data(FigureId::CoordPrice).to_csv().to_csv_string(), text);
    }
}
