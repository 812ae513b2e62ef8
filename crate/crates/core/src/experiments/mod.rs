//! Scenario files, the factorial harness and figure data, all emitting CSV.

mod factorial;
mod figures;
mod scenario;

pub use factorial::{
    run_factorial, Axis, ExperimentGrid, FactorialResult, FactorialRow, GridError, Metric, SummaryRow,
};
pub use figures::{emit_figure_data, FigureData, FigureId, UnknownFigure};
pub use scenario::{
    run_scenario, ContractKind, ContractSpec, Directive, ParseError, Scenario, ScenarioReport, DEFAULT_SIM_REPLICATIONS,
};

/// Significant digits of every float written to CSV.
pub const CSV_DIGITS: usize = 12;

/// Formats `v` like C's `%.12g`: shortest of fixed or exponent notation,
/// trailing zeros removed, `.` as decimal separator.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", CSV_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= CSV_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs());
    }
    let decimals = (CSV_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header plus string records, written through the `csv` crate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| format_float(*v)).collect());
    }

    pub fn write<W: std::io::Write>(&self, out: W, with_header: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if with_header {
            w.write_record(&self.headers)?;
        }
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, true).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Reads CSV text back; every cell is kept as a string.
    pub fn parse(text: &str) -> csv::Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<csv::Result<_>>()?;
        Ok(Self { headers, rows })
    }

    /// Numeric view of one column; non-numeric cells become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|row| row.get(i).and_then(|s| s.parse().ok()))
                .collect(),
        )
    }
}
