use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use contractlab_core::experiments::{
    emit_figure_data, run_factorial, run_scenario, ContractKind, CsvTable, ExperimentGrid, FigureId, Scenario,
    ScenarioReport,
};
use contractlab_core::{validate_params, ContractError, ValidationResult};

const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

/// Supply-contract analytics: penalty and renewal contracts, factorial runs
/// and figure data.
#[derive(Debug, Parser)]
#[command(name = "contractlab", version)]
struct Cli {
    /// Write CSV output to this file. Scenario reports append one row.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for Monte-Carlo runs, overriding `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Treat assumption warnings as fatal.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Check { scenario: PathBuf },
    /// Evaluate a single-generation wholesale scenario.
    Single { scenario: PathBuf },
    /// Evaluate a lump-sum or per-unit penalty scenario.
    Penalty { scenario: PathBuf },
    /// Evaluate a multi-generation renewal scenario.
    Renewal { scenario: PathBuf },
    /// Run any scenario with a Monte-Carlo check next to the closed forms.
    Simulate {
        scenario: PathBuf,
        /// Number of replications when the scenario has no `sim.replications`.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Full-factorial comparison of the OEM-optimal and coordinating renewal prices.
    Factorial {
        /// Grid file with `axis = v1, v2, ...` lines; defaults to the 54-cell design.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Also write the per-axis summary as CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Emit the data behind one figure as CSV.
    Figure {
        #[arg(value_parser = parse_figure)]
        id: FigureId,
    },
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse().map_err(|e| {
        let names: Vec<&str> = FigureId::ALL.iter().map(|f| f.name()).collect();
        format!("{e}; expected one of {}", names.join(", "))
    })
}

/// Error carrying the process exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

impl From<ContractError> for Failure {
    fn from(e: ContractError) -> Self {
        let code = match e {
            ContractError::Solver(_) | ContractError::Domain(_) | ContractError::BracketFailure { .. } => EXIT_SOLVER,
            _ => EXIT_INPUT,
        };
        Self { code, error: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INPUT);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("CONTRACTLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("CONTRACTLAB_THREADS must be a non-negative integer, got `{value}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Check { scenario } => {
            let s = load_scenario(scenario)?;
            let warnings = check_validity(&s, cli.strict)?;
            println!(
                "{}: ok ({} warning{})",
                scenario.display(),
                warnings,
                if warnings == 1 { "" } else { "s" }
            );
            Ok(0)
        }
        Command::Single { scenario } => scenario_command(cli, scenario, &[ContractKind::Wholesale], None),
        Command::Penalty { scenario } => {
            scenario_command(cli, scenario, &[ContractKind::LumpSum, ContractKind::UnitPenalty], None)
        }
        Command::Renewal { scenario } => scenario_command(cli, scenario, &[ContractKind::Renewal], None),
        Command::Simulate { scenario, replications } => scenario_command(cli, scenario, &[], Some(*replications)),
        Command::Factorial { grid, summary } => factorial(cli, grid.as_deref(), summary.as_deref()),
        Command::Figure { id } => {
            let table = emit_figure_data(*id).to_csv();
            write_table(cli.out.as_deref(), &table)?;
            Ok(0)
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)?;
    Scenario::parse(&text).map_err(|e| Failure::input(anyhow!("{}: {e}", path.display())))
}

/// Prints warnings and returns how many there were.
fn check_validity(s: &Scenario, strict: bool) -> Result<usize, Failure> {
    match validate_params(&s.market) {
        ValidationResult::Fatal(name) => Err(Failure::input(anyhow!("invalid parameters: {name}"))),
        v => {
            for w in v.warnings() {
                eprintln!("warning: {w}");
            }
            if strict && !v.warnings().is_empty() {
                return Err(Failure::input(anyhow!("assumption warnings are fatal under --strict")));
            }
            Ok(v.warnings().len())
        }
    }
}

fn scenario_command(cli: &Cli, path: &Path, kinds: &[ContractKind], sim: Option<Option<usize>>) -> Result<u8, Failure> {
    let mut s = load_scenario(path)?;
    let kind = s.contract.kind();
    if !kinds.is_empty() && !kinds.contains(&kind) {
        let allowed: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
        return Err(Failure::input(anyhow!(
            "{}: contract.kind = {} but this command expects {}",
            path.display(),
            kind.name(),
            allowed.join(" or ")
        )));
    }
    if let Some(replications) = sim {
        let had_sim = s.sim.is_some();
        s = s.with_default_sim(cli.seed);
        if let (Some(n), false, Some(cfg)) = (replications, had_sim, s.sim.as_mut()) {
            cfg.replications = n.max(1);
        }
    } else if let (Some(seed), Some(cfg)) = (cli.seed, s.sim.as_mut()) {
        cfg.seed = seed;
    }
    check_validity(&s, cli.strict)?;
    let report = run_scenario(&s)?;
    print!("{}", render_without_warnings(&report));
    if let Some(out) = &cli.out {
        append_row(out, &report.to_csv()).map_err(Failure::from)?;
    }
    Ok(0)
}

/// Warnings were already printed to stderr by `check_validity`.
fn render_without_warnings(report: &ScenarioReport) -> String {
    let mut r = report.clone();
    r.warnings.clear();
    r.render()
}

fn append_row(path: &Path, table: &CsvTable) -> anyhow::Result<()> {
    let existing = fs::read_to_string(path).unwrap_or_default();
    let with_header = existing.trim().is_empty();
    if !with_header {
        let header = CsvTable::parse(&existing)
            .with_context(|| format!("reading {}", path.display()))?
            .headers;
        if header != table.headers {
            return Err(anyhow!("{} already holds rows with different columns", path.display()));
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    table.write(file, with_header)?;
    Ok(())
}

fn write_table(out: Option<&Path>, table: &CsvTable) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            table.write(file, true)?;
        }
        None => table.write(io::stdout().lock(), true)?,
    }
    Ok(())
}

fn factorial(cli: &Cli, grid: Option<&Path>, summary: Option<&Path>) -> Result<u8, Failure> {
    let grid = match grid {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::input)?;
            ExperimentGrid::parse(&text).map_err(|e| Failure::input(anyhow!("{}: {e}", path.display())))?
        }
        None => ExperimentGrid::table1(),
    };
    let result = run_factorial(&grid).map_err(Failure::input)?;
    write_table(cli.out.as_deref(), &result.rows_csv())?;
    if let Some(path) = summary {
        write_table(Some(path), &result.summary_csv())?;
    }
    // keep stdout clean for CSV when no output file is given
    let text = result.render_summary();
    if cli.out.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    io::stdout().flush().ok();
    Ok(if result.error_count() > 0 { EXIT_PARTIAL } else { 0 })
}
