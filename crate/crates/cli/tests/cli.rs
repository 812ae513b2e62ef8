use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contractlab"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn field(report: &str, name: &str) -> f64 {
    report
        .lines()
        .find_map(|l| {
            let mut parts = l.split_whitespace();
            (parts.next() == Some(name)).then(|| parts.next().unwrap().parse().unwrap())
        })
        .unwrap_or_else(|| panic!("no field {name} in\n{report}"))
}

#[test]
fn penalty_scenario_report() {
    let o = run(&["penalty", scenario("lump_sum.scenario").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((field(&out, "w_hat") / 0.4e6 - 1.0).abs() < 0.02);
    assert!((field(&out, "rho_hat") / 959e6 - 1.0).abs() < 0.005);
    assert!((field(&out, "penalty_to_best_case_ratio") - 6.0).abs() < 0.2);
}

#[test]
fn renewal_coordinate_echoes_price_and_capacity() {
    let o = run(&["renewal", scenario("renewal_coordinate.scenario").to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    let w = (0.9 * (2.0 + 10f64.ln()) + 0.1 * 10.0) / 1.9;
    assert!((field(&out, "w") - w).abs() < 1e-9);
    assert!((field(&out, "capacity") - (1.0 + 10f64.ln())).abs() < 1e-9);
    assert!((field(&out, "expected_generations") - 10.0).abs() < 1e-9);
}

#[test]
fn wrong_subcommand_for_contract_kind() {
    let o = run(&["single", scenario("lump_sum.scenario").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lump_sum"));
}

#[test]
fn parse_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.scenario", "");
    let o = run(&["check", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1, column 1"), "{}", stderr(&o));

    let bad = write(dir.path(), "bad.scenario", "r = 10\nc = one\n");
    let o = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column 5"), "{}", stderr(&o));

    let o = run(&["check", dir.path().join("missing.scenario").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn warnings_and_strict_mode() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "thin.scenario",
        "r = 3\nc = 1\nk = 1\nb = 2\nlambda = 1\ncontract.kind = wholesale\ncontract.directive = optimize\n",
    );
    let o = run(&["check", s.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    let o = run(&["--strict", "check", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["single", s.to_str().unwrap(), "--strict"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fatal_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "dead.scenario",
        "r = 2\nc = 1\nk = 1\nb = 1\nlambda = 1\ncontract.kind = wholesale\ncontract.w = 1.5\n",
    );
    let o = run(&["single", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("capacity_cost"), "{}", stderr(&o));
}

#[test]
fn unsupported_tail_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "erlang_unit.scenario",
        "r = 10\nc = 1\nk = 0\nb = 1\nlambda = 1\ndemand.kind = erlang\ndemand.n = 2\ncontract.kind = unit_penalty\ncontract.directive = coordinate\n",
    );
    let o = run(&["penalty", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scenario_rows_append_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let s = scenario("renewal_coordinate.scenario");
    for _ in 0..2 {
        let o = run(&["renewal", s.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("first_best_capacity,w,capacity"));
    assert_eq!(lines[1], lines[2]);

    let o = run(&[
        "penalty",
        scenario("lump_sum.scenario").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("different columns"));
}

#[test]
fn simulate_is_reproducible() {
    let s = scenario("renewal_optimize.scenario");
    let a = run(&["simulate", s.to_str().unwrap(), "--seed", "11"]);
    let b = run(&["simulate", s.to_str().unwrap(), "--seed", "11"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let out = stdout(&a);
    let z = (field(&out, "sim_supplier_npv") - field(&out, "supplier_npv")).abs() / field(&out, "sim_supplier_npv_se");
    assert!(z < 3.0, "{out}");
    let c = run(&["simulate", s.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn simulate_adds_default_section() {
    let o = run(&[
        "simulate",
        scenario("wholesale.scenario").to_str().unwrap(),
        "--replications",
        "5000",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("sim_supplier_profit_se"));
}

#[test]
fn factorial_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    let o = run(&[
        "factorial",
        "--out",
        rows.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("overall"));
    let text = fs::read_to_string(&rows).unwrap();
    assert_eq!(text.lines().count(), 55);
    let first = fs::read_to_string(&summary).unwrap();
    let overall = first.lines().last().unwrap();
    assert!(overall.starts_with("overall,,54,0,"));

    let again = dir.path().join("rows2.csv");
    run(&[
        "factorial",
        "--grid",
        scenario("table1.grid").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&rows).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn factorial_partial_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write(
        dir.path(),
        "g.grid",
        "r_minus_k = 0.5, 5\nmetrics = profit_difference\n",
    );
    let o = run(&["factorial", "--grid", grid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "cell,r_minus_k,c,k,b,lambda,delta,n,profit_difference_pct,error"
    );
    assert!(lines[1].contains("no viable margin"), "{}", lines[1]);
    assert!(lines[2].ends_with(','));
}

#[test]
fn factorial_grid_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write(dir.path(), "g.grid", "b = 1, 2, 3\ndelta = 0.5, 0.9\ncap = 4\n");
    let o = run(&["factorial", "--grid", grid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cap"));
}

#[test]
fn figure_output_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = bin()
        .args(["figure", "npv_fraction", "--out", a.to_str().unwrap()])
        .env("CONTRACTLAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    bin()
        .args(["figure", "npv_fraction", "--out", b.to_str().unwrap()])
        .env("CONTRACTLAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("margin_ratio,oem_fraction_b_0_delta_0_5,"));
    assert_eq!(text.lines().count(), 98);
}

#[test]
fn unknown_figure_and_bad_thread_setting() {
    let o = run(&["figure", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eff_wholesale"));
    let o = bin()
        .args(["figure", "coord_price"])
        .env("CONTRACTLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
