use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use sha2::{Digest, Sha256};
use singular_lp::simplex::{export_mps, parse_mps};
use singular_lp_cli::{run, CliError, Mode, RunConfig};

const BIN: &str = env!("CARGO_BIN_EXE_singular-lp");

const TINY_BUDGET: &str = r#"
name = "tiny budget"
x_lo = -2.0
x_hi = 2.0
u_lo = -1.0
u_hi = 1.0
drift = { kind = "constant", value = 0.0 }
diffusion = { kind = "constant", value = 1.0 }
singular = "gradient"
singular_fn = { kind = "linear", u = 1.0 }
c0 = { kind = "quadratic", xx = 1.0 }
c1 = { kind = "constant", value = 0.0 }
criterion = "discounted"
alpha = 1.0
nu0 = [[0.5, 1.0]]

[[budget]]
name = "running"
g = { kind = "constant", value = 1.0 }
h = { kind = "constant", value = 1.0 }
bound = 1e-6
"#;

fn small(problem: &str, mode: Mode, out: &Path) -> RunConfig {
    RunConfig { n_state: 41, n_control: 11, ..RunConfig::new(problem, mode, out) }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn exported_mps_reparses_identically() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&small("inventory", Mode::ExportMps, dir.path())).unwrap();
    assert_eq!(outcome.artifacts, vec![dir.path().join("problem.mps")]);
    let text = fs::read_to_string(dir.path().join("problem.mps")).unwrap();
    let (lp, name) = parse_mps(&text).unwrap();
    assert_eq!(name, "inventory");
    assert_eq!(export_mps(&lp, &name), text);
    assert_eq!(lp.n_mu0, 41 * 11);
}

#[test]
fn tiny_budget_exits_infeasible_with_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("tiny.toml");
    fs::write(&problem, TINY_BUDGET).unwrap();
    let out = dir.path().join("out");
    let output = Command::new(BIN)
        .args(["--problem", problem.to_str().unwrap(), "--mode", "solve", "--n-state", "21", "--n-control", "5"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error code=2 kind=infeasible message="), "{stderr}");

    let certificate = fs::read_to_string(out.join("farkas.csv")).unwrap();
    let multipliers: Vec<(String, f64)> = certificate
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    assert!(multipliers.iter().any(|(_, v)| *v != 0.0));
    let max = multipliers.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    assert!((max - 1.0).abs() < 1e-12);
    let budget = multipliers.iter().find(|(l, _)| l.starts_with("BUD")).expect("budget row in certificate");
    assert!(budget.1 <= 0.0);
    assert_eq!(read_json(&out.join("solution.json"))["status"], "Infeasible");
}

#[test]
fn free_cancelling_pushes_exit_unbounded() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("free.toml");
    let text = TINY_BUDGET.replace("value = 0.0 }\ncriterion", "value = -1.0 }\ncriterion");
    let text = &text[..text.find("[[budget]]").unwrap()];
    fs::write(&problem, text).unwrap();
    let err = run(&small(problem.to_str().unwrap(), Mode::Solve, &dir.path().join("out"))).unwrap_err();
    assert!(matches!(err, CliError::Unbounded), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn negative_running_cost_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("neg.toml");
    fs::write(&problem, TINY_BUDGET.replace("c0 = { kind = \"quadratic\", xx = 1.0 }", "c0 = { kind = \"constant\", value = -1.0 }"))
        .unwrap();
    let out = dir.path().join("out");
    let err = run(&small(problem.to_str().unwrap(), Mode::Validate, &out)).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    assert_eq!(read_json(&out.join("validation.json"))["passed"], false);
}

#[test]
fn bad_invocations_exit_with_code_four_and_one_line() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--problem", "no-such-problem", "--mode", "solve"],
        vec!["--problem", "inventory", "--mode", "sideways"],
        vec!["--problem", "inventory", "--mode", "solve", "--tol", "1e-3"],
    ] {
        let output = Command::new(BIN).args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(output.status.code(), Some(4), "{args:?}");
        let stderr = String::from_utf8(output.stderr).unwrap();
        assert_eq!(stderr.lines().count(), 1, "{stderr}");
        assert!(stderr.starts_with("error code=4 kind="));
    }
}

#[test]
fn report_joins_lp_simulation_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        n_state: 61,
        n_control: 21,
        paths: 100,
        horizon: 40.0,
        burn_in: 5.0,
        dt: 2e-3,
        cycles: 800,
        s_grid: "-1.4:-0.8:0.2".parse().unwrap(),
        big_s_grid: "0.4:1.2:0.2".parse().unwrap(),
        seed: 3,
        ..RunConfig::new("inventory", Mode::Report, dir.path())
    };
    run(&cfg).unwrap();
    let report = read_json(&dir.path().join("report.json"));
    let lp = report["lp_objective"].as_f64().unwrap();
    let sim = report["simulated_cost"][0].as_f64().unwrap();
    let band = report["band_cost"][0].as_f64().unwrap();
    assert!(lp > 1.7 && lp < 2.0, "{lp}");
    assert!((sim - lp).abs() < 0.1 && (band - lp).abs() < 0.1);
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for expected in ["adjoint_exactness", "martingale_residuals", "lp_vs_simulation", "stationarity", "lp_vs_band_oracle", "simulation_vs_band_oracle"] {
        assert!(names.contains(&expected), "{names:?}");
    }
    assert_eq!(report["config"]["mode"], "report");
    assert_eq!(report["config"]["cycles"], 800);
}

#[test]
fn reports_embed_config_and_problem_hash() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("tiny.toml");
    let text = TINY_BUDGET.replace("bound = 1e-6", "bound = 5.0");
    fs::write(&problem, &text).unwrap();
    let out = dir.path().join("out");
    run(&small(problem.to_str().unwrap(), Mode::Solve, &out)).unwrap();
    let solution = read_json(&out.join("solution.json"));
    let digest: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(solution["problem"]["sha256"], digest.as_str());
    assert_eq!(solution["config"]["problem"], problem.to_str().unwrap());
    assert_eq!(solution["config"]["n_state"], 41);
    assert_eq!(solution["status"], "Optimal");
    assert!(solution["residuals"]["equality"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { paths: 20, horizon: 0.0, dt: 2e-3, ..small("finite-fuel", Mode::Verify, dir.path()) };
    run(&cfg).unwrap();
    let first = snapshot(dir.path());
    run(&cfg).unwrap();
    assert_eq!(first, snapshot(dir.path()));
    assert!(first.iter().any(|(name, _)| name == "verification.json"));
}

#[test]
fn band_oracle_mode_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        cycles: 200,
        s_grid: "-1.2:-0.8:0.2".parse().unwrap(),
        big_s_grid: "0.6:1.0:0.2".parse().unwrap(),
        ..RunConfig::new("inventory", Mode::BandOracle, dir.path())
    };
    run(&cfg).unwrap();
    let table = fs::read_to_string(dir.path().join("band_search.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 9);
    let discounted = RunConfig { alpha: Some(0.5), ..cfg };
    assert_eq!(run(&discounted).unwrap_err().exit_code(), 4);
}
