use std::path::Path;
use std::process::{Command, Output};

use kpnn_cli::{validate, CliError, Experiment, ExperimentConfig};

fn kpnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpnn"))
        .args(args)
        .env_remove("KPNN_WORKERS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const PNN: &str = r#"
experiment = "pnn-count"
seed = 4
reps = 40
[grid]
n = [100.0, 400.0]
k = [1, 2, 3]
x0 = [[0.5, 0.5], [0.2, 0.7]]
"#;

const CLT: &str = r#"
experiment = "clt-rate"
seed = 9
reps = 150
[grid]
n = [200.0, 800.0]
k = [1, 2]
x0 = [[0.5, 0.5], [0.3, 0.6]]
[summary]
bootstrap = 20
"#;

#[test]
fn pnn_count_schema_and_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pnn.toml", PNN);
    let out = dir.path().join("out");
    let o = kpnn(&["run", &cfg, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, Experiment::PnnCount.columns());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 3 * 2);
    let mut cells: Vec<(String, String, String)> =
        rows.iter().map(|r| (r[0].to_owned(), r[1].to_owned(), r[2].to_owned())).collect();
    cells.sort();
    cells.dedup();
    assert_eq!(cells.len(), 12);
    for r in &rows {
        let mean_l: f64 = r[4].parse().unwrap();
        assert!(mean_l >= 1.0);
    }
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["experiment"], "pnn-count");
    assert_eq!(meta["seed"], 4);
    assert_eq!(meta["rows"], 12);
    assert!(meta["timestamp"].is_string() && meta["wall_time_s"].is_number());
}

#[test]
fn results_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "clt.toml", CLT);
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = kpnn(&["run", &cfg, "-o", out.to_str().unwrap(), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));
}

#[test]
fn workers_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pnn.toml", PNN);
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_kpnn"))
        .args(["run", &cfg, "-o", out.to_str().unwrap()])
        .env("KPNN_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["workers"], 2);
}

#[test]
fn set_overrides_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pnn.toml", PNN);
    let out = dir.path().join("out");
    let o = kpnn(&[
        "run",
        &cfg,
        "-o",
        out.to_str().unwrap(),
        "--set",
        "grid.k=[2]",
        "--set",
        "seed=11",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["rows"], 2 * 2);
}

#[test]
fn plot_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pnn.toml", &format!("plot = true\n{PNN}"));
    let out = dir.path().join("out");
    assert!(kpnn(&["run", &cfg, "-o", out.to_str().unwrap()]).status.success());
    let svg = std::fs::read_to_string(out.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn validate_rejects_six_components() {
    let dir = tempfile::tempdir().unwrap();
    let x0: Vec<String> = (0..6).map(|i| format!("[0.{}, 0.5]", i + 2)).collect();
    let text = CLT.replace("x0 = [[0.5, 0.5], [0.3, 0.6]]", &format!("x0 = [{}]", x0.join(", ")));
    let cfg = write(dir.path(), "six.toml", &text);
    let o = kpnn(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("error:") && stdout.contains('4'), "{stdout}");
    assert_eq!(kpnn(&["run", &cfg, "-o", dir.path().join("o").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn validate_warns_when_k_is_large() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        experiment = "lower-bound-fit"
        [grid]
        k = [2, 6]
        [lower_bound]
        n = 10.0
        "#,
        &[],
    )
    .unwrap();
    let report = validate(&cfg);
    assert!(!report.has_errors());
    assert!(report.warnings().any(|w| w.message.contains("k <= 2n")));
}

#[test]
fn well_formed_config_has_no_findings() {
    let cfg = ExperimentConfig::from_toml_str(CLT, &[]).unwrap();
    let report = validate(&cfg);
    assert!(report.findings.is_empty(), "{report}");
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "clt.toml", CLT);
    let o = kpnn(&["validate", &path]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("findings: none"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "experiment = \"clt-rate\"\nbogus = 1\n");
    assert_eq!(kpnn(&["run", &bad]).status.code(), Some(2));
    assert_eq!(kpnn(&["run", "/nonexistent/config.toml"]).status.code(), Some(4));
    assert_eq!(kpnn(&["frobnicate"]).status.code(), Some(2));
    let cfg = write(dir.path(), "pnn.toml", PNN);
    let blocker = write(dir.path(), "file", "");
    assert_eq!(kpnn(&["run", &cfg, "-o", &format!("{blocker}/out")]).status.code(), Some(4));
    let numerical: CliError = kpnn_core::Error::SingularCovariance { min_eigenvalue: 0.0 }.into();
    assert_eq!(numerical.exit_code(), 3);
    let quadrature: CliError = kpnn_core::Error::Quadrature("no convergence".into()).into();
    assert_eq!(quadrature.exit_code(), 3);
}

#[test]
fn list_experiments_names_every_experiment() {
    let o = kpnn(&["list-experiments"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for e in Experiment::ALL {
        assert!(text.contains(e.name()));
        assert!(text.contains(&e.columns().join(",")));
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path, &[]).unwrap();
            let report = validate(&cfg);
            assert!(!report.has_errors(), "{}: {report}", path.display());
            seen.push(cfg.experiment);
        }
    }
    for e in Experiment::ALL {
        assert!(seen.contains(&e), "no config for {}", e.name());
    }
}
