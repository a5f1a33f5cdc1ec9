use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

const BSC: &str = r#"{"states": ["a", "b"], "outputs": ["0", "1"],
    "generator": [[-1, 1], [1, -1]], "channel": [[0.9, 0.1], [0.1, 0.9]],
    "p": 0.01, "seed": 7}"#;

const NOISELESS: &str = r#"{"generator": [[-1, 1], [1, -1]], "channel": [[1, 0], [0, 1]],
    "p": 0.01, "seed": 7}"#;

const THREE_STATE: &str = r#"{"generator": [[-2, 1, 1], [1, -3, 2], [2, 1, -3]],
    "channel": [[0.7, 0.2, 0.1], [0.2, 0.5, 0.3], [0.1, 0.3, 0.6]],
    "p_list": [0.001, 0.003, 0.01], "n": 100000, "reps": 4, "seed": 2,
    "budgets": {"n_decode": 100000}}"#;

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn rarehmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rarehmm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_owned())
        .collect()
}

#[test]
fn model_info_reports_entropies() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "m.json", BSC);
    let o = rarehmm(&["model-info", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("pi = 0.500000"));
    assert!(s.contains("h(P) = 0.056002 nats"));
    assert!(s.contains("sum pi H_chan = 0.325083 nats"));
    assert!(s.contains("distinguishing = true"));

    let o = rarehmm(&["model-info", "--config", &cfg, "--units", "bits"]);
    let s = stdout(&o);
    let bits = format!("h(P) = {:.6} bits", 0.0560015 / std::f64::consts::LN_2);
    assert!(s.contains(&bits), "{s}");
}

#[test]
fn invalid_channel_names_the_row() {
    let dir = TempDir::new().unwrap();
    let bad = BSC.replace("[0.1, 0.9]]", "[0.2, 0.9]]");
    let cfg = write_config(dir.path(), "bad.json", &bad);
    let o = rarehmm(&["model-info", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&rarehmm(&["model-info"])), 2);
    let cfg = write_config(dir.path(), "junk.json", "{\"generator\": 3}");
    assert_eq!(code(&rarehmm(&["model-info", "--config", &cfg])), 2);
    let cfg = write_config(dir.path(), "m.json", BSC);
    assert_eq!(
        code(&rarehmm(&["model-info", "--config", &cfg, "--p", "2.5"])),
        2
    );
    assert_eq!(
        code(&rarehmm(&[
            "model-info",
            "--config",
            &cfg,
            "--workers",
            "0"
        ])),
        2
    );
}

#[test]
fn entropy_is_deterministic_and_noiseless_conditional_vanishes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n.json", NOISELESS);
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = rarehmm(&[
            "entropy",
            "--config",
            &cfg,
            "--n",
            "20000",
            "--reps",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(out.join("entropy.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let kinds = csv_column(&a, "kind");
    let est = csv_column(&a, "estimate");
    let cond = kinds.iter().position(|k| k == "conditional").unwrap();
    assert!(est[cond].parse::<f64>().unwrap().abs() < 1e-10);

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("a/entropy.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_clock_seconds"].as_f64().is_some());
    assert!(manifest["artifact_version"].is_string());
}

#[test]
fn bracket_rows_and_budget() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "m.json", BSC);
    let out = dir.path().join("o");
    let o = rarehmm(&[
        "bracket",
        "--config",
        &cfg,
        "--n",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("bracket.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    let lower: Vec<f64> = csv_column(&csv, "lower")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    let upper: Vec<f64> = csv_column(&csv, "upper")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(lower[11] <= upper[11]);

    let o = rarehmm(&["bracket", "--config", &cfg, "--n", "40"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("BudgetExceeded"));
}

#[test]
fn reconstruct_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "m.json", BSC);
    let out = dir.path().join("r");
    let o = rarehmm(&[
        "reconstruct",
        "--config",
        &cfg,
        "--p",
        "0.001",
        "--n",
        "1000000",
        "--block-l",
        "74",
        "--block-k",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("reconstruct.csv")).unwrap();
    let err: f64 = csv_column(&summary, "smoothing_error_rate")[0]
        .parse()
        .unwrap();
    assert!(err <= 10.0 * 0.001, "{err}");
    assert_eq!(csv_column(&summary, "good1_constant_errors")[0], "0");
    let blocks = fs::read_to_string(out.join("blocks.csv")).unwrap();
    assert_eq!(blocks.lines().count(), 1 + 1_000_000 / 74);

    let o = rarehmm(&["reconstruct", "--config", &cfg, "--p", "0.3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("IncompatibleParams"));
}

#[test]
fn noiseless_reconstruction_errs_only_outside_good_blocks() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n.json", NOISELESS);
    let out = dir.path().join("r");
    let o = rarehmm(&[
        "reconstruct",
        "--config",
        &cfg,
        "--n",
        "200000",
        "--block-l",
        "40",
        "--block-k",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("reconstruct.csv")).unwrap();
    assert_eq!(
        csv_column(&summary, "filtering_error_rate")[0]
            .parse::<f64>()
            .unwrap(),
        0.0
    );
    let blocks = fs::read_to_string(out.join("blocks.csv")).unwrap();
    let classes = csv_column(&blocks, "class");
    let deltas = csv_column(&blocks, "delta");
    for (c, d) in classes.iter().zip(&deltas) {
        if c == "good1" || c == "good2" {
            assert_eq!((c.as_str(), d.as_str()), ("good1", "0"));
        }
    }
}

#[test]
fn sample_dump_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "m.json", BSC);
    let dump = |o: &str| {
        let out = dir.path().join(o);
        let r = rarehmm(&[
            "sample",
            "--config",
            &cfg,
            "--n",
            "5000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        (
            fs::read(out.join("path.hidden.bin")).unwrap(),
            fs::read(out.join("path.observed.bin")).unwrap(),
        )
    };
    let (a, b) = (dump("a"), dump("b"));
    assert_eq!(a, b);
    assert_eq!(a.0.len(), 5000);
    assert!(a.0.iter().all(|&s| s < 2));
}

#[test]
fn sweep_columns_and_determinism() {
    let dir = TempDir::new().unwrap();
    let bsc = BSC.replace(
        "\"p\": 0.01",
        "\"p_list\": [0.001, 0.003, 0.01], \"n\": 100000, \"reps\": 4, \"budgets\": {\"n_decode\": 100000}",
    );
    let cfg = write_config(dir.path(), "s.json", &bsc);
    let run = |cfg: &str, out: &str| {
        let out = dir.path().join(out);
        let o = rarehmm(&["sweep", "--config", cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (
            stdout(&o),
            fs::read_to_string(out.join("sweep.csv")).unwrap(),
        )
    };
    let (s1, a) = run(&cfg, "a");
    let (_, b) = run(&cfg, "b");
    assert_eq!(a, b);
    assert!(
        s1.contains("PASS h_xy_cond") && s1.contains("c_hat"),
        "{s1}"
    );
    assert!(a.lines().next().unwrap().ends_with("now_lower,now_upper"));
    assert_eq!(a.lines().count(), 4);

    let three = write_config(dir.path(), "t.json", THREE_STATE);
    let (_, t) = run(&three, "t");
    assert!(!t.contains("now_lower"));

    let narrow = bsc.replace("[0.001, 0.003, 0.01]", "[0.001, 0.002, 0.005]");
    let cfg = write_config(dir.path(), "narrow.json", &narrow);
    let o = rarehmm(&["sweep", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("NarrowPRange"));
}

#[test]
fn noiseless_sweep_reports_insufficient_resolution() {
    let dir = TempDir::new().unwrap();
    let cfg = NOISELESS.replace(
        "\"p\": 0.01",
        "\"p_list\": [0.001, 0.003, 0.01], \"n\": 20000, \"reps\": 3, \"budgets\": {\"n_decode\": 100000}",
    );
    let cfg = write_config(dir.path(), "n.json", &cfg);
    let out = dir.path().join("o");
    let o = rarehmm(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("InsufficientResolution"));
    let fit = fs::read_to_string(out.join("fit.json")).unwrap();
    assert!(fit.contains("InsufficientResolution"));
}
