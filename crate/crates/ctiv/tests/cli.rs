use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctiv::export;
use tempfile::TempDir;

fn ctiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error line");
    serde_json::from_str(line).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, design: &str, n: usize, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("d{design}_{n}_{seed}.csv"));
    let o = ctiv(&[
        "simulate",
        "--design",
        design,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(ctiv(&["--help"]).status.code(), Some(0));
    assert_eq!(ctiv(&["--version"]).status.code(), Some(0));
    let bad = ctiv(&["fit", "--no-such-flag"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stderr_json(&bad)["error"]["kind"], "usage");
    let both = ctiv(&[
        "simulate",
        "--design",
        "1",
        "--scenario",
        "1",
        "--n",
        "100",
        "--out",
        "x.csv",
    ]);
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "3", 300, 7);
    let b_path = dir.path().join("again.csv");
    let o = ctiv(&[
        "simulate",
        "--design",
        "3",
        "--n",
        "300",
        "--seed",
        "7",
        "--out",
        p(&b_path),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b_path).unwrap());
    let c = simulate(dir.path(), "3", 300, 8);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["spec"]["n"], 300);
    let header = fs::read_to_string(&a).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.ends_with("z,w,y,true_cate"), "{header}");
    assert_eq!(header.split(',').count(), 10 + 4);
}

#[test]
fn missing_instrument_column_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("noz.csv");
    let mut text = String::from("x1,x2,w,y\n");
    for i in 0..60 {
        text.push_str(&format!("{},{},{},{}\n", i, i % 7, i % 2, i as f64 * 0.1));
    }
    fs::write(&csv, text).unwrap();
    let o = ctiv(&[
        "fit",
        "--input",
        p(&csv),
        "--out-dir",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"]["kind"], "schema");
    assert_eq!(err["error"]["exit_code"], 2);

    // the plain regime does not need it
    let o = ctiv(&[
        "fit",
        "--input",
        p(&csv),
        "--out-dir",
        p(&dir.path().join("out")),
        "--regime",
        "ct",
        "--min-arm-count",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_cells_name_their_row() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "x1,z,w,y\n1,0,1,2\n2,1,2,3\n").unwrap();
    let o = ctiv(&[
        "fit",
        "--input",
        p(&csv),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr_json(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.contains("row 2"), "{msg}");

    fs::write(&csv, "x1,z,w,y\n1,0,1,2\n2,1,,3\n").unwrap();
    let o = ctiv(&[
        "fit",
        "--input",
        p(&csv),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "missing-value");
}

#[test]
fn estimation_failures_exit_three() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sparse.csv");
    let mut text = String::from("x1,z,w,y\n");
    for i in 0..40 {
        let z = u8::from(i < 4);
        text.push_str(&format!("{},{z},{z},{}\n", i, (i * 37 % 11) as f64));
    }
    fs::write(&csv, text).unwrap();
    let o = ctiv(&[
        "fit",
        "--input",
        p(&csv),
        "--out-dir",
        p(&dir.path().join("o")),
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

fn dot_ids(dot: &str) -> BTreeSet<u64> {
    dot.lines()
        .filter(|l| l.contains("[label=") && !l.contains("->"))
        .map(|l| l.trim().split(' ').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn fit_writes_consistent_artifacts() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "2", 5000, 1);
    let out = dir.path().join("full");
    let o = ctiv(&[
        "fit",
        "--input",
        p(&data),
        "--out-dir",
        p(&out),
        "--exclude",
        "true_cate",
        "--alpha",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("config: "));
    assert!(stdout.contains("overall CACE"));

    let tree = export::from_json(&fs::read_to_string(out.join("tree.json")).unwrap()).unwrap();
    let dot = fs::read_to_string(out.join("tree.dot")).unwrap();
    assert_eq!(dot_ids(&dot), (1..=7).collect());
    let from_json: BTreeSet<u64> = tree.root.nodes().iter().map(|n| n.id).collect();
    assert_eq!(dot_ids(&dot), from_json);
    assert!(dot.contains("#1\\nITT = "));
    assert!(dot.contains("<= "));

    let leaves = fs::read_to_string(out.join("leaves.csv")).unwrap();
    assert_eq!(leaves.lines().count(), 1 + tree.root.n_leaves());
    let share: f64 = leaves
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((share - 100.0).abs() < 1e-9);

    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["rows"], 5000);
    assert_eq!(run["leaves"], tree.root.n_leaves());
    assert_eq!(run["config"]["args"]["alpha"], 0.0);

    // a huge penalty leaves the root
    let root = dir.path().join("root");
    let o = ctiv(&[
        "fit",
        "--input",
        p(&data),
        "--out-dir",
        p(&root),
        "--exclude",
        "true_cate",
        "--alpha",
        "1e9",
    ]);
    assert!(o.status.success());
    let dot = fs::read_to_string(root.join("tree.dot")).unwrap();
    assert_eq!(dot_ids(&dot), [1].into());
    assert!(dot.contains("100.0%"));
    assert!(!dot.contains("->"));
}

#[test]
fn predict_matches_the_fitted_tree() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "4", 3000, 2);
    let out = dir.path().join("fit");
    let o = ctiv(&[
        "fit",
        "--input",
        p(&data),
        "--out-dir",
        p(&out),
        "--exclude",
        "true_cate",
        "--alpha",
        "0",
    ]);
    assert!(o.status.success());
    let tree = export::from_json(&fs::read_to_string(out.join("tree.json")).unwrap()).unwrap();

    let pred = dir.path().join("pred.csv");
    let o = ctiv(&[
        "predict",
        "--tree",
        p(&out.join("tree.json")),
        "--input",
        p(&data),
        "--out",
        p(&pred),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut input = csv::Reader::from_path(&data).unwrap();
    let mut output = csv::Reader::from_path(&pred).unwrap();
    let k = tree.k();
    let mut rows = 0;
    for (row, got) in input.records().zip(output.records()) {
        let row = row.unwrap();
        let got = got.unwrap();
        let x: Vec<f64> = (0..k).map(|j| row[j].parse().unwrap()).collect();
        let leaf = tree.predict_leaf(&x).unwrap();
        assert_eq!(got[1].parse::<u64>().unwrap(), leaf.leaf_id);
        assert_eq!(
            got[2].parse::<f64>().unwrap().to_bits(),
            leaf.itt_hat.to_bits()
        );
        rows += 1;
    }
    assert_eq!(rows, 3000);

    // header only in, header only out
    let empty = dir.path().join("empty.csv");
    let names: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
    fs::write(&empty, names.join(",") + "\n").unwrap();
    let o = ctiv(&[
        "predict",
        "--tree",
        p(&out.join("tree.json")),
        "--input",
        p(&empty),
        "--out",
        p(&pred),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&pred).unwrap().lines().count(), 1);

    // too few features
    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, "x1,x2\n0.1,0.2\n").unwrap();
    let o = ctiv(&[
        "predict",
        "--tree",
        p(&out.join("tree.json")),
        "--input",
        p(&narrow),
        "--out",
        p(&pred),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr_json(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(
        msg.contains(&format!("expected {k} feature columns")),
        "{msg}"
    );
}

#[test]
fn bench_prints_one_block_per_design() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = ctiv(&[
        "bench",
        "--designs",
        "1,5",
        "--scenario",
        "2",
        "--n",
        "300",
        "--seeds",
        "2",
        "--out",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for label in [
        "Design 1",
        "Design 5",
        "Scenario 2",
        "Relative Gap",
        "N = 300",
    ] {
        assert!(stdout.contains(label), "{label} missing from\n{stdout}");
    }
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(text.starts_with("design,n,seed,mse_ct,mse_ctiv,relative_gap_pct"));

    let bad = ctiv(&["bench", "--designs", "0-7"]);
    assert_eq!(bad.status.code(), Some(1));
}
