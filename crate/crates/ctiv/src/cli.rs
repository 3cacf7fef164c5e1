//! Command-line frontend: `fit`, `predict`, `simulate` and `bench`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use ctiv_core::bench::bench_growth;
use ctiv_core::synth::{generate, Design, DesignSpec};
use ctiv_core::{
    fit_ctiv, holdout_split, CausalTree, FitConfig, Fractions, GrowthConfig, LogisticOptions,
    RegimeKind,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::io::{load_csv, load_features, write_dataset, write_text, ColumnSchema};
use crate::{export, report, sweep};

/// Causal trees with instrumental variables.
#[derive(Debug, Parser)]
#[command(name = "ctiv", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a tree on a CSV and write JSON, DOT and leaf reports.
    Fit(FitArgs),
    /// Route rows of a CSV through a fitted tree.
    Predict(PredictArgs),
    /// Draw a synthetic design or robustness scenario.
    Simulate(SimulateArgs),
    /// Compare the plain and the instrumental-variable tree on synthetic designs.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct GrowthArgs {
    /// Maximum tree depth.
    #[arg(long, default_value_t = 2)]
    max_depth: usize,
    /// Minimum leaf size as a share of the training units.
    #[arg(long, default_value_t = 0.1)]
    min_leaf_fraction: f64,
    /// Minimum units per indicator arm in every leaf.
    #[arg(long, default_value_t = 10)]
    min_arm_count: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    /// Outcome column.
    #[arg(long, default_value = "y")]
    y_col: String,
    /// Treatment receipt column.
    #[arg(long, default_value = "w")]
    w_col: String,
    /// Assignment (instrument) column.
    #[arg(long, default_value = "z")]
    z_col: String,
    /// Feature columns, comma separated (default: all remaining columns).
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Columns to leave out when features are inferred.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Splitting indicator and propensity model: ct, iv-randomized or iv-unconfounded.
    #[arg(long, default_value = "iv-randomized")]
    regime: RegimeKind,
    #[command(flatten)]
    growth: GrowthArgs,
    /// Fixed pruning penalty (skips validation-based selection).
    #[arg(long)]
    alpha: Option<f64>,
    /// Ridge penalty of the logistic propensity model.
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
    /// Lower edge of the kept propensity band.
    #[arg(long, default_value_t = 0.1)]
    trim_lo: f64,
    /// Upper edge of the kept propensity band.
    #[arg(long, default_value_t = 0.9)]
    trim_hi: f64,
    /// Share of rows used to grow the tree.
    #[arg(long, default_value_t = 0.5)]
    train_frac: f64,
    /// Share of rows used to select the pruning penalty.
    #[arg(long, default_value_t = 0.5)]
    validation_frac: f64,
    /// Seed of the train/validation/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PredictArgs {
    /// Tree JSON written by `fit`.
    #[arg(long)]
    tree: PathBuf,
    /// CSV holding the tree's feature columns.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("which").required(true).args(["design", "scenario"])))]
struct SimulateArgs {
    /// Main design, 1-5.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    design: Option<u8>,
    /// Robustness scenario, 1 or 2.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    scenario: Option<u8>,
    /// Number of units.
    #[arg(long)]
    n: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BenchArgs {
    /// Main designs: a list and/or ranges such as `1-5` or `1,3`.
    #[arg(long)]
    designs: Option<String>,
    /// Robustness scenarios, e.g. `1,2`.
    #[arg(long, alias = "scenarios")]
    scenario: Option<String>,
    /// Estimation sample sizes; every cell also draws an equal test half.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,5000")]
    n: Vec<usize>,
    /// Seeds per cell.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// First seed; cells use `seed .. seed + seeds`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    growth: GrowthArgs,
    /// CSV of per-cell results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Text file for the summary table.
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// Parses `1-5`, `2`, `1,3-4` into sorted distinct ids within `lo..=hi`.
pub fn parse_id_list(text: &str, lo: u8, hi: u8) -> Result<Vec<u8>> {
    let bad = || {
        CliError::Usage(format!(
            "invalid id list `{text}` (ids must lie in {lo}-{hi})"
        ))
    };
    let mut ids = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = match part.split_once('-') {
            Some((a, b)) => (
                a.trim().parse::<u8>().map_err(|_| bad())?,
                b.trim().parse::<u8>().map_err(|_| bad())?,
            ),
            None => {
                let v = part.parse::<u8>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if a > b || a < lo || b > hi {
            return Err(bad());
        }
        ids.extend(a..=b);
    }
    if ids.is_empty() {
        return Err(bad());
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

fn growth_config(g: &GrowthArgs, regime: RegimeKind) -> GrowthConfig {
    GrowthConfig {
        max_depth: g.max_depth,
        min_leaf_fraction: g.min_leaf_fraction,
        min_arm_count: g.min_arm_count,
        regime,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn echo_config(command: &str, args: &impl Serialize) -> Result<serde_json::Value> {
    let value = json!({ "command": command, "args": args });
    println!("config: {}", serde_json::to_string(&value)?);
    Ok(value)
}

/// n-weighted mean of the leaf estimates of the tree's effect.
fn overall_effect(tree: &CausalTree) -> Option<f64> {
    if tree.regime.uses_instrument() {
        return tree.overall_cace().ok();
    }
    let (mut acc, mut total) = (0.0, 0usize);
    for l in tree.leaves().into_iter().filter(|l| l.itt_hat.is_finite()) {
        acc += l.itt_hat * l.n as f64;
        total += l.n;
    }
    (total > 0).then(|| acc / total as f64)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let config = echo_config("fit", args)?;
    let schema = ColumnSchema {
        y: args.y_col.clone(),
        w: args.w_col.clone(),
        z: Some(args.z_col.clone()),
        features: args.features.clone(),
        exclude: args.exclude.clone(),
    };
    let ds = load_csv(&args.input, &schema)?;
    let test_frac = 1.0 - args.train_frac - args.validation_frac;
    let fractions = Fractions::new(args.train_frac, args.validation_frac, test_frac.max(0.0))?;
    let split = holdout_split(ds.n(), fractions, args.seed)?;
    let cfg = FitConfig {
        growth: growth_config(&args.growth, args.regime),
        trim_lo: args.trim_lo,
        trim_hi: args.trim_hi,
        logistic: LogisticOptions {
            ridge_lambda: args.ridge,
            ..LogisticOptions::default()
        },
        alpha: args.alpha,
    };
    let tree = fit_ctiv(&ds, &cfg, &split)?;

    create_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    write_text(&dir.join("tree.json"), &export::to_json(&tree)?)?;
    write_text(&dir.join("tree.dot"), &export::to_dot(&tree))?;
    report::write_leaf_csv(&dir.join("leaves.csv"), &tree)?;
    let table = report::leaf_table(&tree);
    write_text(&dir.join("leaves.txt"), &table)?;

    let overall = overall_effect(&tree);
    let weak: Vec<u64> = if tree.regime.uses_instrument() {
        tree.leaves()
            .iter()
            .filter(|l| l.weak_instrument())
            .map(|l| l.leaf_id)
            .collect()
    } else {
        Vec::new()
    };
    let run = json!({
        "config": config,
        "rows": ds.n(),
        "features": ds.feature_names(),
        "train_rows": split.train.len(),
        "validation_rows": split.validation.len(),
        "test_rows": split.test.len(),
        "trimmed": tree.n_trimmed,
        "estimation_rows": tree.n_omega,
        "alpha": tree.alpha,
        "leaves": tree.root.n_leaves(),
        "overall_effect": overall,
        "weak_instrument_leaves": weak,
    });
    write_text(
        &dir.join("run.json"),
        &(serde_json::to_string_pretty(&run)? + "\n"),
    )?;

    print!("{table}");
    let what = if tree.regime.uses_instrument() {
        "overall CACE"
    } else {
        "overall ATE"
    };
    match overall {
        Some(v) => println!("{what}: {v:.4}"),
        None => println!("{what}: undefined"),
    }
    for id in &weak {
        println!("warning: leaf #{id} has a weak first stage (F < 10)");
    }
    println!(
        "leaves: {}, alpha: {}, estimation rows: {}, trimmed: {}",
        tree.root.n_leaves(),
        tree.alpha,
        tree.n_omega,
        tree.n_trimmed
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    echo_config("predict", args)?;
    let tree = export::from_json(&crate::io::read_text(&args.tree)?)?;
    let (x, n) = if fs::metadata(&args.input)
        .map_err(|e| CliError::io(&args.input, e))?
        .len()
        == 0
    {
        (Vec::new(), 0)
    } else {
        load_features(&args.input, &tree.feature_names)?
    };
    let k = tree.k();
    let mut out = csv::Writer::from_path(&args.out)?;
    out.write_record(["row", "leaf_id", "itt_hat", "cace_hat", "cace_se", "effect"])?;
    for i in 0..n {
        let leaf = tree.predict_leaf(&x[i * k..(i + 1) * k])?;
        let effect = leaf.effect(tree.regime).unwrap_or(f64::NAN);
        out.write_record([
            (i + 1).to_string(),
            leaf.leaf_id.to_string(),
            leaf.itt_hat.to_string(),
            leaf.cace_hat.to_string(),
            leaf.cace_se.to_string(),
            effect.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::io(&args.out, e))?;
    println!("predicted {n} rows");
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    echo_config("simulate", args)?;
    let design = match (args.design, args.scenario) {
        (Some(d), _) => Design::main(d)?,
        (None, Some(s)) => Design::scenario(s)?,
        (None, None) => {
            return Err(CliError::Usage(
                "one of --design or --scenario is required".into(),
            ))
        }
    };
    let spec = DesignSpec::new(design, args.n, args.seed);
    let sample = generate(&spec)?;
    let schema = ColumnSchema::default();
    write_dataset(
        &args.out,
        &sample.dataset,
        &schema,
        &[("true_cate", &sample.true_cate)],
    )?;
    let sidecar = json!({
        "spec": spec,
        "realized_cor_wz": sample.realized_cor_wz,
        "realized_cor_weta": sample.realized_cor_weta,
        "true_cate_column": "true_cate",
        "columns": { "y": schema.y, "w": schema.w, "z": schema.z, "features": sample.dataset.feature_names() },
    });
    let side = args.out.with_extension("json");
    write_text(&side, &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
    println!(
        "wrote {} units of design {} to {} (Cor(W,Z) = {:.3}, Cor(W,eta) = {:.3})",
        args.n,
        design,
        args.out.display(),
        sample.realized_cor_wz,
        sample.realized_cor_weta
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    echo_config("bench", args)?;
    let mut designs = Vec::new();
    if let Some(list) = &args.designs {
        for id in parse_id_list(list, 1, 5)? {
            designs.push(Design::main(id)?);
        }
    }
    if let Some(list) = &args.scenario {
        for id in parse_id_list(list, 1, 2)? {
            designs.push(Design::scenario(id)?);
        }
    }
    if designs.is_empty() {
        designs.extend(Design::MAIN);
    }
    if args.n.is_empty() || args.seeds == 0 {
        return Err(CliError::Usage(
            "need at least one sample size and one seed".into(),
        ));
    }
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let growth = GrowthConfig {
        regime: bench_growth().regime,
        ..growth_config(&args.growth, RegimeKind::Ct)
    };
    growth.validate()?;
    let result = sweep::run_sweep(&designs, &args.n, &seeds, &growth);
    if let Some(path) = &args.out {
        sweep::write_results_csv(path, &result.results)?;
    }
    let table = sweep::summary_table(&result.summary);
    if let Some(path) = &args.summary {
        write_text(path, &table)?;
    }
    print!("{table}");
    for f in &result.failures {
        println!(
            "failed cell: design {} n {} seed {}: {}",
            f.design, f.n, f.seed, f.error
        );
    }
    if result.results.is_empty() {
        return Err(CliError::Estimation("every benchmark cell failed".into()));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print a message and a one-line JSON error object on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
