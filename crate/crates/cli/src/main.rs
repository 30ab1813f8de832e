use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use shapereg::additive::{select_alpha_additive, BackfitOptions};
use shapereg::bench::{
    alpha_sweep, convergence_study, cv_split_robustness, m_sweep, write_records_csv,
    AlphaSweepConfig, ConvergenceConfig, CvSplitConfig, MSweepConfig, ScenarioParams,
};
use shapereg::data::{format_f64, read_csv, read_numeric_csv, save_csv};
use shapereg::decomp::{select_alpha, Shape};
use shapereg::model::{decode_model_json, ModelFile, ModelKind};
use shapereg::simgen::{generate, ScenarioId, ScenarioSpec};
use shapereg::AlphaGrid;

#[derive(Parser, Debug)]
#[command(name = "shapereg", version, about = "Shape-restricted nonparametric regression")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "SHAPEREG_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset.
    Simulate(SimulateArgs),
    /// Select the penalty scale on a split and save the fitted model.
    Fit(FitArgs),
    /// Evaluate a saved model on new covariates.
    Predict(PredictArgs),
    /// Run a Monte Carlo study.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Serialize)]
struct ScenarioArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: ScenarioId,
    /// Segment count for S2/S4.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Frequency for S3.
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
}

impl ScenarioArgs {
    fn params(&self) -> ScenarioParams {
        ScenarioParams {
            id: self.scenario,
            m: self.m,
            beta: self.beta,
            gamma: self.gamma,
            noise_sd: self.noise_sd,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the generating spec is written next to it as JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    /// Candidate penalty scales: `log:<lo>:<hi>:<count>` or `list:<v1>,<v2>,...`.
    #[arg(long, default_value = "log:1e-2:1e2:16", value_parser = parse_grid)]
    #[serde(serialize_with = "display")]
    grid: AlphaGrid,
    /// Do not add zero to the grid.
    #[arg(long)]
    no_zero: bool,
    /// Golden-section refinement around the best grid value.
    #[arg(long)]
    refine: bool,
}

impl GridArgs {
    fn resolve(&self) -> AlphaGrid {
        let g = if self.no_zero { self.grid.clone() } else { self.grid.clone().with_zero() };
        g.with_refine(self.refine)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ShapeArg {
    Monotone,
    Convex,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Monotone => Shape::Monotone,
            ShapeArg::Convex => Shape::Convex,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Shape of the decomposition; multivariate data is fitted additively and must be monotone.
    #[arg(long, value_enum, default_value_t = ShapeArg::Monotone)]
    shape: ShapeArg,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Validation-set size (default round(√n)).
    #[arg(long)]
    validate_size: Option<usize>,
    /// Backfitting sweep cap.
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Backfitting relative risk tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Suite {
    Convergence,
    Alpha,
    Cv,
    Msweep,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Sample sizes (convergence, alpha).
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000,8000")]
    n_grid: Vec<usize>,
    /// Sample size (cv, msweep).
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Fixed penalty scales (alpha suite).
    #[arg(long, value_delimiter = ',', default_value = "0.1,3,4,6,8,12")]
    alphas: Vec<f64>,
    /// Number of splits (cv suite).
    #[arg(long, default_value_t = 300)]
    splits: usize,
    /// Segment counts (msweep suite).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    m_list: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "log:1e-2:1e2:16", value_parser = parse_grid)]
    #[serde(serialize_with = "display")]
    grid: AlphaGrid,
    #[arg(long)]
    no_zero: bool,
    /// Disable golden-section refinement (on by default for studies).
    #[arg(long)]
    no_refine: bool,
    #[arg(long, default_value_t = 100_000)]
    n_test: usize,
    /// Smallest n used in slope fits.
    #[arg(long, default_value_t = 2000)]
    n_min: usize,
    #[arg(long)]
    validate_size: Option<usize>,
    /// Output JSON; a CSV of rows is written next to it.
    #[arg(long)]
    out: PathBuf,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn parse_grid(s: &str) -> std::result::Result<AlphaGrid, String> {
    s.parse().map_err(|e: shapereg::Error| e.to_string())
}

fn parse_scenario(s: &str) -> std::result::Result<ScenarioId, String> {
    s.parse().map_err(|e: shapereg::Error| e.to_string())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sidecar(path: &Path, ext: &str) -> Result<PathBuf> {
    let side = path.with_extension(ext);
    if side == path {
        bail!("--out {} would be overwritten by its .{ext} sidecar", path.display());
    }
    Ok(side)
}

fn simulate(args: &SimulateArgs, config: Value) -> Result<()> {
    let spec: ScenarioSpec = args.scenario.params().spec(args.n, args.seed);
    let data = generate(&spec)?;
    save_csv(&data, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    write_json(
        &sidecar(&args.out, "json")?,
        &json!({ "config": config, "spec": spec }),
    )
}

fn fit(args: &FitArgs, mut config: Value) -> Result<()> {
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let (data, covariates) = read_csv(file, &args.response)?;
    let grid = args.grid.resolve();
    config["resolved_grid"] = json!(grid.to_string());
    let model = if data.d() == 1 {
        ModelKind::Univariate(select_alpha(&data, &grid, args.shape.into(), args.seed, args.validate_size)?)
    } else {
        if matches!(args.shape, ShapeArg::Convex) {
            bail!("additive fits support only the monotone shape ({} covariates found)", data.d());
        }
        let opts = BackfitOptions {
            max_iters: args.max_iters,
            tol: args.tol,
        };
        let m = select_alpha_additive(&data, &grid, args.seed, args.validate_size, opts)?;
        if let Err(e) = m.best.ensure_converged() {
            eprintln!("warning: {e}");
        }
        ModelKind::Additive(m)
    };
    let file = ModelFile {
        covariates,
        response: args.response.clone(),
        model,
    };
    let mut value = serde_json::to_value(&file)?;
    value["config"] = config;
    write_json(&args.out, &value)
}

fn predict(args: &PredictArgs, config: Value) -> Result<()> {
    let text = std::fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))?;
    let model = decode_model_json(&text).with_context(|| format!("decoding {}", args.model.display()))?;
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let table = read_numeric_csv(file)?;
    let x = table.select(&model.covariates)?;
    let d = model.covariates.len();
    let mut w = csv::Writer::from_writer(BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    ));
    let mut header = model.covariates.clone();
    header.push("prediction".into());
    w.write_record(&header)?;
    let mut count = 0usize;
    for row in x.chunks_exact(d) {
        let p = model.model.predict(row)?;
        let mut rec: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        rec.push(format_f64(p));
        w.write_record(&rec)?;
        count += 1;
    }
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("flushing {}: {e}", args.out.display()))?
        .flush()?;
    write_json(
        &sidecar(&args.out, "json")?,
        &json!({ "config": config, "rows": count, "alpha": model.model.alpha() }),
    )
}

fn bench(args: &BenchArgs, config: Value) -> Result<()> {
    let grid = {
        let g = if args.no_zero { args.grid.clone() } else { args.grid.clone().with_zero() };
        g.with_refine(!args.no_refine)
    };
    let params = args.scenario.params();
    let csv_path = sidecar(&args.out, "csv")?;
    let result = match args.suite {
        Suite::Convergence => {
            let cfg = ConvergenceConfig {
                scenario: params,
                n_grid: args.n_grid.clone(),
                reps: args.reps,
                base_seed: args.seed,
                grid,
                n_test: args.n_test,
                n_min: args.n_min,
                validate_size: args.validate_size,
                ..ConvergenceConfig::new(args.scenario.scenario)
            };
            let report = convergence_study(&cfg)?;
            let f = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
            write_records_csv(&report.records, BufWriter::new(f))?;
            serde_json::to_value(&report)?
        }
        Suite::Alpha => {
            let cfg = AlphaSweepConfig {
                scenario: params,
                reps: args.reps,
                base_seed: args.seed,
                n_test: args.n_test,
                ..AlphaSweepConfig::new(args.scenario.scenario, args.n_grid.clone(), args.alphas.clone())
            };
            let rows = alpha_sweep(&cfg)?;
            write_rows_csv(&csv_path, &rows)?;
            json!({ "config": cfg, "rows": rows })
        }
        Suite::Cv => {
            let cfg = CvSplitConfig {
                scenario: params,
                grid,
                validate_size: args.validate_size,
                n_test: args.n_test,
                ..CvSplitConfig::new(args.scenario.scenario, args.n, args.splits, args.seed)
            };
            let rows = cv_split_robustness(&cfg)?;
            let flat: Vec<_> = rows
                .iter()
                .map(|r| (r.split_seed, r.alpha.iter().map(|a| format!("{a:?}")).collect::<Vec<_>>().join(";"), r.mse))
                .collect();
            let mut w = csv::Writer::from_path(&csv_path)?;
            w.write_record(["split_seed", "alpha", "mse"])?;
            for (s, a, m) in flat {
                w.write_record([s.to_string(), a, format!("{m:?}")])?;
            }
            w.flush()?;
            json!({ "config": cfg, "rows": rows })
        }
        Suite::Msweep => {
            let cfg = MSweepConfig {
                reps: args.reps,
                base_seed: args.seed,
                grid,
                validate_size: args.validate_size,
                n_test: args.n_test,
                ..MSweepConfig::new(args.scenario.scenario, args.m_list.clone(), args.n)
            };
            let rows = m_sweep(&cfg)?;
            write_rows_csv(&csv_path, &rows)?;
            json!({ "config": cfg, "rows": rows })
        }
    };
    write_json(&args.out, &json!({ "config": config, "result": result }))
}

fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let command = match &cli.command {
        Command::Simulate(_) => "simulate",
        Command::Fit(_) => "fit",
        Command::Predict(_) => "predict",
        Command::Bench(_) => "bench",
    };
    let config = |args: Value| json!({ "command": command, "threads": cli.threads, "args": args });
    match &cli.command {
        Command::Simulate(a) => simulate(a, config(serde_json::to_value(a)?)),
        Command::Fit(a) => fit(a, config(serde_json::to_value(a)?)),
        Command::Predict(a) => predict(a, config(serde_json::to_value(a)?)),
        Command::Bench(a) => bench(a, config(serde_json::to_value(a)?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
