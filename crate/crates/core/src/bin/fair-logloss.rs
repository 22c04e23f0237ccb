use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fair_logloss::data::{self, DatasetSchema, RawData};
use fair_logloss::eval::{self, BenchmarkConfig, DEFAULT_C_GRID};
use fair_logloss::inference::predict_batch_or_base;
use fair_logloss::model_file::{self, write_atomic};
use fair_logloss::{report, training, CriterionKind, Error, Model, Result, TrainConfig};

const LOG_ENV: &str = "FAIR_LOGLOSS_LOG";

#[derive(Parser, Debug)]
#[command(name = "fair-logloss", version)]
#[command(about = "Fair robust log-loss classification", long_about = None)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on a CSV file and write the model file.
    Train(TrainArgs),
    /// Score a CSV file with a trained model.
    Predict(PredictArgs),
    /// Error and fairness violations of a model on a labelled CSV file.
    Evaluate(PredictArgs),
    /// Repeated random-split comparison against the unconstrained baseline.
    Benchmark(BenchmarkArgs),
    /// Choose the L2 strength by held-out log loss.
    Sweep(SweepArgs),
    /// Print a model's clamp thresholds and sampled reshaping curves.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML file naming the label, protected and feature columns.
    #[arg(long)]
    schema: PathBuf,
    /// none, dp, eopp or eodds.
    #[arg(long, default_value = "dp", value_parser = parse_criterion)]
    criterion: CriterionKind,
}

#[derive(Args, Debug)]
struct OptimArgs {
    #[arg(long = "reg-c", alias = "reg-C", default_value_t = 0.01)]
    reg_c: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    objective_tol: f64,
}

impl OptimArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            reg_c: self.reg_c,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            objective_tol: self.objective_tol,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Train on this fraction of rows and report metrics on the rest.
    #[arg(long)]
    holdout_split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the schema stored in the model.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 20)]
    splits: usize,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Comma-separated values of C.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_C_GRID)]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 0.3)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated lambda / p values to sample curves at.
    #[arg(long, value_delimiter = ',')]
    curve: Vec<f64>,
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_criterion(s: &str) -> std::result::Result<CriterionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_data(path: &Path, schema: &Path) -> Result<RawData> {
    let schema = DatasetSchema::from_path(schema)?;
    data::load_csv(path, &schema)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let raw = load_data(&args.data.data, &args.data.schema)?;
    let (train_raw, test_raw) = match args.holdout_split {
        Some(f) => {
            let (a, b) = data::split_raw(&raw, f, args.seed)?;
            (a, Some(b))
        }
        None => (raw, None),
    };
    let (train_set, stats) = data::fit_transform(&train_raw)?;
    let mut model = training::train(&train_set, args.data.criterion, &args.optim.config())?;
    model.preprocessing = Some(stats);
    model_file::save(&model, &args.out)?;

    let d = &model.diagnostics;
    println!("criterion {}", model.kind());
    println!("rows {}", train_set.len());
    println!("objective {}", d.objective);
    println!("iterations {} ({:?})", d.iterations, d.stop_reason);
    println!("grad_norm_inf {:e}", d.grad_norm_inf);
    for ((c, lambda), gap) in model.spec.constraints.iter().zip(&model.lambdas.0).zip(&d.train_gaps) {
        println!("lambda {} {} (train gap {:e})", c.name, lambda, gap);
    }
    if let Some(test_raw) = test_raw {
        let test = data::apply(model.preprocessing.as_ref().expect("just set"), &test_raw)?;
        print!("{}", report::eval_report(&eval::evaluate(&model, &test)?));
    }
    Ok(())
}

fn load_scored(args: &PredictArgs, require_label: bool) -> Result<(Model, fair_logloss::Dataset)> {
    let model = model_file::load(&args.model)?;
    let stats = model
        .preprocessing
        .clone()
        .ok_or_else(|| Error::IncompatibleModel("model carries no preprocessing statistics".into()))?;
    let schema = match &args.schema {
        Some(p) => DatasetSchema::from_path(p)?,
        None => stats.schema.clone(),
    };
    let raw = data::load_csv_with(&args.data, &schema, require_label)?;
    let set = data::apply(&stats, &raw)?;
    Ok((model, set))
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (model, set) = load_scored(args, false)?;
    let (preds, fallbacks) = predict_batch_or_base(&model, &set)?;
    if fallbacks > 0 {
        log::warn!("{fallbacks} rows used the base probability because label marginalization was degenerate");
    }
    emit(args.out.as_deref(), &report::predictions_csv(&preds))
}

fn cmd_evaluate(args: &PredictArgs) -> Result<()> {
    let (model, set) = load_scored(args, true)?;
    emit(args.out.as_deref(), &report::eval_report(&eval::evaluate(&model, &set)?))
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let raw = load_data(&args.data.data, &args.data.schema)?;
    let cfg = BenchmarkConfig {
        train: args.optim.config(),
        n_splits: args.splits,
        split_fraction: args.train_fraction,
        base_seed: args.seed,
    };
    let summary = eval::run_benchmark(&raw, args.data.criterion, &cfg)?;
    emit(args.out.as_deref(), &report::benchmark_report(&summary)?)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let raw = load_data(&args.data.data, &args.data.schema)?;
    let r = eval::sweep_regularization(
        &raw,
        args.data.criterion,
        &args.grid,
        args.validation_fraction,
        args.seed,
        &args.optim.config(),
    )?;
    let mut text = String::from("reg_c,validation_log_loss\n");
    for (c, l) in &r.losses {
        text.push_str(&format!("{c},{l}\n"));
    }
    text.push_str(&format!("# best_c {}\n", r.best_c));
    emit(args.out.as_deref(), &text)
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let model = model_file::load(&args.model)?;
    emit(args.out.as_deref(), &report::inspect_report(&model, &args.curve, args.points)?)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ZeroGroupRate { .. } => 3,
        e if e.is_data_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
