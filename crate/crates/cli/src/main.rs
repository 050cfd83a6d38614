use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use sparse_kos::benchmark::{self, BenchmarkConfig, Method};
use sparse_kos::dataio::{self, CsvSchema, LabelColumn};
use sparse_kos::simdata::SimModel;
use sparse_kos::tuning::{GammaChoice, LambdaChoice, Sigma2Choice, TuningPlan, DEFAULT_FOLDS};
use sparse_kos::{error_rate, train, tune, DataSet, FitConfig, KernelSpec, TuningReport};

#[derive(Parser)]
#[command(name = "kos", version, about = "Kernel optimal scoring with sparse feature weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset.
    Simulate(SimulateArgs),
    /// Fit a model, tuning any parameter given as `auto`.
    Fit(FitArgs),
    /// Classify the rows of a dataset with a saved model.
    Predict(PredictArgs),
    /// Run the parameter selection alone and write the tuning report.
    Tune(TuneArgs),
    /// Repeat generate / split / tune / fit on a simulated model.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation model, 1 or 2.
    #[arg(long, value_parser = parse_model)]
    model: SimModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    Auto,
    Gcv,
    Value(f64),
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "gcv" => Ok(Self::Gcv),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Self::Value)
                .ok_or_else(|| format!("expected `auto`, `gcv` or a number, got `{s}`")),
        }
    }
}

fn parse_model(s: &str) -> std::result::Result<SimModel, String> {
    let id: u32 = s.parse().map_err(|_| format!("expected 1 or 2, got `{s}`"))?;
    SimModel::from_id(id).map_err(|e| e.to_string())
}

fn parse_sigma2(s: &str) -> std::result::Result<Param, String> {
    match s.parse()? {
        Param::Gcv => Err("sigma2 accepts `auto` or a positive number".into()),
        Param::Value(v) if v <= 0.0 => Err(format!("sigma2 must be positive, got {v}")),
        p => Ok(p),
    }
}

fn parse_gamma(s: &str) -> std::result::Result<Param, String> {
    match s.parse()? {
        Param::Value(v) if v <= 0.0 => Err(format!("gamma must be positive, got {v}")),
        p => Ok(p),
    }
}

fn parse_lambda(s: &str) -> std::result::Result<Param, String> {
    match s.parse()? {
        Param::Gcv => Err("lambda accepts `auto` or a non-negative number".into()),
        Param::Value(v) if v < 0.0 => Err(format!("lambda must be non-negative, got {v}")),
        p => Ok(p),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, got `{s}`")),
    }
}

#[derive(Args, Clone, Default)]
struct TuningArgs {
    /// Training CSV.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Label column: header name or 0-based index [default: label].
    #[arg(long)]
    label: Option<String>,
    /// `auto` or a positive bandwidth [default: auto].
    #[arg(long, value_parser = parse_sigma2)]
    sigma2: Option<Param>,
    /// `auto` (Stabilization), `gcv` or a positive value [default: auto].
    #[arg(long, value_parser = parse_gamma)]
    gamma: Option<Param>,
    /// `auto` or a non-negative value [default: auto].
    #[arg(long, value_parser = parse_lambda)]
    lambda: Option<Param>,
    /// Fit sparse weights (`false` fixes all weights at one) [default: true].
    #[arg(long, value_parser = parse_bool)]
    sparse: Option<bool>,
    /// Seed for the cross-validation folds [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Number of cross-validation folds [default: 5].
    #[arg(long)]
    folds: Option<usize>,
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    tuning: TuningArgs,
    /// Where to write the tuning report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Simulation model, 1 or 2.
    #[arg(long, value_parser = parse_model)]
    model: SimModel,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    /// Replication r uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for rows.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Also run sparse KOS with the ridge parameter selected by GCV.
    #[arg(long)]
    compare_gcv: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ConfigValue {
    Number(f64),
    Text(String),
}

impl ConfigValue {
    fn parse_with(
        &self,
        key: &str,
        parser: fn(&str) -> std::result::Result<Param, String>,
    ) -> Result<Param> {
        let text = match self {
            Self::Number(v) => v.to_string(),
            Self::Text(s) => s.clone(),
        };
        parser(&text).map_err(|e| anyhow::anyhow!("config key `{key}`: {e}"))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    train: Option<PathBuf>,
    label: Option<ConfigValue>,
    sigma2: Option<ConfigValue>,
    gamma: Option<ConfigValue>,
    lambda: Option<ConfigValue>,
    sparse: Option<bool>,
    seed: Option<u64>,
    folds: Option<usize>,
    model_out: Option<PathBuf>,
}

/// Fully resolved fit settings.
#[derive(Debug)]
struct Settings {
    train: PathBuf,
    label: String,
    sigma2: Param,
    gamma: Param,
    lambda: Param,
    sparse: bool,
    seed: u64,
    folds: usize,
    model_out: Option<PathBuf>,
}

fn resolve(args: &TuningArgs, model_out: Option<PathBuf>) -> Result<Settings> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<ConfigFile>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let from_file = |v: &Option<ConfigValue>, key: &str, parser| -> Result<Option<Param>> {
        v.as_ref().map(|v| v.parse_with(key, parser)).transpose()
    };
    let label = match (&args.label, &file.label) {
        (Some(l), _) => l.clone(),
        (None, Some(ConfigValue::Text(s))) => s.clone(),
        (None, Some(ConfigValue::Number(v))) => v.to_string(),
        (None, None) => "label".to_string(),
    };
    let settings = Settings {
        train: args
            .train
            .clone()
            .or(file.train)
            .context("missing --train (or `train` in the config file)")?,
        label,
        sigma2: args
            .sigma2
            .or(from_file(&file.sigma2, "sigma2", parse_sigma2)?)
            .unwrap_or(Param::Auto),
        gamma: args
            .gamma
            .or(from_file(&file.gamma, "gamma", parse_gamma)?)
            .unwrap_or(Param::Auto),
        lambda: args
            .lambda
            .or(from_file(&file.lambda, "lambda", parse_lambda)?)
            .unwrap_or(Param::Auto),
        sparse: args.sparse.or(file.sparse).unwrap_or(true),
        seed: args.seed.or(file.seed).unwrap_or(0),
        folds: args.folds.or(file.folds).unwrap_or(DEFAULT_FOLDS),
        model_out: model_out.or(file.model_out),
    };
    Ok(settings)
}

fn tuning_plan(s: &Settings) -> Result<TuningPlan> {
    let sigma2 = match s.sigma2 {
        Param::Value(v) => Sigma2Choice::Fixed(v),
        _ => Sigma2Choice::Auto,
    };
    let gamma = match s.gamma {
        Param::Value(v) => GammaChoice::Fixed(v),
        Param::Gcv => GammaChoice::Gcv,
        Param::Auto => GammaChoice::Stabilization,
    };
    let lambda = match (s.sparse, s.lambda) {
        (false, Param::Value(v)) if v != 0.0 => {
            bail!("--sparse false fixes the weights, so lambda must be 0 or auto")
        }
        (false, _) => LambdaChoice::Fixed(0.0),
        (true, Param::Value(v)) => LambdaChoice::Fixed(v),
        (true, _) => LambdaChoice::Auto,
    };
    Ok(TuningPlan {
        sigma2,
        gamma,
        lambda,
        folds: s.folds,
        seed: s.seed,
    })
}

fn load_training(s: &Settings) -> Result<(DataSet, String)> {
    let schema = CsvSchema::new(LabelColumn::parse(&s.label));
    let table = dataio::read_table(&s.train, schema.delimiter, schema.has_header)
        .with_context(|| format!("reading {}", s.train.display()))?;
    let label_name = table
        .find_column(&schema.label_column)
        .and_then(|j| table.header.as_ref().map(|h| h[j].clone()))
        .unwrap_or_else(|| s.label.clone());
    let data = dataio::read_dataset(&s.train, &schema)
        .with_context(|| format!("reading {}", s.train.display()))?;
    Ok((data, label_name))
}

fn run_tuning(s: &Settings, data: &DataSet) -> Result<TuningReport> {
    let plan = tuning_plan(s)?;
    let sigma2 = match s.sigma2 {
        Param::Value(v) => v,
        _ => 1.0,
    };
    let gamma = match s.gamma {
        Param::Value(v) => v,
        _ => 1.0,
    };
    let spec = KernelSpec::gaussian(sigma2)?;
    let config = FitConfig::default().with_gamma(gamma);
    Ok(tune(data, &plan, &config, &spec)?)
}

fn print_report(report: &TuningReport) {
    println!(
        "sigma2 = {} ({:?})",
        report.sigma2_selected, report.sigma2_source
    );
    println!(
        "gamma  = {} ({:?})",
        report.gamma_selected, report.gamma_method
    );
    println!(
        "lambda = {} ({:?})",
        report.lambda_selected, report.lambda_source
    );
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let data = args.model.generate(args.seed)?;
    dataio::write_dataset(&data, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let [n1, n2] = data.counts();
    let labels = data.class_labels();
    println!("n = {}", data.n());
    println!("class {}: {n1}", labels[0]);
    println!("class {}: {n2}", labels[1]);
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let settings = resolve(&args.tuning, args.model_out)?;
    let (data, label_name) = load_training(&settings)?;
    let report = run_tuning(&settings, &data)?;
    print_report(&report);

    let spec = KernelSpec::gaussian(report.sigma2_selected)?;
    let config = FitConfig::default()
        .with_gamma(report.gamma_selected)
        .with_lambda(report.lambda_selected);
    let mut model = train(&data, &config, &spec, settings.sparse)?.with_tuning(report);
    model.label_column = Some(label_name);

    let support: Vec<String> = model.w.support().iter().map(|j| (j + 1).to_string()).collect();
    println!("weights = {:?}", model.w.as_array().to_vec());
    println!("nonzero features = [{}]", support.join(", "));
    println!("training error = {}", error_rate(&model, &data)?);
    if model.degenerate {
        log::warn!("the fitted model is degenerate: both class centroids coincide");
    }
    if let Some(path) = &settings.model_out {
        dataio::save_model(&model, path).with_context(|| format!("writing {}", path.display()))?;
        println!("model written to {}", path.display());
    }
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let settings = resolve(&args.tuning, None)?;
    let (data, _) = load_training(&settings)?;
    let report = run_tuning(&settings, &data)?;
    print_report(&report);
    dataio::save_report(&report, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = dataio::load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let table = dataio::read_table(&args.data, b',', true)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let label_pos = model
        .label_column
        .as_ref()
        .and_then(|name| table.find_column(&LabelColumn::Name(name.clone())));
    let shown = args.data.display().to_string();
    let x = table.features(label_pos, &shown)?;
    if x.ncols() != model.p() {
        bail!(
            "{shown} has {} feature columns, the model expects {}",
            x.ncols(),
            model.p()
        );
    }
    let projections = model.project_all(x.view())?;
    let predicted = projections
        .iter()
        .map(|&v| Ok(model.class_labels[model.class_of_projection(v)?].clone()))
        .collect::<Result<Vec<String>>>()?;
    dataio::write_predictions(&predicted, &projections, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("{} predictions written to {}", predicted.len(), args.out.display());

    if let Some(j) = label_pos {
        let wrong = table
            .rows
            .iter()
            .zip(&predicted)
            .filter(|(row, p)| row[j] != **p)
            .count();
        println!("error rate = {}", wrong as f64 / predicted.len() as f64);
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<bool> {
    let mut config = BenchmarkConfig::new(args.model, args.replications, args.seed);
    config.compare_gcv = args.compare_gcv;
    let report = benchmark::run_benchmark(&config)?;
    benchmark::save_benchmark(&report, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;

    for method in config.methods() {
        if let Some(m) = report.summary.method(method) {
            println!(
                "{method}: mean error {:.4} (sd {:.4}) over {} replications",
                m.mean_error, m.std_error, m.replications
            );
            println!("  selection frequency {:?}", m.selection_frequency);
            println!("  mean |w_j|          {:?}", m.mean_abs_weight);
        }
    }
    if args.compare_gcv {
        let stab = report.rows_for(Method::SparseKos).map(|r| r.gamma);
        let gcv = report.rows_for(Method::SparseKosGcv).map(|r| r.gamma);
        let smaller = stab.zip(gcv).filter(|(s, g)| g < s).count();
        println!("gcv gamma smaller than stabilization gamma in {smaller} replications");
    }
    let failed = report.summary.failed.len();
    if failed > 0 {
        println!("{failed} of {} replications failed", args.replications);
    }
    println!("report written to {}", args.out.display());
    Ok(!report.exceeds_failure_budget())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::Fit(a) => cmd_fit(a).map(|_| true),
        Command::Predict(a) => cmd_predict(a).map(|_| true),
        Command::Tune(a) => cmd_tune(a).map(|_| true),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: more than 10% of the replications failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
