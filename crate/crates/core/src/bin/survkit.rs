use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use survkit::bench::{evaluate_model, run_experiment, ExperimentConfig};
use survkit::classic::coxph_fit;
use survkit::data::{default_num_intervals, load_csv, load_csv_with_encoding, make_time_grid};
use survkit::error::SurvError;
use survkit::model_file::{FittedModel, ModelFile, ModelKind, TrainFileConfig};
use survkit::mtlr::mtlr_fit;
use survkit::nmtlr::nmtlr_fit;
use survkit::simulate::{generate, RiskKind, SimConfig};

#[derive(Parser)]
#[command(name = "survkit", version, about = "Survival models (CoxPH, MTLR, N-MTLR) and censoring-aware evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic censored dataset as CSV (x1,x2,x3,time,event).
    Simulate {
        #[arg(long, value_parser = parse_risk)]
        risk: RiskKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Target fraction of observed events.
        #[arg(long, default_value_t = 0.4)]
        event_rate: f64,
    },
    /// Fit a model on a CSV dataset and write a model file.
    Train {
        #[arg(long, value_parser = parse_model_kind)]
        model: ModelKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model file on a dataset (C-index, IBS, Brier curve).
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Training data, used for the censoring distribution.
        #[arg(long)]
        train_data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Run a repeated-split model comparison from an experiment config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_risk(s: &str) -> Result<RiskKind, String> {
    s.parse()
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<SurvError> for Failure {
    fn from(e: SurvError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn simulate(risk: RiskKind, n: usize, seed: u64, out: &Path, event_rate: f64) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    if !(event_rate > 0.0 && event_rate < 1.0) {
        return Err(Failure::Usage("--event-rate must lie in (0,1)".into()));
    }
    let mut cfg = SimConfig::new(n, risk, seed);
    cfg.target_event_rate = event_rate;
    let data = generate(&cfg)?;
    let mut csv = String::from("x1,x2,x3,time,event\n");
    for i in 0..data.len() {
        let x = data.row(i);
        csv.push_str(&format!("{},{},{},{},{}\n", x[0], x[1], x[2], data.times[i], u8::from(data.events[i])));
    }
    write_file(out, &csv)?;
    let mut sorted = data.times.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    println!(
        "{}",
        json!({
            "n": data.len(),
            "event_rate": data.event_rate(),
            "time_quantiles": {"min": q(0.0), "q25": q(0.25), "median": q(0.5), "q75": q(0.75), "max": q(1.0)},
        })
    );
    Ok(())
}

fn train(kind: ModelKind, data: &Path, config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = TrainFileConfig::from_path(config).map_err(|e| Failure::Usage(e.to_string()))?;
    let loaded = load_csv(data, &cfg.schema)?;
    let ds = &loaded.dataset;
    let grid = || {
        let k = cfg.grid.num_intervals.unwrap_or_else(|| default_num_intervals(ds.num_events()));
        make_time_grid(&ds.times, &ds.events, k, cfg.grid.strategy)
    };
    let model = match kind {
        ModelKind::Coxph => FittedModel::Coxph(coxph_fit(ds, &cfg.coxph)?),
        ModelKind::Mtlr => FittedModel::Mtlr(mtlr_fit(ds, &grid()?, &cfg.mtlr)?),
        ModelKind::Nmtlr => FittedModel::Nmtlr(nmtlr_fit(ds, &grid()?, &cfg.nmtlr)?),
    };
    println!("{}", model.summary());
    ModelFile::new(model, Some(loaded.encoding)).save(out)?;
    Ok(())
}

fn evaluate(model: &Path, data: &Path, train_data: &Path, out: &Path, points: usize) -> Result<(), Failure> {
    if points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let file = ModelFile::load(model).map_err(|e| Failure::Usage(e.to_string()))?;
    let encoding = file
        .encoding
        .as_ref()
        .ok_or_else(|| Failure::Usage("model file has no CSV encoding".into()))?;
    let test = load_csv_with_encoding(data, encoding)?.dataset;
    let train = load_csv_with_encoding(train_data, encoding)?.dataset;
    let eval = evaluate_model(&file.model, &test, &train, points)?;
    let doc = json!({
        "model": file.model.kind(),
        "n": test.len(),
        "c_index": eval.c_index,
        "ibs": eval.ibs,
        "brier_curve": {"times": eval.times, "brier": eval.brier},
    });
    write_file(out, &serde_json::to_string_pretty(&doc).expect("json"))?;
    println!("{}", json!({"c_index": eval.c_index, "ibs": eval.ibs}));
    Ok(())
}

fn benchmark(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_path(config).map_err(|e| Failure::Usage(e.to_string()))?;
    cfg.validate()?;
    let base = config.parent().unwrap_or(Path::new("."));
    let report = run_experiment(&cfg, base)?;
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    write_file(&out.join(format!("{}_report.json", cfg.name)), &report.to_json())?;
    write_file(&out.join(format!("{}_brier.csv", cfg.name)), &report.brier_csv())?;
    print!("{}", report.table());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { risk, n, seed, out, event_rate } => simulate(risk, n, seed, &out, event_rate),
        Command::Train { model, data, config, out } => train(model, &data, &config, &out),
        Command::Evaluate { model, data, train_data, out, points } => evaluate(&model, &data, &train_data, &out, points),
        Command::Benchmark { config, out } => benchmark(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
