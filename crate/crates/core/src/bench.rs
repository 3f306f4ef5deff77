//! Repeated train/test split experiments comparing survival models.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{censoring_km, coxph_fit, km::KaplanMeierModel, CoxConfig};
use crate::curve::SurvivalCurve;
use crate::data::{default_num_intervals, load_csv, make_time_grid, quantile_sorted, train_test_split, CsvSchema, GridStrategy, SurvivalDataset};
use crate::error::{Result, SurvError};
use crate::metrics::{c_index, evaluation_grid, integrated_brier, ipcw_horizon, weighted_brier};
use crate::model::SurvivalModel;
use crate::mtlr::{mtlr_fit, MtlrConfig};
use crate::nmtlr::{nmtlr_fit, NmtlrConfig};
use crate::rng;
use crate::simulate::{generate, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Simulated(SimConfig),
    Csv { path: PathBuf, schema: CsvSchema },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Coxph(CoxConfig),
    Mtlr(MtlrConfig),
    Nmtlr(NmtlrConfig),
    /// Population Kaplan-Meier curve with a constant risk score.
    KaplanMeier,
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Coxph(_) => "CoxPH",
            ModelSpec::Mtlr(_) => "MTLR",
            ModelSpec::Nmtlr(_) => "N-MTLR",
            ModelSpec::KaplanMeier => "KM",
        }
    }

    /// Label used to derive the per-model seed.
    pub fn key(&self) -> &'static str {
        match self {
            ModelSpec::Coxph(_) => "coxph",
            ModelSpec::Mtlr(_) => "mtlr",
            ModelSpec::Nmtlr(_) => "nmtlr",
            ModelSpec::KaplanMeier => "kaplan_meier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to `max(3, ceil(sqrt(training events)))`, capped at 100.
    pub num_intervals: Option<usize>,
    pub strategy: GridStrategy,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { num_intervals: None, strategy: GridStrategy::Quantile }
    }
}

fn default_repetitions() -> usize {
    50
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_ibs_points() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ibs_points")]
    pub ibs_points: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SurvError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SurvError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(SurvError::Config("repetitions must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(SurvError::Config("at least one model is required".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(SurvError::Config("test_fraction must lie in (0,1)".into()));
        }
        if self.ibs_points < 2 {
            return Err(SurvError::Config("ibs_points must be at least 2".into()));
        }
        if matches!(self.grid.num_intervals, Some(k) if k < 2) {
            return Err(SurvError::Config("grid.num_intervals must be at least 2".into()));
        }
        Ok(())
    }

    /// Load or generate the dataset; CSV paths are resolved against `base_dir`.
    pub fn load_data(&self, base_dir: &Path) -> Result<SurvivalDataset> {
        match &self.data {
            DataSource::Simulated(sim) => generate(sim),
            DataSource::Csv { path, schema } => {
                let path = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                Ok(load_csv(path, schema)?.dataset)
            }
        }
    }
}

/// Boxplot and dispersion summary of per-repetition values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean: f64,
    /// Sample standard deviation over repetitions divided by sqrt(count).
    pub std_error: f64,
    pub count: usize,
}

impl SummaryStats {
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of no values");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let median = quantile_sorted(&sorted, 0.5);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let whisker_low = sorted.iter().copied().find(|v| *v >= lo_fence).unwrap_or(sorted[0]);
        let whisker_high = sorted.iter().rev().copied().find(|v| *v <= hi_fence).unwrap_or(sorted[sorted.len() - 1]);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_error = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self { median, q1, q3, whisker_low, whisker_high, mean, std_error, count: values.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Splits contributing to each mean; later times fall past the
    /// censoring horizon of some splits.
    pub count: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub c_index: SummaryStats,
    pub ibs: SummaryStats,
    pub brier_curve: BrierCurve,
    pub raw_c_index: Vec<f64>,
    pub raw_ibs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRepetition {
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub protocol: String,
    pub num_rows: usize,
    pub event_rate: f64,
    pub repetitions: usize,
    pub completed: usize,
    pub skipped: Vec<SkippedRepetition>,
    pub models: Vec<ModelReport>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn model(&self, label: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `time,<model>...` rows of the mean Brier curves.
    pub fn brier_csv(&self) -> String {
        let mut out = String::from("time");
        for m in &self.models {
            out.push(',');
            out.push_str(&m.model);
        }
        out.push('\n');
        if let Some(first) = self.models.first() {
            for (i, t) in first.brier_curve.times.iter().enumerate() {
                out.push_str(&t.to_string());
                for m in &self.models {
                    out.push(',');
                    out.push_str(&m.brier_curve.mean[i].to_string());
                }
                out.push('\n');
            }
        }
        out
    }

    /// Model / C-index (std. error) / IBS (std. error) table.
    pub fn table(&self) -> String {
        let mut out = format!("{} ({} of {} splits)\n", self.name, self.completed, self.repetitions);
        out.push_str(&format!("{:<8} {:<24} {:<24}\n", "Model", "C-Index (std. error)", "IBS (std. error)"));
        for m in &self.models {
            out.push_str(&format!(
                "{:<8} {:<24} {:<24}\n",
                m.model,
                format!("{:.2} ({:.1e})", m.c_index.median, m.c_index.std_error),
                format!("{:.2} ({:.1e})", m.ibs.mean, m.ibs.std_error),
            ));
        }
        out
    }
}

/// One model's scores on one split.
#[derive(Debug, Clone)]
pub struct SplitScores {
    pub c_index: f64,
    pub ibs: f64,
    /// Brier scores at the shared curve times; `None` past this split's
    /// censoring horizon.
    pub curve: Vec<Option<f64>>,
}

/// Brier scores of `model` on `test` at `times`, weighting with `censor`.
pub fn brier_curve(
    model: &dyn SurvivalModel,
    test: &SurvivalDataset,
    censor: &SurvivalCurve,
    times: &[f64],
) -> Result<Vec<f64>> {
    let surv = model.survival_matrix(&test.features, times);
    times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let col = surv.column(j).to_vec();
            weighted_brier(t, &test.times, &test.events, &col, censor)
        })
        .collect()
}

pub fn fit_model(spec: &ModelSpec, train: &SurvivalDataset, grid_cfg: &GridConfig, seed: u64) -> Result<Box<dyn SurvivalModel>> {
    let grid = || {
        let k = grid_cfg.num_intervals.unwrap_or_else(|| default_num_intervals(train.num_events()));
        make_time_grid(&train.times, &train.events, k, grid_cfg.strategy)
    };
    Ok(match spec {
        ModelSpec::Coxph(cfg) => Box::new(coxph_fit(train, cfg)?),
        ModelSpec::Mtlr(cfg) => {
            let cfg = MtlrConfig { seed: rng::derive_seed(seed, "mtlr"), ..cfg.clone() };
            Box::new(mtlr_fit(train, &grid()?, &cfg)?)
        }
        ModelSpec::Nmtlr(cfg) => {
            let mut cfg = cfg.clone();
            cfg.training.seed = rng::derive_seed(seed, "nmtlr");
            Box::new(nmtlr_fit(train, &grid()?, &cfg)?)
        }
        ModelSpec::KaplanMeier => Box::new(KaplanMeierModel::fit(train, train.num_features())),
    })
}

/// Held-out scores of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub c_index: f64,
    pub ibs: f64,
    /// Evaluation grid on `[0, min(max test time, censoring horizon)]`.
    pub times: Vec<f64>,
    pub brier: Vec<f64>,
}

/// C-index, Brier curve and IBS of `model` on `test`, with censoring
/// weights estimated from `train`.
pub fn evaluate_model(
    model: &dyn SurvivalModel,
    test: &SurvivalDataset,
    train: &SurvivalDataset,
    points: usize,
) -> Result<Evaluation> {
    let censor = censoring_km(&train.times, &train.events);
    evaluate_with_censoring(model, test, &censor, ipcw_horizon(&train.times, &censor), points)
}

fn evaluate_with_censoring(
    model: &dyn SurvivalModel,
    test: &SurvivalDataset,
    censor: &SurvivalCurve,
    horizon: f64,
    points: usize,
) -> Result<Evaluation> {
    if points < 2 {
        return Err(SurvError::InvalidInput("at least 2 evaluation points are required".into()));
    }
    let max_time = test.times.iter().copied().fold(0.0, f64::max).min(horizon);
    if max_time <= 0.0 {
        return Err(SurvError::InvalidInput("no evaluation times before the censoring horizon".into()));
    }
    let risks = model.risks(&test.features);
    let c_index = c_index(&test.times, &test.events, &risks)?;
    let times = evaluation_grid(max_time, points);
    let brier = brier_curve(model, test, censor, &times)?;
    let ibs = integrated_brier(&times, &brier)?;
    Ok(Evaluation { c_index, ibs, times, brier })
}

/// Fit every model on a train split and score it on the test split.
pub fn evaluate_split(
    config: &ExperimentConfig,
    train: &SurvivalDataset,
    test: &SurvivalDataset,
    curve_times: &[f64],
    seed: u64,
) -> Result<Vec<SplitScores>> {
    let censor = censoring_km(&train.times, &train.events);
    let horizon = ipcw_horizon(&train.times, &censor);
    let within = curve_times.partition_point(|&t| t <= horizon);
    config
        .models
        .iter()
        .map(|spec| {
            let model = fit_model(spec, train, &config.grid, rng::derive_seed(seed, spec.key()))?;
            let eval = evaluate_with_censoring(model.as_ref(), test, &censor, horizon, config.ibs_points)?;
            let mut curve: Vec<Option<f64>> =
                brier_curve(model.as_ref(), test, &censor, &curve_times[..within])?.into_iter().map(Some).collect();
            curve.resize(curve_times.len(), None);
            Ok(SplitScores { c_index: eval.c_index, ibs: eval.ibs, curve })
        })
        .collect()
}

const PROTOCOL: &str = "random train/test splits; C-index summarized by median and quartiles, IBS by mean; \
std. error = sample std over splits / sqrt(splits); censoring weights from the training split";

pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let data = config.load_data(base_dir)?;
    run_on_dataset(config, &data)
}

pub fn run_on_dataset(config: &ExperimentConfig, data: &SurvivalDataset) -> Result<ExperimentReport> {
    config.validate()?;
    data.require_events()?;
    let max_time = data.times.iter().copied().fold(0.0, f64::max);
    let curve_times = evaluation_grid(max_time, config.ibs_points);

    let outcomes: Vec<Result<Vec<SplitScores>>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = rng::derive_indexed(config.seed, "rep", r as u64);
            let (train, test) = train_test_split(data, config.test_fraction, seed)?;
            evaluate_split(config, &train, &test, &curve_times, seed)
        })
        .collect();

    let mut skipped = Vec::new();
    let mut per_model: Vec<Vec<SplitScores>> = vec![Vec::new(); config.models.len()];
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(scores) => {
                for (m, s) in scores.into_iter().enumerate() {
                    per_model[m].push(s);
                }
            }
            Err(e) => {
                log::warn!("repetition {r} skipped: {e}");
                skipped.push(SkippedRepetition { repetition: r, error: e.to_string() });
            }
        }
    }
    let completed = config.repetitions - skipped.len();
    if completed == 0 || skipped.len() * 5 > config.repetitions {
        return Err(SurvError::TooManyFailures { failed: skipped.len(), total: config.repetitions });
    }

    let models = config
        .models
        .iter()
        .zip(per_model)
        .map(|(spec, scores)| {
            let raw_c_index: Vec<f64> = scores.iter().map(|s| s.c_index).collect();
            let raw_ibs: Vec<f64> = scores.iter().map(|s| s.ibs).collect();
            let mut times = Vec::new();
            let mut mean = Vec::new();
            let mut count = Vec::new();
            for (j, &t) in curve_times.iter().enumerate() {
                let vals: Vec<f64> = scores.iter().filter_map(|s| s.curve[j]).collect();
                if !vals.is_empty() {
                    times.push(t);
                    mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
                    count.push(vals.len());
                }
            }
            ModelReport {
                model: spec.label().to_string(),
                c_index: SummaryStats::from_values(&raw_c_index),
                ibs: SummaryStats::from_values(&raw_ibs),
                brier_curve: BrierCurve { times, mean, count },
                raw_c_index,
                raw_ibs,
            }
        })
        .collect();

    Ok(ExperimentReport {
        name: config.name.clone(),
        seed: config.seed,
        protocol: format!("{} {PROTOCOL}", config.repetitions),
        num_rows: data.len(),
        event_rate: data.event_rate(),
        repetitions: config.repetitions,
        completed,
        skipped,
        models,
        config: config.clone(),
    })
}
