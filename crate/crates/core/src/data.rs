//! Datasets, preprocessing and MTLR target encoding.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::rng;

/// Right-censored observations `(x_i, T_i, delta_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    /// N x p covariates.
    pub features: Array2<f64>,
    /// Observed times `T_i = min(event, censoring)`.
    pub times: Vec<f64>,
    /// `true` when the event was observed.
    pub events: Vec<bool>,
    pub feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        features: Array2<f64>,
        times: Vec<f64>,
        events: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if times.len() != n {
            return Err(SurvError::Dimension { expected: n, actual: times.len() });
        }
        if events.len() != n {
            return Err(SurvError::Dimension { expected: n, actual: events.len() });
        }
        if feature_names.len() != features.ncols() {
            return Err(SurvError::Dimension {
                expected: features.ncols(),
                actual: feature_names.len(),
            });
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(SurvError::InvalidInput(format!("invalid observed time {t}")));
        }
        Ok(Self { features, times, events, feature_names })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn event_rate(&self) -> f64 {
        self.num_events() as f64 / self.len() as f64
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn require_events(&self) -> Result<()> {
        if self.num_events() == 0 {
            Err(SurvError::NoEvents)
        } else {
            Ok(())
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            times: indices.iter().map(|&i| self.times[i]).collect(),
            events: indices.iter().map(|&i| self.events[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn with_features(&self, features: Array2<f64>) -> Self {
        Self { features, ..self.clone() }
    }
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub time_column: String,
    pub event_column: String,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Columns that are neither features nor targets.
    #[serde(default)]
    pub ignore_columns: Vec<String>,
}

/// How each model feature is derived from the CSV columns. Stored in model
/// files so evaluation data is encoded exactly like the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSource {
    Numeric { column: String },
    Indicator { column: String, level: String },
}

impl FeatureSource {
    pub fn name(&self) -> String {
        match self {
            FeatureSource::Numeric { column } => column.clone(),
            FeatureSource::Indicator { column, level } => format!("{column}={level}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub schema: CsvSchema,
    pub features: Vec<FeatureSource>,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: SurvivalDataset,
    pub encoding: FeatureEncoding,
    /// Rows dropped because the time or event value was missing.
    pub dropped_rows: usize,
}

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<(usize, csv::StringRecord)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => SurvError::Io { path: path.to_path_buf(), source },
            other => SurvError::Schema(format!("{}: {other:?}", path.display())),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| SurvError::Schema(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let rec = rec.map_err(|e| SurvError::Parse { line, message: e.to_string() })?;
        rows.push((line, rec));
    }
    Ok((headers, rows))
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| SurvError::Schema(format!("missing column `{name}`")))
}

/// Load a CSV, discovering the feature encoding. Every column other than the
/// time, event and ignored columns becomes a feature; categorical columns are
/// one-hot encoded over their sorted levels with the first level dropped.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let (headers, rows) = read_records(path)?;
    column_index(&headers, &schema.time_column)?;
    column_index(&headers, &schema.event_column)?;
    for c in schema.categorical_columns.iter().chain(&schema.ignore_columns) {
        column_index(&headers, c)?;
    }

    let mut features = Vec::new();
    for (ci, h) in headers.iter().enumerate() {
        if *h == schema.time_column || *h == schema.event_column || schema.ignore_columns.contains(h) {
            continue;
        }
        if schema.categorical_columns.contains(h) {
            let levels: BTreeSet<&str> = rows
                .iter()
                .map(|(_, r)| r.get(ci).unwrap_or(""))
                .filter(|v| !is_missing(v))
                .collect();
            for level in levels.into_iter().skip(1) {
                features.push(FeatureSource::Indicator { column: h.clone(), level: level.to_string() });
            }
        } else {
            features.push(FeatureSource::Numeric { column: h.clone() });
        }
    }
    let encoding = FeatureEncoding { schema: schema.clone(), features };
    build_dataset(&headers, &rows, encoding)
}

/// Load a CSV using a previously discovered encoding. Unseen categorical
/// levels map to the dropped reference level.
pub fn load_csv_with_encoding(path: impl AsRef<Path>, encoding: &FeatureEncoding) -> Result<LoadedCsv> {
    let (headers, rows) = read_records(path.as_ref())?;
    build_dataset(&headers, &rows, encoding.clone())
}

fn build_dataset(
    headers: &[String],
    rows: &[(usize, csv::StringRecord)],
    encoding: FeatureEncoding,
) -> Result<LoadedCsv> {
    let schema = &encoding.schema;
    let time_idx = column_index(headers, &schema.time_column)?;
    let event_idx = column_index(headers, &schema.event_column)?;
    let sources: Vec<(usize, &FeatureSource)> = encoding
        .features
        .iter()
        .map(|f| {
            let col = match f {
                FeatureSource::Numeric { column } | FeatureSource::Indicator { column, .. } => column,
            };
            column_index(headers, col).map(|i| (i, f))
        })
        .collect::<Result<_>>()?;

    let p = sources.len();
    let mut values = Vec::with_capacity(rows.len() * p);
    let mut times = Vec::with_capacity(rows.len());
    let mut events = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for (line, rec) in rows {
        let line = *line;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let (t_raw, e_raw) = (get(time_idx), get(event_idx));
        if is_missing(t_raw) || is_missing(e_raw) {
            dropped += 1;
            continue;
        }
        let t: f64 = t_raw.parse().map_err(|_| SurvError::Parse {
            line,
            message: format!("time value `{t_raw}` is not a number"),
        })?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(SurvError::Parse { line, message: format!("invalid time {t_raw}") });
        }
        let e: f64 = e_raw.parse().map_err(|_| {
            SurvError::Schema(format!("line {line}: event column must hold 0 or 1, found `{e_raw}`"))
        })?;
        let event = if e == 0.0 {
            false
        } else if e == 1.0 {
            true
        } else {
            return Err(SurvError::Schema(format!(
                "line {line}: event column must hold 0 or 1, found `{e_raw}`"
            )));
        };
        for &(ci, src) in &sources {
            let raw = get(ci);
            let v = if is_missing(raw) {
                f64::NAN
            } else {
                match src {
                    FeatureSource::Numeric { column } => raw.parse().map_err(|_| SurvError::Parse {
                        line,
                        message: format!("column `{column}`: `{raw}` is not a number"),
                    })?,
                    FeatureSource::Indicator { level, .. } => {
                        if raw == level {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            };
            values.push(v);
        }
        times.push(t);
        events.push(event);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing time or event");
    }
    let n = times.len();
    let features = Array2::from_shape_vec((n, p), values).expect("row-major buffer matches shape");
    let names = encoding.features.iter().map(FeatureSource::name).collect();
    let dataset = SurvivalDataset::new(features, times, events, names)?;
    Ok(LoadedCsv { dataset, encoding, dropped_rows: dropped })
}

/// Per-column centering and scaling. Uses the population standard deviation
/// (divisor N). Zero-variance columns keep std 1 and are flagged. Missing
/// values (NaN) are ignored when fitting and imputed with the column mean
/// when transforming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl Scaler {
    pub fn fit(features: &Array2<f64>) -> Self {
        let p = features.ncols();
        let mut means = Vec::with_capacity(p);
        let mut std_devs = Vec::with_capacity(p);
        let mut zero_variance = Vec::with_capacity(p);
        for col in features.columns() {
            let present: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            let n = present.len().max(1) as f64;
            let mean = present.iter().sum::<f64>() / n;
            let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let flat = !(sd > 1e-12 * mean.abs().max(1.0));
            means.push(mean);
            std_devs.push(if flat { 1.0 } else { sd });
            zero_variance.push(flat);
        }
        Self { means, std_devs, zero_variance }
    }

    /// Scaler that leaves data unchanged.
    pub fn identity(p: usize) -> Self {
        Self { means: vec![0.0; p], std_devs: vec![1.0; p], zero_variance: vec![false; p] }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.std_devs[j]);
            col.mapv_inplace(|v| if v.is_nan() { 0.0 } else { (v - m) / s });
        }
        out
    }

    pub fn transform_row(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| if v.is_nan() { 0.0 } else { (v - self.means[j]) / self.std_devs[j] })
            .collect()
    }

    pub fn inverse_transform(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.std_devs[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        out
    }
}

/// Standardize every feature column to mean 0 and (population) std 1.
pub fn standardize(dataset: &SurvivalDataset) -> Result<(SurvivalDataset, Scaler)> {
    if dataset.len() < 2 {
        return Err(SurvError::InvalidInput("standardize needs at least 2 rows".into()));
    }
    let scaler = Scaler::fit(&dataset.features);
    for (name, flat) in dataset.feature_names.iter().zip(&scaler.zero_variance) {
        if *flat {
            log::warn!("feature `{name}` has zero variance");
        }
    }
    Ok((dataset.with_features(scaler.transform(&dataset.features)), scaler))
}

/// Finite interval boundaries `tau_1 < ... < tau_K`. With the implicit
/// `tau_0 = 0` and `tau_{K+1} = inf` they define K+1 intervals
/// `[tau_{j-1}, tau_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    boundaries: Vec<f64>,
}

impl TimeGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(SurvError::InvalidInput("time grid needs at least one boundary".into()));
        }
        if boundaries.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(SurvError::InvalidInput("time grid boundaries must be finite and positive".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SurvError::InvalidInput("time grid boundaries must be strictly increasing".into()));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Number of finite boundaries K.
    pub fn num_boundaries(&self) -> usize {
        self.boundaries.len()
    }

    /// Number of intervals, K + 1.
    pub fn num_intervals(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Zero-based index of the interval containing `t` (closed on the left).
    pub fn interval_of(&self, t: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridStrategy {
    #[default]
    Quantile,
    Uniform,
}

/// Default interval count: `max(3, ceil(sqrt(events)))`, capped at 100.
pub fn default_num_intervals(num_events: usize) -> usize {
    ((num_events as f64).sqrt().ceil() as usize).clamp(3, 100)
}

/// Quantile with linear interpolation between order statistics of a sorted
/// sample.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Build `num_intervals - 1` boundaries from the uncensored times. Duplicate
/// or non-positive boundaries are removed, which can shrink the grid.
pub fn make_time_grid(
    times: &[f64],
    events: &[bool],
    num_intervals: usize,
    strategy: GridStrategy,
) -> Result<TimeGrid> {
    if num_intervals < 2 {
        return Err(SurvError::InvalidInput("num_intervals must be at least 2".into()));
    }
    let mut event_times: Vec<f64> =
        times.iter().zip(events).filter(|(_, &e)| e).map(|(&t, _)| t).collect();
    if event_times.is_empty() {
        return Err(SurvError::NoEvents);
    }
    event_times.sort_by(f64::total_cmp);
    let k = num_intervals - 1;
    let mut bounds: Vec<f64> = match strategy {
        GridStrategy::Quantile => (1..=k)
            .map(|i| quantile_sorted(&event_times, i as f64 / num_intervals as f64))
            .collect(),
        GridStrategy::Uniform => {
            let max = *event_times.last().unwrap();
            (1..=k).map(|i| max * i as f64 / num_intervals as f64).collect()
        }
    };
    bounds.retain(|b| *b > 0.0);
    bounds.dedup();
    if bounds.len() < k {
        log::warn!("time grid shrunk from {k} to {} boundaries", bounds.len());
    }
    if bounds.is_empty() {
        return Err(SurvError::InvalidInput("all event times are zero; cannot build a time grid".into()));
    }
    TimeGrid::new(bounds)
}

/// Interval membership of each observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTargets {
    /// Zero-based interval index in `0..=K`.
    pub interval: Vec<usize>,
    pub is_event: Vec<bool>,
}

impl EncodedTargets {
    pub fn len(&self) -> usize {
        self.interval.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interval.is_empty()
    }

    /// The 0/1 response vector of row `i` over all K+1 intervals: zeros before
    /// the event interval, ones from it onward.
    pub fn response(&self, i: usize, num_intervals: usize) -> Vec<u8> {
        (0..num_intervals).map(|j| u8::from(j >= self.interval[i])).collect()
    }
}

pub fn encode_targets(dataset: &SurvivalDataset, grid: &TimeGrid) -> Result<EncodedTargets> {
    encode_times(&dataset.times, &dataset.events, grid)
}

pub fn encode_times(times: &[f64], events: &[bool], grid: &TimeGrid) -> Result<EncodedTargets> {
    let interval = times
        .iter()
        .map(|&t| {
            if t < 0.0 || t.is_nan() {
                Err(SurvError::InvalidInput(format!("negative time {t}")))
            } else {
                Ok(grid.interval_of(t))
            }
        })
        .collect::<Result<_>>()?;
    Ok(EncodedTargets { interval, is_event: events.to_vec() })
}

const MAX_SPLIT_ATTEMPTS: usize = 100;

/// Row indices of a seeded train/test partition. The training part always
/// holds at least one event; the permutation is redrawn up to 100 times.
pub fn split_indices(
    events: &[bool],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = events.len();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SurvError::InvalidInput(format!("test fraction {test_fraction} not in (0,1)")));
    }
    if n < 2 {
        return Err(SurvError::InvalidInput("need at least 2 rows to split".into()));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut rng = rng::stream(seed, "train_test_split");
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_SPLIT_ATTEMPTS {
        idx.shuffle(&mut rng);
        let (test, train) = idx.split_at(n_test);
        if train.iter().any(|&i| events[i]) {
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort_unstable();
            test.sort_unstable();
            return Ok((train, test));
        }
    }
    Err(SurvError::SplitFailed { attempts: MAX_SPLIT_ATTEMPTS })
}

pub fn train_test_split(
    dataset: &SurvivalDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(SurvivalDataset, SurvivalDataset)> {
    let (train, test) = split_indices(&dataset.events, test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
