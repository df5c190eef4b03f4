//! End-to-end experiment runner: normalize, encode, boost, evaluate.
//!
//! Every random choice in a run is drawn from a sub-seed derived from the
//! base seed by a fixed label (`split`, `ae`, `boost`, `similarity`), so a
//! sweep that changes one setting leaves all other random draws untouched.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{Activation, AutoencoderConfig, AutoencoderFile, AutoencoderModel};
use crate::boost::{self, BoostConfig, BoostedModel};
use crate::data::{self, CsvOptions, Dataset, SplitSpec, SynthSpec};
use crate::error::{Error, Result};
use crate::metrics::{self, Evaluation};
use crate::normalize::{self, FeatureStats, NormalizationMethod};
use crate::rng::derive_seed;
use crate::similarity::{self, HypothesisCheck, SimilarityReport, DEFAULT_PAIR_BUDGET};

pub const DEFAULT_TRAIN_FRACTIONS: [f64; 5] = [0.60, 0.70, 0.80, 0.90, 0.95];

pub fn default_hidden_sizes() -> Vec<usize> {
    (30..=200).step_by(10).collect()
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub num_subjects: Option<usize>,
}

/// Exactly one source of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(CsvSource),
    Synth(SynthSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv(src) => data::load_csv_with(
                &src.path,
                CsvOptions {
                    num_classes: src.num_classes,
                    num_subjects: src.num_subjects,
                },
            ),
            DataSource::Synth(spec) => data::synth_generate(spec),
        }
    }
}

/// Autoencoder settings; the input width comes from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSettings {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub iterations: usize,
    pub batch_size: Option<usize>,
    pub activation: Activation,
}

impl Default for AutoencoderSettings {
    fn default() -> Self {
        let c = AutoencoderConfig::new(1, 121);
        Self {
            hidden_dim: c.hidden_dim,
            learning_rate: c.learning_rate,
            rmsprop_decay: c.rmsprop_decay,
            rmsprop_epsilon: c.rmsprop_epsilon,
            iterations: c.iterations,
            batch_size: c.batch_size,
            activation: c.activation,
        }
    }
}

impl AutoencoderSettings {
    fn config(&self, input_dim: usize, seed: u64) -> AutoencoderConfig {
        AutoencoderConfig {
            input_dim,
            hidden_dim: self.hidden_dim,
            learning_rate: self.learning_rate,
            rmsprop_decay: self.rmsprop_decay,
            rmsprop_epsilon: self.rmsprop_epsilon,
            iterations: self.iterations,
            batch_size: self.batch_size,
            activation: self.activation,
            seed,
        }
    }
}

/// Boosting settings; the class count comes from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostSettings {
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub num_rounds: usize,
}

impl Default for BoostSettings {
    fn default() -> Self {
        let c = BoostConfig::new(1);
        Self {
            eta: c.eta,
            gamma: c.gamma,
            lambda: c.lambda,
            max_depth: c.max_depth,
            subsample: c.subsample,
            num_rounds: c.num_rounds,
        }
    }
}

impl BoostSettings {
    fn config(&self, num_class: usize, seed: u64) -> BoostConfig {
        BoostConfig {
            eta: self.eta,
            gamma: self.gamma,
            lambda: self.lambda,
            max_depth: self.max_depth,
            subsample: self.subsample,
            num_class,
            num_rounds: self.num_rounds,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// All three methods.
    Normalization,
    TrainFraction(Vec<f64>),
    HiddenSize(Vec<usize>),
}

impl Sweep {
    pub fn axis_name(&self) -> &'static str {
        match self {
            Sweep::Normalization => "normalization",
            Sweep::TrainFraction(_) => "train_fraction",
            Sweep::HiddenSize(_) => "hidden_size",
        }
    }
}

fn default_normalization() -> NormalizationMethod {
    NormalizationMethod::ZScore
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_repeats() -> usize {
    1
}

fn default_pair_budget() -> usize {
    DEFAULT_PAIR_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_normalization")]
    pub normalization: NormalizationMethod,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub autoencoder: AutoencoderSettings,
    #[serde(default)]
    pub boost: BoostSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Repetitions per sweep point; repetition 0 uses the base seed itself.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            normalization: default_normalization(),
            train_fraction: default_train_fraction(),
            autoencoder: AutoencoderSettings::default(),
            boost: BoostSettings::default(),
            output_dir: default_output_dir(),
            sweep: None,
            repeats: default_repeats(),
            seed: 0,
            pair_budget: default_pair_budget(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if self.pair_budget == 0 {
            return Err(Error::Config("pair_budget must be positive".into()));
        }
        match &self.sweep {
            Some(Sweep::TrainFraction(v)) if v.is_empty() => {
                return Err(Error::Config("train_fraction sweep list is empty".into()))
            }
            Some(Sweep::HiddenSize(v)) if v.is_empty() => {
                return Err(Error::Config("hidden_size sweep list is empty".into()))
            }
            _ => {}
        }
        if let DataSource::Synth(spec) = &self.data {
            spec.validate()?;
        }
        // Dimension-free checks of the model settings.
        self.autoencoder.config(1, 0).validate()?;
        self.boost.config(1, 0).validate()
    }
}

// ---------------------------------------------------------------------------
// Single run
// ---------------------------------------------------------------------------

/// Sub-seeds of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub base: u64,
    pub split: u64,
    pub autoencoder: u64,
    pub boost: u64,
}

impl RunSeeds {
    pub fn from_base(base: u64) -> Self {
        Self {
            base,
            split: derive_seed(base, "split"),
            autoencoder: derive_seed(base, "ae"),
            boost: derive_seed(base, "boost"),
        }
    }

    /// Seeds of repetition `r`; repetition 0 is the base seed itself.
    pub fn repetition(base: u64, r: usize) -> Self {
        if r == 0 {
            Self::from_base(base)
        } else {
            Self::from_base(derive_seed(base, &format!("repeat/{r}")))
        }
    }
}

/// The knobs a single pipeline run depends on, apart from data and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub normalization: NormalizationMethod,
    pub train_fraction: f64,
    pub autoencoder: AutoencoderSettings,
    pub boost: BoostSettings,
}

impl RunSettings {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            normalization: cfg.normalization,
            train_fraction: cfg.train_fraction,
            autoencoder: cfg.autoencoder.clone(),
            boost: cfg.boost.clone(),
        }
    }
}

/// Everything fitted on the training split.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub normalization: NormalizationMethod,
    pub stats: FeatureStats,
    pub autoencoder: AutoencoderModel,
    pub boost: BoostedModel,
    pub train_reconstruction_error: f64,
}

impl TrainedModels {
    pub fn stats_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct NormFile<'a> {
            method: NormalizationMethod,
            stats: &'a FeatureStats,
        }
        Ok(serde_json::to_string_pretty(&NormFile {
            method: self.normalization,
            stats: &self.stats,
        })?)
    }

    pub fn autoencoder_json(&self) -> Result<String> {
        let file: AutoencoderFile = self.autoencoder.to_file();
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn boost_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.boost)?)
    }

    /// Normalize, encode and classify.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<boost::Prediction>> {
        let normalized =
            normalize::apply(self.normalization, &self.stats, ds).map_err(Error::at_stage("normalize"))?;
        let encoded = self
            .autoencoder
            .encode(&normalized)
            .map_err(Error::at_stage("encode"))?;
        self.boost
            .predict_dataset(&encoded)
            .map_err(Error::at_stage("predict"))
    }
}

/// Fit normalization, autoencoder and boosting on `train` alone.
pub fn train_models(train: &Dataset, settings: &RunSettings, seeds: RunSeeds) -> Result<TrainedModels> {
    let stats = normalize::fit(train).map_err(Error::at_stage("normalize"))?;
    let train_norm =
        normalize::apply(settings.normalization, &stats, train).map_err(Error::at_stage("normalize"))?;

    let ae_config = settings.autoencoder.config(train.dims(), seeds.autoencoder);
    let autoencoder = AutoencoderModel::init(ae_config)
        .and_then(|m| m.train(&train_norm))
        .map_err(Error::at_stage("autoencoder"))?;
    let train_reconstruction_error = autoencoder
        .reconstruction_error(&train_norm)
        .map_err(Error::at_stage("autoencoder"))?;
    let train_code = autoencoder
        .encode(&train_norm)
        .map_err(Error::at_stage("encode"))?;

    let boost_config = settings.boost.config(train.num_classes(), seeds.boost);
    let boost = boost::train(&train_code, &boost_config).map_err(Error::at_stage("boost"))?;
    Ok(TrainedModels {
        normalization: settings.normalization,
        stats,
        autoencoder,
        boost,
        train_reconstruction_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dims: usize,
    pub num_classes: usize,
    pub num_subjects: usize,
    pub train_class_histogram: Vec<usize>,
    pub test_class_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSummary {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub final_loss: Option<f64>,
    pub train_reconstruction_error: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSummary {
    pub num_rounds: usize,
    pub num_trees: usize,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Most frequent training class (lowest id on ties).
    pub majority_class: usize,
    pub majority_accuracy: f64,
}

/// `report.json`. Contains no timings, so identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub settings: RunSettings,
    pub seeds: RunSeeds,
    pub data: DataSummary,
    pub autoencoder: AutoencoderSummary,
    pub boost: BoostSummary,
    pub baseline: Baseline,
    pub evaluation: Evaluation,
}

impl EvaluationReport {
    pub fn accuracy(&self) -> f64 {
        self.evaluation.accuracy
    }

    pub fn test_error(&self) -> f64 {
        self.evaluation.test_error
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of one run, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub models: TrainedModels,
    pub report: EvaluationReport,
    /// Wall time of model fitting; informational only and never in the report.
    pub train_seconds: f64,
}

/// Train on `train`, evaluate on `test`.
pub fn run_on_split(
    train: &Dataset,
    test: &Dataset,
    settings: &RunSettings,
    seeds: RunSeeds,
) -> Result<RunOutcome> {
    if test.is_empty() {
        return Err(Error::Stage {
            stage: "split",
            source: Box::new(Error::InsufficientData("empty test set".into())),
        });
    }
    let started = Instant::now();
    let models = train_models(train, settings, seeds)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let predictions = models.predict(test)?;
    let labels = test.labels();
    let predicted: Vec<usize> = predictions.iter().map(|p| p.label).collect();
    let probabilities: Vec<Vec<f64>> = predictions.into_iter().map(|p| p.probabilities).collect();
    let k = train.num_classes();
    let evaluation = metrics::evaluate(&predicted, &probabilities, &labels, k, test.len() as u64)
        .map_err(Error::at_stage("evaluate"))?;

    let train_hist = data::class_histogram(train);
    let majority_class = boost::argmax(&train_hist.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let majority_accuracy =
        labels.iter().filter(|&&y| y == majority_class).count() as f64 / labels.len() as f64;

    let report = EvaluationReport {
        settings: settings.clone(),
        seeds,
        data: DataSummary {
            n: train.len() + test.len(),
            n_train: train.len(),
            n_test: test.len(),
            dims: train.dims(),
            num_classes: k,
            num_subjects: train.num_subjects(),
            train_class_histogram: train_hist,
            test_class_histogram: data::class_histogram(test),
        },
        autoencoder: AutoencoderSummary {
            input_dim: models.autoencoder.input_dim(),
            hidden_dim: models.autoencoder.hidden_dim(),
            final_loss: models.autoencoder.loss_history.last().copied(),
            train_reconstruction_error: models.train_reconstruction_error,
            loss_history: models.autoencoder.loss_history.clone(),
        },
        boost: BoostSummary {
            num_rounds: models.boost.trees.len(),
            num_trees: models.boost.num_trees(),
            loss_history: models.boost.loss_history.clone(),
        },
        baseline: Baseline {
            majority_class,
            majority_accuracy,
        },
        evaluation,
    };
    Ok(RunOutcome {
        models,
        report,
        train_seconds,
    })
}

/// Split `ds` with the run's split seed, then [`run_on_split`].
pub fn run_on_dataset(ds: &Dataset, settings: &RunSettings, seeds: RunSeeds) -> Result<RunOutcome> {
    let (train, test) = data::split(
        ds,
        SplitSpec {
            train_fraction: settings.train_fraction,
            seed: seeds.split,
        },
    )
    .map_err(Error::at_stage("split"))?;
    run_on_split(&train, &test, settings, seeds)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Stage {
        stage: "write",
        source: Box::new(Error::Io(e)),
    })
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Stage {
            stage: "write",
            source: Box::new(Error::Io(e)),
        })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Stage {
        stage: "write",
        source: Box::new(Error::Io(e)),
    })
}

/// Write `report.json`, `confusion.csv`, `roc.csv` and the three model files.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("report.json"), &outcome.report.to_json()?)?;
    write_file(&dir.join("norm_stats.json"), &outcome.models.stats_json()?)?;
    write_file(&dir.join("model_ae.json"), &outcome.models.autoencoder_json()?)?;
    write_file(&dir.join("model_gbt.json"), &outcome.models.boost_json()?)?;
    metrics::write_confusion_csv(
        &outcome.report.evaluation.confusion,
        create_file(&dir.join("confusion.csv"))?,
    )
    .map_err(Error::at_stage("write"))?;
    metrics::write_roc_csv(&outcome.report.evaluation.roc, create_file(&dir.join("roc.csv"))?)
        .map_err(Error::at_stage("write"))?;
    Ok(())
}

/// Load the data, run once with the base seed and write all artifacts.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let ds = cfg.data.load().map_err(Error::at_stage("load"))?;
    let outcome = run_on_dataset(&ds, &RunSettings::of(cfg), RunSeeds::from_base(cfg.seed))?;
    write_outcome(&outcome, &cfg.output_dir)?;
    Ok(outcome.report)
}

// ---------------------------------------------------------------------------
// Similarity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityOutcome {
    pub report: SimilarityReport,
    pub hypotheses: HypothesisCheck,
    pub inter_person_applicable: bool,
}

pub fn similarity_on_dataset(ds: &Dataset, pair_budget: usize, seed: u64) -> Result<SimilarityOutcome> {
    let report = similarity::similarity_report(ds, pair_budget, derive_seed(seed, "similarity"))
        .map_err(Error::at_stage("similarity"))?;
    let hypotheses = similarity::check_hypotheses(&report);
    Ok(SimilarityOutcome {
        inter_person_applicable: report.inter_person.is_some(),
        report,
        hypotheses,
    })
}

/// Writes `similarity_inter_class.csv`, `similarity_inter_person.csv` (when
/// there is more than one subject) and `similarity_report.json`.
pub fn run_similarity(cfg: &ExperimentConfig) -> Result<SimilarityOutcome> {
    cfg.validate()?;
    let ds = cfg.data.load().map_err(Error::at_stage("load"))?;
    let outcome = similarity_on_dataset(&ds, cfg.pair_budget, cfg.seed)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    similarity::write_inter_class_csv(
        &outcome.report.inter_class,
        create_file(&dir.join("similarity_inter_class.csv"))?,
    )
    .map_err(Error::at_stage("write"))?;
    if let Some(section) = &outcome.report.inter_person {
        similarity::write_inter_person_csv(section, create_file(&dir.join("similarity_inter_person.csv"))?)
            .map_err(Error::at_stage("write"))?;
    }
    write_file(
        &dir.join("similarity_report.json"),
        &serde_json::to_string_pretty(&outcome)?,
    )?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub repetition: usize,
    pub base_seed: u64,
    pub test_error: Option<f64>,
    pub train_seconds: Option<f64>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: String,
    pub runs: Vec<SweepRun>,
    /// Mean over successful repetitions.
    pub test_error: Option<f64>,
    /// Sample standard deviation over successful repetitions (0 for one).
    pub test_error_std: Option<f64>,
    pub train_seconds: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: String,
    pub repeats: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepSummary {
    /// Index of the point with the lowest mean test error (first on ties).
    pub fn best_point(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            if let Some(e) = p.test_error {
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((i, e));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Index of the lowest-error point within repetition `r`.
    pub fn best_point_in(&self, r: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            if let Some(e) = p.runs.get(r).and_then(|run| run.test_error) {
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((i, e));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

fn sweep_points(cfg: &ExperimentConfig, sweep: &Sweep) -> Vec<(String, RunSettings)> {
    let base = RunSettings::of(cfg);
    match sweep {
        Sweep::Normalization => NormalizationMethod::ALL
            .iter()
            .map(|&m| {
                let mut s = base.clone();
                s.normalization = m;
                (m.name().to_string(), s)
            })
            .collect(),
        Sweep::TrainFraction(fractions) => fractions
            .iter()
            .map(|&f| {
                let mut s = base.clone();
                s.train_fraction = f;
                (f.to_string(), s)
            })
            .collect(),
        Sweep::HiddenSize(sizes) => sizes
            .iter()
            .map(|&m| {
                let mut s = base.clone();
                s.autoencoder.hidden_dim = m;
                (m.to_string(), s)
            })
            .collect(),
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Run every point of a sweep on an in-memory dataset. Failures are recorded
/// per run and do not stop the sweep. When `out` is given, each successful
/// run's artifacts go to `out/points/<axis_value>/rep<r>/`.
pub fn sweep_on_dataset(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    sweep: &Sweep,
    out: Option<&Path>,
) -> Result<SweepSummary> {
    let mut points = Vec::new();
    for (axis_value, settings) in sweep_points(cfg, sweep) {
        let mut runs = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let seeds = RunSeeds::repetition(cfg.seed, r);
            let run = match run_on_dataset(ds, &settings, seeds) {
                Ok(outcome) => {
                    if let Some(out) = out {
                        let dir = out.join("points").join(&axis_value).join(format!("rep{r}"));
                        write_outcome(&outcome, &dir)?;
                    }
                    SweepRun {
                        repetition: r,
                        base_seed: seeds.base,
                        test_error: Some(outcome.report.test_error()),
                        train_seconds: Some(outcome.train_seconds),
                        n_train: Some(outcome.report.data.n_train),
                        n_test: Some(outcome.report.data.n_test),
                        error: None,
                    }
                }
                Err(e) => SweepRun {
                    repetition: r,
                    base_seed: seeds.base,
                    test_error: None,
                    train_seconds: None,
                    n_train: None,
                    n_test: None,
                    error: Some(e.to_string()),
                },
            };
            runs.push(run);
        }
        let errors: Vec<f64> = runs.iter().filter_map(|r| r.test_error).collect();
        let seconds: Vec<f64> = runs.iter().filter_map(|r| r.train_seconds).collect();
        let (test_error, test_error_std) = mean_std(&errors);
        points.push(SweepPoint {
            axis_value,
            test_error,
            test_error_std,
            train_seconds: mean_std(&seconds).0,
            failures: runs.iter().filter(|r| r.error.is_some()).count(),
            runs,
        });
    }
    Ok(SweepSummary {
        axis: sweep.axis_name().to_string(),
        repeats: cfg.repeats,
        points,
    })
}

/// `axis_value,test_error,train_seconds,test_error_std,n_train,n_test,repeats,failures`
pub fn write_sweep_csv<W: std::io::Write>(summary: &SweepSummary, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "axis_value",
        "test_error",
        "train_seconds",
        "test_error_std",
        "n_train",
        "n_test",
        "repeats",
        "failures",
    ])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for p in &summary.points {
        let first_ok = p.runs.iter().find(|r| r.error.is_none());
        w.write_record([
            p.axis_value.clone(),
            opt(p.test_error),
            opt(p.train_seconds),
            opt(p.test_error_std),
            first_ok
                .and_then(|r| r.n_train)
                .map(|v| v.to_string())
                .unwrap_or_default(),
            first_ok
                .and_then(|r| r.n_test)
                .map(|v| v.to_string())
                .unwrap_or_default(),
            summary.repeats.to_string(),
            p.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Load the data, run the configured sweep and write `sweep_summary.csv`,
/// `sweep_summary.json` and per-point artifacts.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no sweep axis configured".into()))?;
    let ds = cfg.data.load().map_err(Error::at_stage("load"))?;
    ensure_dir(&cfg.output_dir)?;
    let summary = sweep_on_dataset(&ds, cfg, sweep, Some(&cfg.output_dir))?;
    write_sweep_csv(&summary, create_file(&cfg.output_dir.join("sweep_summary.csv"))?)
        .map_err(Error::at_stage("write"))?;
    write_file(
        &cfg.output_dir.join("sweep_summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
