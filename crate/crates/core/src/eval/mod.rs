//! Repeated-run evaluation, feature ablation and modality comparison.

mod metrics;
pub mod report;

pub use metrics::{
    auc, binary_confusion, confusion_matrix, evaluate_scores, pair_metrics, roc_curve, ClassRoc,
    PairMetrics, RocPoint, RunReport,
};

use gaitnet::{Architecture, Model, ModelConfig, NnError, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logs::Modality;
use crate::pipeline::{Dataset, WindowSample, ORIENTATION_COLUMNS, POSITION_COLUMNS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class} has no test windows")]
    EmptyClass { class: usize },
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error("datasets come from different cohorts: {0}")]
    MismatchedCohort(String),
    #[error("every run failed; first failure: {0}")]
    AllRunsFailed(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Predicts every test window and scores the predictions.
pub fn evaluate(model: &Model, test: &[WindowSample], run_seed: u64) -> Result<RunReport> {
    let inputs: Vec<&[f64]> = test.iter().map(|w| w.data.as_slice()).collect();
    let labels: Vec<usize> = test.iter().map(|w| w.label).collect();
    let probs = model.predict(&inputs)?;
    evaluate_scores(&probs, &labels, model.config().n_classes, run_seed)
}

/// What a set of runs was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentTag {
    pub modality: Modality,
    pub window_len: usize,
    pub architecture: Architecture,
    /// `all`, `position` or `orientation`.
    pub features: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tag: ExperimentTag,
    pub n_runs: usize,
    pub runs: Vec<RunReport>,
    pub failed: Vec<FailedRun>,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_accuracy: f64,
    /// Seed of the run whose accuracy is closest to the mean; ties go to
    /// the smallest seed.
    pub closest_to_mean: u64,
    pub w_ww_restricted_accuracy: f64,
    pub w_ww_mean_recall: f64,
}

impl AggregateReport {
    pub fn closest_run(&self) -> &RunReport {
        self.runs
            .iter()
            .find(|r| r.run_seed == self.closest_to_mean)
            .expect("closest run is one of the runs")
    }

    pub fn mean_auc(&self, class: usize) -> f64 {
        self.runs.iter().map(|r| r.auc(class)).sum::<f64>() / self.runs.len() as f64
    }
}

pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seeds `base, base + 1, ...` for `n` runs.
pub fn run_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Model configuration matching a dataset's window shape.
pub fn fit_config(template: &ModelConfig, ds: &Dataset) -> ModelConfig {
    ModelConfig {
        n_features: ds.meta.n_features,
        window_len: ds.meta.window_len,
        ..template.clone()
    }
}

/// Trains a fresh model on train + validation windows.
pub fn train_model(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<Model> {
    let mut model = Model::new(fit_config(model_cfg, ds), seed)?;
    let pool: Vec<&WindowSample> = ds.train.iter().chain(&ds.val).collect();
    let inputs: Vec<&[f64]> = pool.iter().map(|w| w.data.as_slice()).collect();
    let labels: Vec<usize> = pool.iter().map(|w| w.label).collect();
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    gaitnet::train(&mut model, &inputs, &labels, &cfg)?;
    Ok(model)
}

/// Retrains once per seed on train + validation and evaluates each model on
/// the fixed test split.
pub fn repeated_runs(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
    features: &str,
) -> Result<AggregateReport> {
    if seeds.len() < 2 {
        return Err(EvalError::InvalidConfig(
            "at least two runs are required".into(),
        ));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for &seed in &seeds {
        let outcome =
            train_model(ds, model_cfg, train_cfg, seed).and_then(|m| evaluate(&m, &ds.test, seed));
        match outcome {
            Ok(r) => runs.push(r),
            Err(e @ (EvalError::EmptyClass { .. } | EvalError::InvalidConfig(_))) => return Err(e),
            Err(e) => failed.push(FailedRun {
                seed,
                error: e.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        return Err(EvalError::AllRunsFailed(failed[0].error.clone()));
    }
    let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let (mean, std) = mean_and_std(&acc);
    let closest = runs
        .iter()
        .min_by(|a, b| {
            (a.accuracy - mean)
                .abs()
                .total_cmp(&(b.accuracy - mean).abs())
                .then(a.run_seed.cmp(&b.run_seed))
        })
        .expect("non-empty")
        .run_seed;
    let n = runs.len() as f64;
    Ok(AggregateReport {
        tag: ExperimentTag {
            modality: ds.meta.modality,
            window_len: ds.meta.window_len,
            architecture: model_cfg.architecture,
            features: features.to_string(),
        },
        n_runs: seeds.len(),
        w_ww_restricted_accuracy: runs.iter().map(|r| r.w_ww.restricted_accuracy).sum::<f64>() / n,
        w_ww_mean_recall: runs.iter().map(|r| r.w_ww.mean_recall).sum::<f64>() / n,
        runs,
        failed,
        mean_accuracy: mean,
        std_accuracy: std,
        closest_to_mean: closest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub position: AggregateReport,
    pub orientation: AggregateReport,
    pub combined: AggregateReport,
}

impl AblationReport {
    /// Combined mean minus the best single-subset mean.
    pub fn combined_margin(&self) -> f64 {
        self.combined.mean_accuracy
            - self
                .position
                .mean_accuracy
                .max(self.orientation.mean_accuracy)
    }
}

/// Runs of the position-only, orientation-only and full magnetic feature
/// sets with identical seeds and hyperparameters. Convolutional models
/// drop the feature-axis pooling for the half-width subsets.
pub fn ablation(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    check_ablation_input(ds)?;
    let combined = repeated_runs(ds, model_cfg, train_cfg, seeds, "all")?;
    ablation_with_combined(ds, model_cfg, train_cfg, seeds, combined)
}

fn check_ablation_input(ds: &Dataset) -> Result<()> {
    if ds.meta.modality != Modality::Magnetic || ds.meta.n_features != 12 {
        return Err(EvalError::InvalidConfig(
            "ablation needs the 12-feature magnetic dataset".into(),
        ));
    }
    Ok(())
}

/// [`ablation`] reusing an existing full-feature report, which must have
/// been produced from `ds` with the same configuration and seeds.
pub fn ablation_with_combined(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
    combined: AggregateReport,
) -> Result<AblationReport> {
    check_ablation_input(ds)?;
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    let combined_seeds: Vec<u64> = combined
        .runs
        .iter()
        .map(|r| r.run_seed)
        .chain(combined.failed.iter().map(|f| f.seed))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    sorted.dedup();
    if combined.tag.features != "all"
        || combined.tag.architecture != model_cfg.architecture
        || combined_seeds != sorted
    {
        return Err(EvalError::InvalidConfig(
            "combined report does not match the ablation seeds and model".into(),
        ));
    }
    let subset_cfg = match model_cfg.architecture {
        Architecture::Cnn => ModelConfig {
            cnn: model_cfg.cnn.clone().with_unit_width_pools(),
            ..model_cfg.clone()
        },
        Architecture::Lstm => model_cfg.clone(),
    };
    let subset = |cols: &[usize], name: &str| -> Result<AggregateReport> {
        let sub = ds
            .select_features(cols)
            .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
        repeated_runs(&sub, &subset_cfg, train_cfg, seeds, name)
    };
    Ok(AblationReport {
        position: subset(&POSITION_COLUMNS, "position")?,
        orientation: subset(&ORIENTATION_COLUMNS, "orientation")?,
        combined,
    })
}

/// Magnetic and IMU results for one architecture and window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityCell {
    pub architecture: Architecture,
    pub window_len: usize,
    pub magnetic: AggregateReport,
    pub imu: AggregateReport,
    /// Magnetic minus IMU mean accuracy.
    pub accuracy_gap: f64,
    /// Magnetic minus IMU W-vs-WW restricted accuracy.
    pub w_ww_gap: f64,
    /// Magnetic minus IMU W-vs-WW mean recall.
    pub w_ww_recall_gap: f64,
}

fn cohort_signature(ds: &Dataset) -> (Vec<u32>, Vec<usize>) {
    let subjects = ds.subjects().into_iter().collect();
    let mut labels: Vec<usize> = ds.all().map(|w| w.label).collect();
    labels.sort_unstable();
    labels.dedup();
    (subjects, labels)
}

/// Checks that two datasets were built from the same subjects and
/// activities with the same windowing.
pub fn check_same_cohort(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.meta.window_len != b.meta.window_len {
        return Err(EvalError::MismatchedCohort(format!(
            "window lengths {} and {}",
            a.meta.window_len, b.meta.window_len
        )));
    }
    let (sa, la) = cohort_signature(a);
    let (sb, lb) = cohort_signature(b);
    if sa != sb {
        return Err(EvalError::MismatchedCohort(format!(
            "subjects {sa:?} vs {sb:?}"
        )));
    }
    if la != lb {
        return Err(EvalError::MismatchedCohort(format!(
            "activities {la:?} vs {lb:?}"
        )));
    }
    Ok(())
}

pub fn modality_compare(
    magnetic: &Dataset,
    imu: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<ModalityCell> {
    check_same_cohort(magnetic, imu)?;
    let mag = repeated_runs(magnetic, model_cfg, train_cfg, seeds, "all")?;
    let imu = repeated_runs(imu, model_cfg, train_cfg, seeds, "all")?;
    ModalityCell::from_reports(mag, imu)
}

impl ModalityCell {
    /// Pairs two finished reports of the same architecture and window length.
    pub fn from_reports(magnetic: AggregateReport, imu: AggregateReport) -> Result<Self> {
        let (m, i) = (&magnetic.tag, &imu.tag);
        if m.modality != Modality::Magnetic || i.modality != Modality::Imu {
            return Err(EvalError::InvalidConfig(
                "reports passed in the wrong order".into(),
            ));
        }
        if m.architecture != i.architecture || m.window_len != i.window_len {
            return Err(EvalError::MismatchedCohort(format!(
                "{} {} vs {} {}",
                m.architecture, m.window_len, i.architecture, i.window_len
            )));
        }
        Ok(ModalityCell {
            architecture: m.architecture,
            window_len: m.window_len,
            accuracy_gap: magnetic.mean_accuracy - imu.mean_accuracy,
            w_ww_gap: magnetic.w_ww_restricted_accuracy - imu.w_ww_restricted_accuracy,
            w_ww_recall_gap: magnetic.w_ww_mean_recall - imu.w_ww_mean_recall,
            magnetic,
            imu,
        })
    }
}

/// Cells for every architecture and window length, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityTable {
    pub cells: Vec<ModalityCell>,
}
