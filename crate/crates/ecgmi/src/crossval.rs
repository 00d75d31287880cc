//! Stratified cross-validation, the four noise×augmentation scenarios,
//! and CSV/summary reporting over pooled confusion matrices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::augment::{augment_dataset, AugmentError};
use crate::metrics::{compute_metrics, ConfusionMatrix, Metrics, MetricsError};
use crate::nn::{
    extract_features, predict_mi1, train_mi1, NnError, TrainConfig, TrainError,
};
use crate::raster::EcgImage;
use crate::svm::{predict_svm, train_svm, QGKernelParams, SmoConfig, SvmError};
use crate::{Label, NoiseCondition};

#[derive(Debug, Error)]
pub enum CrossvalError {
    #[error("need at least {k} items of class {class} for {k} folds, got {count}")]
    TooFewItems { class: &'static str, k: usize, count: usize },
    #[error("fold count must be at least 2")]
    TooFewFolds,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training failed: {0}")]
    Train(#[from] TrainError),
    #[error("network failure: {0}")]
    Nn(#[from] NnError),
    #[error("svm training failed: {0}")]
    Svm(#[from] SvmError),
    #[error("metrics failure: {0}")]
    Metrics(#[from] MetricsError),
    #[error("augmentation failed: {0}")]
    Augment(#[from] AugmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mi1,
    Mi2,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Mi1 => "mi1",
            ModelKind::Mi2 => "mi2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    TenFold,
    Holdout60_30_10,
}

/// One evaluation scenario. `noise: Filtered` is the "without noise"
/// condition; `Raw` leaves the signal unfiltered.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub noise: NoiseCondition,
    pub augmentation: bool,
    pub model: ModelKind,
    pub folds: usize,
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            noise: NoiseCondition::Filtered,
            augmentation: true,
            model: ModelKind::Mi2,
            folds: 10,
            split_mode: SplitMode::TenFold,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    /// Conventional name: best-case1/2 without noise (with/without
    /// augmentation), worst-case1/2 with noise.
    pub fn name(&self) -> &'static str {
        match (self.noise, self.augmentation) {
            (NoiseCondition::Filtered, true) => "best-case1",
            (NoiseCondition::Filtered, false) => "best-case2",
            (NoiseCondition::Raw, true) => "worst-case1",
            (NoiseCondition::Raw, false) => "worst-case2",
        }
    }
}

/// Split item indices into `k` disjoint folds, stratified by label:
/// per-class counts across folds differ by at most one. Deterministic
/// for a given seed. Splitting always operates on pre-augmentation
/// originals; crops are generated later, on training folds only.
pub fn stratified_k_fold(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, CrossvalError> {
    if k < 2 {
        return Err(CrossvalError::TooFewFolds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    // Fixed class order keeps the result independent of input order
    // permutations within a class.
    for class in [Label::Normal, Label::Mi, Label::Other] {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(CrossvalError::TooFewItems {
                class: class.as_str(),
                k,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            folds[pos % k].push(i);
        }
    }
    Ok(folds)
}

/// Per-scenario outcome: one matrix per fold plus the pooled matrix and
/// its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub name: String,
    pub model: ModelKind,
    pub noise: NoiseCondition,
    pub augmentation: bool,
    pub fold_matrices: Vec<ConfusionMatrix>,
    pub pooled: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Train/evaluate one scenario over the (already rendered) image set.
///
/// Ten-fold mode: each fold in turn is the test set; the next fold
/// (cyclically) serves as the validation set for epoch selection and the
/// remaining folds train the network. MI2 additionally fits a QG-SVM on
/// the second-FC features of the training portion. Test folds are never
/// augmented. Holdout mode instead uses a single stratified 60/30/10
/// train/validation/test split.
pub fn run_scenario(
    images: &[EcgImage],
    spec: &ScenarioSpec,
    train_cfg: &TrainConfig,
    svm_cfg: &SmoConfig,
    width_scale: (u32, u32),
    input_size: usize,
) -> Result<ScenarioResult, CrossvalError> {
    if images.is_empty() {
        return Err(CrossvalError::EmptyDataset);
    }
    let labels: Vec<Label> = images.iter().map(|i| i.label).collect();
    let splits: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> = match spec.split_mode {
        SplitMode::TenFold => {
            let folds = stratified_k_fold(&labels, spec.folds, spec.seed)?;
            (0..folds.len())
                .map(|t| {
                    let val = (t + 1) % folds.len();
                    let train: Vec<usize> = (0..folds.len())
                        .filter(|&f| f != t && f != val)
                        .flat_map(|f| folds[f].iter().copied())
                        .collect();
                    (train, folds[val].clone(), folds[t].clone())
                })
                .collect()
        }
        SplitMode::Holdout60_30_10 => {
            // 10 stratified slices: 6 train, 3 validation, 1 test.
            let folds = stratified_k_fold(&labels, 10, spec.seed)?;
            let train = folds[..6].iter().flatten().copied().collect();
            let val = folds[6..9].iter().flatten().copied().collect();
            let test = folds[9].clone();
            vec![(train, val, test)]
        }
    };

    let mut fold_matrices = Vec::with_capacity(splits.len());
    for (fold_no, (train_idx, val_idx, test_idx)) in splits.iter().enumerate() {
        let mut train_set: Vec<EcgImage> =
            train_idx.iter().map(|&i| images[i].clone()).collect();
        if spec.augmentation {
            train_set = augment_dataset(&train_set, true)?;
        }
        let val_set: Vec<EcgImage> = val_idx.iter().map(|&i| images[i].clone()).collect();

        let fold_cfg = TrainConfig {
            // Decorrelate fold initializations while staying reproducible.
            seed: train_cfg.seed.wrapping_add(fold_no as u64),
            ..train_cfg.clone()
        };
        let (params, _log) = train_mi1(&train_set, &val_set, &fold_cfg, width_scale, input_size)?;

        let mut cm = ConfusionMatrix::default();
        match spec.model {
            ModelKind::Mi1 => {
                for &i in test_idx {
                    let (pred, _) = predict_mi1(&params, &images[i])?;
                    cm.record(images[i].label, pred);
                }
            }
            ModelKind::Mi2 => {
                let mut features = Vec::with_capacity(train_set.len());
                let mut ys = Vec::with_capacity(train_set.len());
                for img in &train_set {
                    features.push(extract_features(&params, img)?);
                    ys.push(if img.label == Label::Mi { 1.0 } else { -1.0 });
                }
                let svm = train_svm(&features, &ys, QGKernelParams::default(), svm_cfg)?.model;
                for &i in test_idx {
                    let f = extract_features(&params, &images[i])?;
                    let (pred, _) = predict_svm(&svm, &f)?;
                    cm.record(images[i].label, pred);
                }
            }
        }
        fold_matrices.push(cm);
    }

    let pooled = fold_matrices
        .iter()
        .fold(ConfusionMatrix::default(), |acc, m| acc.add(m));
    let metrics = compute_metrics(&pooled)?;
    Ok(ScenarioResult {
        name: spec.name().to_string(),
        model: spec.model,
        noise: spec.noise,
        augmentation: spec.augmentation,
        fold_matrices,
        pooled,
        metrics,
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => String::new(),
    }
}

fn class_rows(out: &mut String, scenario: &str, fold: &str, cm: &ConfusionMatrix) {
    // Mirror the published table layout: each row reports metrics with
    // that row's class treated as positive; accuracy is shared.
    let mi = compute_metrics(cm);
    let normal = compute_metrics(&ConfusionMatrix::new(cm.tn, cm.tp, cm.fn_, cm.fp));
    for (class, predicted_normal, predicted_mi, m) in [
        ("normal", cm.tn, cm.fp, normal),
        ("mi", cm.fn_, cm.tp, mi),
    ] {
        match m {
            Ok(m) => out.push_str(&format!(
                "{scenario},{fold},{class},{predicted_normal},{predicted_mi},{},{},{},{}\n",
                fmt_metric(m.accuracy),
                fmt_metric(m.sensitivity),
                fmt_metric(m.predictivity),
                fmt_metric(m.specificity),
            )),
            Err(_) => out.push_str(&format!(
                "{scenario},{fold},{class},{predicted_normal},{predicted_mi},,,,\n"
            )),
        }
    }
}

/// CSV table over one or more scenario results: a row per (scenario,
/// fold, class) plus pooled rows, two decimals, deterministic ordering.
pub fn report(results: &[ScenarioResult]) -> String {
    let mut out = String::from(
        "scenario,fold,true_class,predicted_normal,predicted_mi,acc,se,pre,spe\n",
    );
    for r in results {
        for (fold_no, cm) in r.fold_matrices.iter().enumerate() {
            class_rows(&mut out, &r.name, &fold_no.to_string(), cm);
        }
        class_rows(&mut out, &r.name, "pooled", &r.pooled);
    }
    out
}

/// Machine-readable key=value summary for one scenario.
pub fn summary(r: &ScenarioResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario={}\n", r.name));
    out.push_str(&format!("model={}\n", r.model.as_str()));
    out.push_str(&format!(
        "noise={}\n",
        match r.noise {
            NoiseCondition::Filtered => "filtered",
            NoiseCondition::Raw => "raw",
        }
    ));
    out.push_str(&format!("augmentation={}\n", r.augmentation));
    out.push_str(&format!("folds={}\n", r.fold_matrices.len()));
    out.push_str(&format!("pooled_tp={}\n", r.pooled.tp));
    out.push_str(&format!("pooled_tn={}\n", r.pooled.tn));
    out.push_str(&format!("pooled_fp={}\n", r.pooled.fp));
    out.push_str(&format!("pooled_fn={}\n", r.pooled.fn_));
    out.push_str(&format!("pooled_acc={}\n", fmt_metric(r.metrics.accuracy)));
    out.push_str(&format!("pooled_se={}\n", fmt_metric(r.metrics.sensitivity)));
    out.push_str(&format!("pooled_pre={}\n", fmt_metric(r.metrics.predictivity)));
    out.push_str(&format!("pooled_spe={}\n", fmt_metric(r.metrics.specificity)));
    out
}
