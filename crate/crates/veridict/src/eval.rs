//! Cross-validated training and evaluation: confusion matrices, per-class
//! classification reports, and k-fold accuracy aggregation.

use crate::classical::{logreg_fit, rf_fit, ForestHyper, LogRegHyper};
use crate::conv1d::{default_architecture, train as conv_train, Conv1DNet, TrainHyper};
use crate::error::{Error, Result};
use crate::gcn::{build_graph, gcn_forward, gcn_train, GcnHyper};
use crate::ingest::{kfold_partitions, Sample};
use crate::math::{mean, mix, population_std, Matrix, RngStream};
use crate::model::{Predictor, SavedModel, Standardizer};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts with the deceptive class (label 1) as positive.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "confusion: {} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&l| l > 1) {
        return Err(Error::precondition(format!(
            "confusion: label {bad} outside {{0,1}}"
        )));
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// true when a zero denominator forced the metric to 0
    pub degenerate: bool,
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// metrics with label 1 as positive
    pub deceptive: ClassMetrics,
    /// metrics with label 0 as positive
    pub truthful: ClassMetrics,
    pub accuracy: f64,
    pub support: usize,
}

/// Full-precision per-class report; rounding happens only in `report_table`.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::precondition("classification_report: empty matrix"));
    }
    Ok(ClassificationReport {
        deceptive: class_metrics(cm.tp, cm.fp, cm.fn_),
        truthful: class_metrics(cm.tn, cm.fn_, cm.fp),
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        support: total,
    })
}

/// Two-decimal display table, one row per class.
pub fn report_table(report: &ClassificationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>9} {:>6} {:>8}\n",
        "class", "precision", "recall", "f1-score"
    ));
    for (name, m) in [("deceptive", &report.deceptive), ("truthful", &report.truthful)] {
        out.push_str(&format!(
            "{:<10} {:>9.2} {:>6.2} {:>8.2}{}\n",
            name,
            m.precision,
            m.recall,
            m.f1,
            if m.degenerate { "  (zero denominator)" } else { "" }
        ));
    }
    out.push_str(&format!("accuracy   {:>9.2}\n", report.accuracy));
    out
}

/// A trainable model family plus its hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Logreg { hyper: LogRegHyper },
    RandomForest { hyper: ForestHyper },
    Conv1d { hyper: TrainHyper },
    Gcn { hyper: GcnHyper },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Logreg { .. } => "logreg",
            ModelSpec::RandomForest { .. } => "random_forest",
            ModelSpec::Conv1d { .. } => "conv1d",
            ModelSpec::Gcn { .. } => "gcn",
        }
    }

    pub fn from_name(name: &str) -> Result<ModelSpec> {
        match name {
            "logreg" => Ok(ModelSpec::Logreg {
                hyper: LogRegHyper::default(),
            }),
            "random_forest" | "rf" => Ok(ModelSpec::RandomForest {
                hyper: ForestHyper::default(),
            }),
            "conv1d" => Ok(ModelSpec::Conv1d {
                hyper: TrainHyper::default(),
            }),
            "gcn" => Ok(ModelSpec::Gcn {
                hyper: GcnHyper::default(),
            }),
            other => Err(Error::config(format!("unknown model family '{other}'"))),
        }
    }

    fn needs_validation(&self) -> bool {
        matches!(self, ModelSpec::Conv1d { .. } | ModelSpec::Gcn { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub accuracy: f64,
    pub report: ClassificationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub model: String,
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    pub std: f64,
}

impl FoldReport {
    pub fn from_results(model: &str, folds: Vec<FoldResult>) -> FoldReport {
        let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        FoldReport {
            model: model.to_string(),
            mean: mean(&accs),
            std: population_std(&accs),
            folds,
        }
    }
}

/// 10% stratified carve-out from train indices, for early-stopping models.
fn carve_validation(
    train: &[usize],
    samples: &[Sample],
    rng: &mut RngStream,
) -> (Vec<usize>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&i| samples[i].label == class)
            .collect();
        rng.shuffle(&mut idx);
        let n_val = if idx.len() >= 2 {
            ((idx.len() as f64 * 0.1).round() as usize).max(1)
        } else {
            0
        };
        val.extend(idx.iter().take(n_val).copied());
        kept.extend(idx.iter().skip(n_val).copied());
    }
    kept.sort_unstable();
    val.sort_unstable();
    (kept, val)
}

fn gather<'a>(samples: &'a [Sample], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>, Vec<&'a str>) {
    let x = idx
        .iter()
        .map(|&i| samples[i].features.values.clone())
        .collect();
    let y = idx.iter().map(|&i| samples[i].label).collect();
    let ids = idx.iter().map(|&i| samples[i].id.as_str()).collect();
    (x, y, ids)
}

/// An inductive model plus its training curve where the family records one.
pub struct TrainOutcome {
    pub model: SavedModel,
    pub history: Option<Vec<crate::conv1d::EpochLoss>>,
}

/// Train one inductive model on explicit splits. Used both per fold and by
/// the `train` CLI command. GCN is transductive and handled separately.
pub fn train_inductive(
    spec: &ModelSpec,
    samples: &[Sample],
    train_idx: &[usize],
    val_idx: &[usize],
    seed: u64,
) -> Result<TrainOutcome> {
    let (train_x, train_y, _) = gather(samples, train_idx);
    let mut rng = RngStream::new(seed);
    match spec {
        ModelSpec::Logreg { hyper } => {
            let std = Standardizer::fit(&train_x.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
            let z: Vec<Vec<f64>> = train_x.iter().map(|r| std.transform(r)).collect();
            let model = logreg_fit(&z, &train_y, hyper, &mut rng)?;
            Ok(TrainOutcome {
                model: SavedModel::LogisticRegression {
                    standardizer: std,
                    model,
                },
                history: None,
            })
        }
        ModelSpec::RandomForest { hyper } => {
            let model = rf_fit(&train_x, &train_y, hyper, &mut rng)?;
            Ok(TrainOutcome {
                model: SavedModel::RandomForest { model },
                history: None,
            })
        }
        ModelSpec::Conv1d { hyper } => {
            let std = Standardizer::fit(&train_x.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
            let z: Vec<Vec<f64>> = train_x.iter().map(|r| std.transform(r)).collect();
            let (val_x_raw, val_y, _) = gather(samples, val_idx);
            let val_z: Vec<Vec<f64>> = val_x_raw.iter().map(|r| std.transform(r)).collect();
            let d = z.first().map_or(0, |r| r.len());
            let net = Conv1DNet::new(d, &default_architecture(), rng.next_u64())?;
            let (trained, history) =
                conv_train(net, &z, &train_y, &val_z, &val_y, hyper, &mut rng)?;
            Ok(TrainOutcome {
                model: SavedModel::Conv1d {
                    standardizer: std,
                    model: trained,
                },
                history: Some(history),
            })
        }
        ModelSpec::Gcn { .. } => Err(Error::config(
            "gcn is transductive; use run_kfold or gcn_train directly",
        )),
    }
}

fn evaluate_fold(
    spec: &ModelSpec,
    samples: &[Sample],
    graph: Option<&crate::gcn::GraphSpec>,
    train: &[usize],
    test: &[usize],
    fold_seed: u64,
) -> Result<FoldResult> {
    let mut rng = RngStream::new(fold_seed);
    let y_true: Vec<u8> = test.iter().map(|&i| samples[i].label).collect();
    let y_pred: Vec<u8> = match spec {
        ModelSpec::Gcn { hyper } => {
            let graph = graph.expect("graph prebuilt for gcn");
            let x = Matrix::from_rows(
                &samples
                    .iter()
                    .map(|s| s.features.values.clone())
                    .collect::<Vec<_>>(),
            )?;
            let (train_idx, val_idx) = carve_validation(train, samples, &mut rng);
            let y: Vec<u8> = samples.iter().map(|s| s.label).collect();
            let mut hyper = *hyper;
            hyper.m = hyper.m.min(graph.n);
            let model = gcn_train(graph, &x, &y, &train_idx, &val_idx, &hyper, &mut rng)?;
            let probs = gcn_forward(&model, graph, &x)?;
            test.iter().map(|&i| (probs[i] > 0.5) as u8).collect()
        }
        _ => {
            let (train_idx, val_idx) = if spec.needs_validation() {
                carve_validation(train, samples, &mut rng)
            } else {
                (train.to_vec(), Vec::new())
            };
            let outcome = train_inductive(spec, samples, &train_idx, &val_idx, rng.next_u64())?;
            test.iter()
                .map(|&i| outcome.model.predict(&samples[i].features.values))
                .collect()
        }
    };
    let cm = confusion(&y_true, &y_pred)?;
    let report = classification_report(&cm)?;
    Ok(FoldResult {
        accuracy: report.accuracy,
        report,
    })
}

/// Stratified k-fold evaluation of one model spec. Fold partitions depend
/// only on (samples, k, seed) so different specs see identical folds.
/// `threads` distributes folds round-robin; results are assembled by fold
/// index so output is identical for any thread count.
pub fn run_kfold(
    spec: &ModelSpec,
    samples: &[Sample],
    k: usize,
    seed: u64,
    threads: usize,
) -> Result<FoldReport> {
    let partitions = kfold_partitions(samples, k, &mut RngStream::new(mix(seed, 0)))?;
    let graph = if matches!(spec, ModelSpec::Gcn { .. }) {
        let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.values.clone()).collect();
        Some(build_graph(&rows, crate::gcn::DEFAULT_K.min(samples.len() - 1))?)
    } else {
        None
    };

    let run_one = |f: usize| -> Result<FoldResult> {
        let (train, test) = &partitions[f];
        evaluate_fold(spec, samples, graph.as_ref(), train, test, mix(seed, f as u64 + 1))
            .map_err(|e| Error::precondition(format!("fold {f} ({}): {e}", spec.name())))
    };

    let threads = threads.max(1).min(k);
    let mut slots: Vec<Option<Result<FoldResult>>> = (0..k).map(|_| None).collect();
    if threads == 1 {
        for (f, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_one(f));
        }
    } else {
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for t in 0..threads {
                let run_one = &run_one;
                let results = &results;
                scope.spawn(move || {
                    for f in (t..k).step_by(threads) {
                        let r = run_one(f);
                        results.lock().unwrap()[f] = Some(r);
                    }
                });
            }
        });
    }

    let folds: Vec<FoldResult> = slots
        .into_iter()
        .map(|s| s.expect("every fold scheduled"))
        .collect::<Result<_>>()?;
    Ok(FoldReport::from_results(spec.name(), folds))
}

/// Paired comparison: every spec is evaluated on the identical partitions.
pub fn compare_models(
    specs: &[ModelSpec],
    samples: &[Sample],
    k: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<FoldReport>> {
    if specs.is_empty() {
        return Err(Error::precondition("compare_models: no model specs"));
    }
    specs
        .iter()
        .map(|spec| run_kfold(spec, samples, k, seed, threads))
        .collect()
}

/// Aligned text table: one row per model, per-fold accuracies, mean, std.
pub fn fold_table(reports: &[FoldReport]) -> String {
    let k = reports.first().map_or(0, |r| r.folds.len());
    let mut out = format!("{:<14}", "model");
    for f in 0..k {
        out.push_str(&format!(" {:>8}", format!("fold{}", f + 1)));
    }
    out.push_str(&format!(" {:>8} {:>8}\n", "mean", "std"));
    for r in reports {
        out.push_str(&format!("{:<14}", r.model));
        for fold in &r.folds {
            out.push_str(&format!(" {:>8.4}", fold.accuracy));
        }
        out.push_str(&format!(" {:>8.4} {:>8.4}\n", r.mean, r.std));
    }
    out
}
