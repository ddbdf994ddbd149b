//! The command implementations behind the CLI, usable as a library.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dcepcc_core::data::{make_blobs, make_far_cluster, ArcBinary, Dataset, Standardizer};
use dcepcc_core::evaluation::{average_precision, run_openset_protocol, HeadKind, ScoreScaler};
use dcepcc_core::model::{ConicHead, FeatureNet, Model, SoftmaxHead};
use dcepcc_core::training::{dataset_accuracy, fit, EpochMetrics, TrainableHead};
use serde::Serialize;

use crate::checkpoint::{
    conic_record, net_record, softmax_record, AnyModel, Checkpoint, Provenance, StandardizerRecord, FORMAT_VERSION,
};
use crate::config::{HeadChoice, RunConfig};
use crate::csvio::load_csv;
use crate::error::{CliError, CliResult};
use crate::gradcheck::{self, Fault, ProblemReport};
use crate::grid::{grid_csv, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Blobs,
    Arc,
    FarCluster,
}

/// Where a command reads its samples from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label_column: String },
    Generated { generator: Generator, classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> CliResult<Dataset> {
        Ok(match self {
            DataSource::Csv { path, label_column } => load_csv(path, label_column)?,
            DataSource::Generated { generator, classes, per_class, dim, spread, seed } => match generator {
                Generator::Blobs => make_blobs(*classes, *per_class, *dim, *spread, *seed)?,
                Generator::Arc => ArcBinary::new(*per_class, *seed).generate()?,
                Generator::FarCluster => make_far_cluster(*seed)?,
            },
        })
    }
}

/// CSV log header written by [`train`].
pub const METRICS_HEADER: &str = "epoch,reg,margin,compact,total,train_acc";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochMetrics>,
    pub final_accuracy: f64,
    pub checkpoint: Checkpoint,
}

pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in history {
        let l = &m.loss;
        writeln!(out, "{},{},{},{},{},{}", m.epoch, l.reg_term, l.margin_term, l.compact_term, l.total, m.train_acc)
            .expect("write to string");
    }
    out
}

fn fit_logged<H: TrainableHead>(
    ds: &Dataset,
    model: &mut Model<H>,
    config: &RunConfig,
) -> CliResult<Vec<EpochMetrics>> {
    Ok(fit(ds, model, &config.train_config(), |m| {
        log::info!("epoch {} loss {:.6} train_acc {:.4}", m.epoch, m.loss.total, m.train_acc);
    })?)
}

/// Trains a model on `dataset` and packages it as a checkpoint.
pub fn train(dataset: &Dataset, config: &RunConfig) -> CliResult<TrainOutcome> {
    let (standardizer, ds) = if config.standardize {
        let s = Standardizer::fit(dataset)?;
        let ds = s.apply(dataset)?;
        (Some(s), ds)
    } else {
        (None, dataset.clone())
    };
    let net = FeatureNet::new(&config.net_dims(ds.dim()), config.seed)?;
    let head_seed = config.seed ^ 0x4845_4144;
    let classes = ds.classes();
    let (history, net, head, scaler, final_accuracy) = match config.head {
        HeadChoice::Conic => {
            let head = ConicHead::with_gamma_init(
                classes,
                config.feature_dim,
                config.shared_vertex,
                config.gamma_init,
                head_seed,
            )?;
            let mut model = Model::new(net, head)?;
            let history = fit_logged(&ds, &mut model, config)?;
            let rows = ds.iter().map(|(x, _)| model.scores(x)).collect::<dcepcc_core::Result<Vec<_>>>()?;
            let scaler = ScoreScaler::fit(&rows)?;
            let acc = dataset_accuracy(&model, &ds)?;
            (history, net_record(&model.net), conic_record(&model.head), Some(scaler.maxima().to_vec()), acc)
        }
        HeadChoice::Softmax => {
            let head = SoftmaxHead::new(classes, config.feature_dim, head_seed)?;
            let mut model = Model::new(net, head)?;
            let history = fit_logged(&ds, &mut model, config)?;
            let acc = dataset_accuracy(&model, &ds)?;
            (history, net_record(&model.net), softmax_record(&model.head), None, acc)
        }
    };
    let checkpoint = Checkpoint {
        format_version: FORMAT_VERSION,
        net,
        head,
        scaler,
        standardizer: standardizer.map(|s| StandardizerRecord { mean: s.mean, std: s.std }),
        config: config.clone(),
        provenance: Provenance {
            dataset: dataset.provenance().to_string(),
            class_names: dataset.class_names().map(<[String]>::to_vec),
            seed: config.seed,
            epochs: config.epochs,
        },
    };
    Ok(TrainOutcome { history, final_accuracy, checkpoint })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub class: usize,
    pub name: Option<String>,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub samples: usize,
    pub accuracy: f64,
    pub one_vs_rest_ap: Vec<ClassAp>,
    pub checkpoint_dataset: String,
    pub dataset: String,
}

/// Relabels `dataset` to the checkpoint's class order when both carry class
/// names; otherwise labels are taken as they are.
pub fn align_labels(dataset: &Dataset, class_names: Option<&[String]>) -> CliResult<Dataset> {
    let (Some(model_names), Some(data_names)) = (class_names, dataset.class_names()) else {
        return Ok(dataset.clone());
    };
    let map = data_names
        .iter()
        .map(|n| {
            model_names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| CliError::Data(format!("label `{n}` was not seen in training")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let labels = dataset.labels().iter().map(|&l| map[l]).collect();
    Ok(Dataset::new(dataset.features().to_vec(), dataset.dim(), labels, model_names.len())?
        .with_class_names(model_names.to_vec())?
        .with_provenance(dataset.provenance()))
}

/// Restores the checkpoint's model and input transform.
pub fn restore(checkpoint: &Checkpoint) -> CliResult<(AnyModel, Option<Standardizer>)> {
    let model = checkpoint.model()?;
    let standardizer = checkpoint.standardizer();
    if let Some(s) = &standardizer {
        if s.mean.len() != model.net().input_dim()
            || s.std.len() != s.mean.len()
            || s.std.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || s.mean.iter().any(|v| !v.is_finite())
        {
            return Err(CliError::Data("checkpoint standardizer is inconsistent".into()));
        }
    }
    Ok((model, standardizer))
}

/// Accuracy and, for each class in `one_vs_rest`, the average precision of
/// that class's score against the rest.
pub fn evaluate(checkpoint: &Checkpoint, dataset: &Dataset, one_vs_rest: &[usize]) -> CliResult<EvalRecord> {
    let (model, standardizer) = restore(checkpoint)?;
    let names = checkpoint.provenance.class_names.as_deref();
    let ds = align_labels(dataset, names)?;
    if ds.dim() != model.net().input_dim() {
        return Err(CliError::Data(format!(
            "dataset has {} features but the model expects {}",
            ds.dim(),
            model.net().input_dim()
        )));
    }
    if ds.classes() > model.num_classes() {
        return Err(CliError::Data(format!(
            "dataset has {} classes but the model has {}",
            ds.classes(),
            model.num_classes()
        )));
    }
    let ds = match &standardizer {
        Some(s) => s.apply(&ds)?,
        None => ds,
    };
    let mut correct = 0usize;
    let mut scores = Vec::with_capacity(ds.len());
    for (x, y) in ds.iter() {
        let s = model.scores(x)?;
        correct += usize::from(model.predict(x)? == y);
        scores.push(s);
    }
    let mut aps = Vec::new();
    for &c in one_vs_rest {
        if c >= model.num_classes() {
            return Err(CliError::Usage(format!("one-vs-rest class {c} out of range")));
        }
        let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
        let positive: Vec<bool> = ds.labels().iter().map(|&l| l == c).collect();
        aps.push(ClassAp { class: c, name: names.map(|n| n[c].clone()), ap: average_precision(&s, &positive)? });
    }
    Ok(EvalRecord {
        samples: ds.len(),
        accuracy: correct as f64 / ds.len() as f64,
        one_vs_rest_ap: aps,
        checkpoint_dataset: checkpoint.provenance.dataset.clone(),
        dataset: dataset.provenance().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpensetRow {
    pub run: usize,
    pub known: Vec<usize>,
    pub split_hash_dcepcc: u64,
    pub split_hash_softmax: u64,
    pub auroc_dcepcc: f64,
    pub auroc_softmax: f64,
    pub closed_acc_dcepcc: f64,
    pub closed_acc_softmax: f64,
}

/// Runs the known/unknown protocol for the conic head and the soft-max
/// baseline with identical seeds.
pub fn openset(dataset: &Dataset, config: &RunConfig) -> CliResult<Vec<OpensetRow>> {
    if dataset.classes() <= config.known {
        return Err(CliError::Data(format!(
            "dataset has {} classes; need more than --known {}",
            dataset.classes(),
            config.known
        )));
    }
    let protocol = config.protocol_config();
    let cfg = config.train_config();
    let conic =
        run_openset_protocol(dataset, HeadKind::Conic { shared_vertex: config.shared_vertex }, &protocol, &cfg)?;
    let soft = run_openset_protocol(dataset, HeadKind::Softmax, &protocol, &cfg)?;
    Ok(conic
        .runs
        .iter()
        .zip(&soft.runs)
        .enumerate()
        .map(|(i, (a, b))| OpensetRow {
            run: i + 1,
            known: a.split.known.clone(),
            split_hash_dcepcc: a.split_hash,
            split_hash_softmax: b.split_hash,
            auroc_dcepcc: a.auroc,
            auroc_softmax: b.auroc,
            closed_acc_dcepcc: a.closed_accuracy,
            closed_acc_softmax: b.closed_accuracy,
        })
        .collect())
}

pub fn openset_table(rows: &[OpensetRow]) -> String {
    let mut out = String::from("run,auroc_dcepcc,auroc_softmax\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.run, r.auroc_dcepcc, r.auroc_softmax).expect("write to string");
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&OpensetRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    writeln!(out, "mean,{},{}", mean(|r| r.auroc_dcepcc), mean(|r| r.auroc_softmax)).expect("write to string");
    out
}

/// Grid CSV for a conic checkpoint.
pub fn grid(checkpoint: &Checkpoint, spec: &GridSpec) -> CliResult<String> {
    match restore(checkpoint)? {
        (AnyModel::Conic(model), standardizer) => grid_csv(&model, standardizer.as_ref(), spec),
        (AnyModel::Softmax(_), _) => Err(CliError::Data("grid needs a conic checkpoint".into())),
    }
}

pub fn gradcheck_report(reports: &[ProblemReport]) -> String {
    let mut out = String::new();
    for r in reports {
        write!(out, "dim={} classes={} draw={}", r.dim, r.classes, r.draw).expect("write to string");
        for g in &r.groups {
            write!(out, " {}={:.3e}", g.group, g.max_rel_error).expect("write to string");
        }
        out.push('\n');
    }
    let worst = reports.iter().map(ProblemReport::max_rel_error).fold(0.0, f64::max);
    let verdict = if worst < gradcheck::THRESHOLD { "pass" } else { "FAIL" };
    writeln!(out, "max_rel_error={worst:.3e} threshold={:e} {verdict}", gradcheck::THRESHOLD).expect("write to string");
    out
}

/// Runs the gradient check; `Err(Check)` when any error reaches the threshold.
pub fn gradcheck(dims: &[usize], classes: &[usize], seed: u64, fault: Fault) -> CliResult<String> {
    if dims.iter().chain(classes).any(|&v| v == 0) || classes.contains(&1) {
        return Err(CliError::Usage("dims must be ≥ 1 and classes ≥ 2".into()));
    }
    let reports = gradcheck::run(dims, classes, seed, fault);
    let text = gradcheck_report(&reports);
    if reports.iter().any(|r| !(r.max_rel_error() < gradcheck::THRESHOLD)) {
        return Err(CliError::Check(text));
    }
    Ok(text)
}

pub(crate) fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
