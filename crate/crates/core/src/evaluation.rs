//! Closed-set metrics, open-set scoring and the randomized known/unknown
//! protocol.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{split, standardize, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::model::{ClassifierHead, ConicHead, FeatureNet, Model, SoftmaxHead};
use crate::training::{dataset_accuracy, fit, TrainConfig, TrainableHead};
use crate::util::{mix_seed, rng};

/// Fraction of exact matches.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    check_dim(preds.len(), labels.len())?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    check_dim(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Non-interpolated average precision: rank by score (descending, ties in
/// input order) and average the precision at the rank of every positive.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Empty("positive labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Area under the ROC curve via the Mann–Whitney statistic with mid-ranks:
/// the probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // rank sums are kept doubled so tied mid-ranks stay integral
    let mut doubled_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let doubled_mid = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        doubled_rank_sum += doubled_mid * pos_in_group;
        start = end;
    }
    let n_pos = n_pos as u64;
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg as u64) as f64)
}

/// ROC points `(fpr, tpr)` from the strictest threshold down, one point per
/// distinct score, starting at `(0, 0)`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|p| (p[1].0 - p[0].0) * (p[1].1 + p[0].1) / 2.0).sum()
}

/// Per-class scaling by the largest absolute calibration score, so every
/// class's calibration scores land in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreScaler {
    maxima: Vec<f64>,
}

impl ScoreScaler {
    /// `rows[i][c]` is sample `i`'s score for class `c`. Classes whose
    /// calibration scores are all zero get a scale of 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("calibration scores"))?;
        let mut maxima = vec![0.0f64; first.len()];
        for row in rows {
            check_dim(maxima.len(), row.len())?;
            for (m, v) in maxima.iter_mut().zip(row) {
                *m = m.max(libm::fabs(*v));
            }
        }
        for m in maxima.iter_mut().filter(|m| **m == 0.0) {
            *m = 1.0;
        }
        if maxima.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("calibration scores"));
        }
        Ok(Self { maxima })
    }

    pub fn from_maxima(maxima: Vec<f64>) -> Result<Self> {
        if maxima.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidArgument("scaler maxima must be positive and finite".into()));
        }
        Ok(Self { maxima })
    }

    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn scale(&self, scores: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.maxima.len(), scores.len())?;
        Ok(scores.iter().zip(&self.maxima).map(|(s, m)| s / m).collect())
    }
}

/// Rejection score `−max_c ĝ_c`; larger means more likely unknown.
pub fn openset_score(scaled: &[f64]) -> f64 {
    -scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// How conic scores are turned into per-class confidences before rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreTransform {
    /// Max-abs scaling only.
    #[default]
    MaxAbs,
    /// Max-abs scaling followed by a logistic sigmoid.
    Sigmoid,
}

/// Known/unknown class partition for one protocol repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenSetSplit {
    pub known: Vec<usize>,
    pub unknown: Vec<usize>,
    pub seed: u64,
}

impl OpenSetSplit {
    /// Uniformly random choice of `known` classes out of `classes`; both lists
    /// are returned sorted.
    pub fn draw(classes: usize, known: usize, seed: u64) -> Result<Self> {
        if known == 0 || known >= classes {
            return Err(Error::InvalidArgument(alloc::format!(
                "need 1 ≤ known < classes (known = {known}, classes = {classes})"
            )));
        }
        let mut all: Vec<usize> = (0..classes).collect();
        all.shuffle(&mut rng(seed));
        let mut k = all[..known].to_vec();
        let mut u = all[known..].to_vec();
        k.sort_unstable();
        u.sort_unstable();
        Ok(Self { known: k, unknown: u, seed })
    }
}

/// Accuracy, optional per-class AP and optional AU-ROC of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_ap: Option<Vec<f64>>,
    pub auroc: Option<f64>,
    pub n_known: usize,
    pub n_unknown: usize,
}

/// Which head the protocol trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Conic { shared_vertex: bool },
    Softmax,
}

/// Settings of the known/unknown protocol beyond the optimizer config.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub known: usize,
    pub repeats: usize,
    /// Stratified fraction of every class used for training; the rest is test.
    pub train_fraction: f64,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub transform: ScoreTransform,
    /// Initial `γ̃` of conic heads.
    pub gamma_init: f64,
    /// Standardize inputs with statistics of the known-class training set.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            known: 6,
            repeats: 5,
            train_fraction: 0.6,
            hidden: vec![64, 32],
            feature_dim: 16,
            transform: ScoreTransform::MaxAbs,
            gamma_init: -1.0,
            standardize: true,
            seed: 0,
        }
    }
}

/// Outcome of one protocol repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub split: OpenSetSplit,
    /// Fingerprint of the class partition and the train/test samples.
    pub split_hash: u64,
    pub auroc: f64,
    /// Accuracy on the known-class test samples.
    pub closed_accuracy: f64,
    pub n_known: usize,
    pub n_unknown: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub runs: Vec<RunResult>,
    pub mean_auroc: f64,
    pub mean_closed_accuracy: f64,
}

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= u64::from(b);
        *hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
}

fn split_fingerprint(split: &OpenSetSplit, train: &Dataset, test: &Dataset) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325;
    for &c in split.known.iter().chain(&split.unknown) {
        fnv1a(&mut h, &(c as u64).to_le_bytes());
    }
    for ds in [train, test] {
        fnv1a(&mut h, &(ds.len() as u64).to_le_bytes());
        for v in ds.features() {
            fnv1a(&mut h, &v.to_bits().to_le_bytes());
        }
        for &l in ds.labels() {
            fnv1a(&mut h, &(l as u64).to_le_bytes());
        }
    }
    h
}

/// Trains on known classes only and measures how well the rejection score
/// separates unknown-class test samples (positives) from known ones.
///
/// Splits depend only on `protocol.seed`, so different heads evaluated with
/// the same protocol see identical data. Calibration for score scaling uses
/// the known-class training set.
pub fn run_openset_protocol(
    dataset: &Dataset,
    head: HeadKind,
    protocol: &ProtocolConfig,
    cfg: &TrainConfig,
) -> Result<ProtocolResult> {
    if protocol.repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    if dataset.classes() <= protocol.known {
        return Err(Error::InvalidArgument(alloc::format!(
            "dataset has {} classes; need more than {} known classes",
            dataset.classes(),
            protocol.known
        )));
    }
    let mut runs = Vec::with_capacity(protocol.repeats);
    for repeat in 0..protocol.repeats {
        let repeat_seed = mix_seed(protocol.seed, repeat as u64);
        let split_spec = OpenSetSplit::draw(dataset.classes(), protocol.known, repeat_seed)?;
        let fractions = [protocol.train_fraction, 0.0, 1.0 - protocol.train_fraction];
        let (train_all, _, test) = split(dataset, fractions, true, mix_seed(repeat_seed, 1))?;
        if test.is_empty() {
            return Err(Error::Empty("test partition"));
        }
        let mut train = train_all.select_classes(&split_spec.known)?;
        let mut test = test;
        if protocol.standardize {
            let (_, tr, mut rest) = standardize(&train, &[&test])?;
            train = tr;
            test = rest.remove(0);
        }
        let mut dims = vec![dataset.dim()];
        dims.extend_from_slice(&protocol.hidden);
        dims.push(protocol.feature_dim);
        let net = FeatureNet::new(&dims, mix_seed(repeat_seed, 2))?;
        let run_cfg = TrainConfig { seed: mix_seed(cfg.seed, repeat_seed), ..cfg.clone() };
        let head_seed = mix_seed(repeat_seed, 3);
        let known_count = protocol.known;

        let (scores, closed) = match head {
            HeadKind::Conic { shared_vertex } => {
                let head = ConicHead::with_gamma_init(
                    known_count,
                    protocol.feature_dim,
                    shared_vertex,
                    protocol.gamma_init,
                    head_seed,
                )?;
                let model = train_model(&train, net, head, &run_cfg)?;
                let calibration = train.iter().map(|(x, _)| model.scores(x)).collect::<Result<Vec<_>>>()?;
                let scaler = ScoreScaler::fit(&calibration)?;
                let scores = test
                    .iter()
                    .map(|(x, _)| conic_openset_score(&model, &scaler, protocol.transform, x))
                    .collect::<Result<Vec<_>>>()?;
                (scores, known_accuracy(&model, &test, &split_spec)?)
            }
            HeadKind::Softmax => {
                let head = SoftmaxHead::new(known_count, protocol.feature_dim, head_seed)?;
                let model = train_model(&train, net, head, &run_cfg)?;
                let scores = test.iter().map(|(x, _)| softmax_openset_score(&model, x)).collect::<Result<Vec<_>>>()?;
                (scores, known_accuracy(&model, &test, &split_spec)?)
            }
        };
        let unknown: Vec<bool> = test.labels().iter().map(|l| split_spec.unknown.contains(l)).collect();
        let n_unknown = unknown.iter().filter(|&&u| u).count();
        runs.push(RunResult {
            split_hash: split_fingerprint(&split_spec, &train, &test),
            auroc: roc_auc(&scores, &unknown)?,
            closed_accuracy: closed,
            n_known: unknown.len() - n_unknown,
            n_unknown,
            split: split_spec,
        });
    }
    let n = runs.len() as f64;
    Ok(ProtocolResult {
        mean_auroc: runs.iter().map(|r| r.auroc).sum::<f64>() / n,
        mean_closed_accuracy: runs.iter().map(|r| r.closed_accuracy).sum::<f64>() / n,
        runs,
    })
}

fn train_model<H: TrainableHead>(train: &Dataset, net: FeatureNet, head: H, cfg: &TrainConfig) -> Result<Model<H>> {
    let mut model = Model::new(net, head)?;
    fit(train, &mut model, cfg, |_| {})?;
    Ok(model)
}

fn known_accuracy<H: ClassifierHead>(model: &Model<H>, test: &Dataset, split: &OpenSetSplit) -> Result<f64> {
    dataset_accuracy(model, &test.select_classes(&split.known)?)
}

/// Rejection score of a conic model for one input.
pub fn conic_openset_score(
    model: &Model<ConicHead>,
    scaler: &ScoreScaler,
    transform: ScoreTransform,
    x: &[f64],
) -> Result<f64> {
    let mut scaled = scaler.scale(&model.scores(x)?)?;
    if transform == ScoreTransform::Sigmoid {
        scaled.iter_mut().for_each(|s| *s = 1.0 / (1.0 + libm::exp(-*s)));
    }
    Ok(openset_score(&scaled))
}

/// Max-probability rejection score `−max_c p_c` of the soft-max baseline.
pub fn softmax_openset_score(model: &Model<SoftmaxHead>, x: &[f64]) -> Result<f64> {
    let p = model.head.probabilities(&model.net.features(x)?)?;
    Ok(openset_score(&p))
}
