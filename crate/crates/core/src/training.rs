//! Objective, analytic subgradients, momentum SGD, center updates and the
//! training loop.
//!
//! The conic objective on a batch `B` is
//!
//! ```text
//! λ/2 Σ_c ‖w̃_c‖²
//!   + 1/|B| Σ_{i∈B} Σ_{j≠yᵢ} max(0, Δ − (g_{yᵢ}(fᵢ) − g_j(fᵢ)))
//!   + η Σ_c Σ_m max(0, κ − (−γ̃_cm − |w̃_cm|))
//! ```
//!
//! The compactness hinge is zero exactly when every class satisfies
//! `γ_cm ≥ |w_cm| + κ`, i.e. its region is bounded with slack `κ`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::evaluation::accuracy;
use crate::model::{softmax, ClassifierHead, ConicHead, FeatureNet, Model, Parameters, SoftmaxHead};
use crate::util::{mix_seed, rng, sgn};

/// Optimizer and loss hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Explicit `λ/2 ‖w̃‖²` term in the loss. Zero by default: the same
    /// regularization is normally applied through `weight_decay`.
    pub lambda: f64,
    /// Weight of the compactness hinge.
    pub eta: f64,
    /// Required slack `γ − |w|` on every axis.
    pub kappa: f64,
    /// Hinge margin `Δ` between the true-class score and every other score.
    pub margin_delta: f64,
    /// Base learning rate, multiplied by 0.1 after 60% and again after 85% of
    /// the epochs.
    pub lr: f64,
    pub momentum: f64,
    /// Decay on weight matrices and cone slopes; never on `γ̃`, `b` or biases.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Center update rate `α ∈ (0, 1]`.
    pub center_lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            eta: 1.0,
            kappa: 0.5,
            margin_delta: 1.0,
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 128,
            epochs: 100,
            center_lr: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(alloc::format!("invalid {what}")));
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lambda) {
            return bad("lambda (must be ≥ 0)");
        }
        if !finite_nonneg(self.eta) {
            return bad("eta (must be ≥ 0)");
        }
        if !finite_nonneg(self.kappa) {
            return bad("kappa (must be ≥ 0)");
        }
        if !self.margin_delta.is_finite() {
            return bad("margin_delta");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr (must be > 0)");
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return bad("momentum (must be in [0, 1))");
        }
        if !finite_nonneg(self.weight_decay) {
            return bad("weight_decay (must be ≥ 0)");
        }
        if self.batch_size == 0 {
            return bad("batch_size (must be ≥ 1)");
        }
        if self.epochs == 0 {
            return bad("epochs (must be ≥ 1)");
        }
        if !(self.center_lr > 0.0 && self.center_lr <= 1.0) {
            return bad("center_lr (must be in (0, 1])");
        }
        Ok(())
    }

    /// Step-decayed learning rate for a zero-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let progress = epoch as f64 / self.epochs as f64;
        let mut lr = self.lr;
        if progress >= 0.6 {
            lr *= 0.1;
        }
        if progress >= 0.85 {
            lr *= 0.1;
        }
        lr
    }
}

/// The three summands of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub reg_term: f64,
    /// Batch-mean multi-class hinge (cross-entropy for the soft-max head).
    pub margin_term: f64,
    pub compact_term: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(reg_term: f64, margin_term: f64, compact_term: f64) -> Self {
        Self { reg_term, margin_term, compact_term, total: reg_term + margin_term + compact_term }
    }
}

/// `max(0, Δ − (g_true − g_other))`.
#[inline]
pub fn margin_hinge(g_true: f64, g_other: f64, delta: f64) -> f64 {
    (delta - (g_true - g_other)).max(0.0)
}

/// `Σ_c Σ_m max(0, κ − (−γ̃_cm − |w̃_cm|))` (without the `η` weight).
pub fn compactness_penalty(head: &ConicHead, kappa: f64) -> f64 {
    let mut total = 0.0;
    for c in 0..head.num_classes() {
        for (&w, &g) in head.slope(c).iter().zip(head.gamma(c)) {
            total += (kappa - (-g - libm::fabs(w))).max(0.0);
        }
    }
    total
}

/// A head the training loop can optimize.
pub trait TrainableHead: ClassifierHead + Parameters {
    /// Per-sample data loss. Accumulates parameter gradients into `grad` and
    /// `∂loss/∂f` into `df`, both unscaled.
    fn sample_loss(&self, f: &[f64], label: usize, cfg: &TrainConfig, grad: &mut Self, df: &mut [f64]) -> f64;

    /// Batch-independent terms `(reg, compact)`; gradients added to `grad`.
    fn penalties(&self, cfg: &TrainConfig, grad: &mut Self) -> (f64, f64);

    /// Called once before training with features under the initial network.
    fn prepare(&mut self, _features: &[Vec<f64>], _labels: &[usize]) -> Result<()> {
        Ok(())
    }

    /// Called after every optimizer step with the batch's features.
    fn after_step(&mut self, _features: &[Vec<f64>], _labels: &[usize], _cfg: &TrainConfig) {}
}

impl TrainableHead for ConicHead {
    fn sample_loss(&self, f: &[f64], label: usize, cfg: &TrainConfig, grad: &mut Self, df: &mut [f64]) -> f64 {
        let classes = self.num_classes();
        let scores: Vec<f64> = (0..classes).map(|c| self.score(c, f)).collect();
        // coefficient of ∂g_c in the subgradient: −(#active) for the true
        // class, +1 for every active rival
        let mut coef = vec![0.0; classes];
        let mut loss = 0.0;
        for j in (0..classes).filter(|&j| j != label) {
            let slack = cfg.margin_delta - (scores[label] - scores[j]);
            if slack > 0.0 {
                loss += slack;
                coef[label] -= 1.0;
                coef[j] += 1.0;
            }
        }
        for (c, &a) in coef.iter().enumerate().filter(|(_, &a)| a != 0.0) {
            let s = self.center(c).to_vec();
            let (w, gamma) = (self.slope(c).to_vec(), self.gamma(c).to_vec());
            for m in 0..f.len() {
                let u = f[m] - s[m];
                grad.slope_mut(c)[m] += a * u;
                grad.gamma_mut(c)[m] += a * libm::fabs(u);
                df[m] += a * (w[m] + gamma[m] * sgn(u));
            }
            *grad.offset_mut(c) += a;
        }
        loss
    }

    fn penalties(&self, cfg: &TrainConfig, grad: &mut Self) -> (f64, f64) {
        let mut reg = 0.0;
        let mut compact = 0.0;
        for c in 0..self.num_classes() {
            for m in 0..self.feature_dim() {
                let (w, g) = (self.slope(c)[m], self.gamma(c)[m]);
                reg += w * w;
                grad.slope_mut(c)[m] += cfg.lambda * w;
                let violation = cfg.kappa - (-g - libm::fabs(w));
                if violation > 0.0 {
                    compact += violation;
                    grad.gamma_mut(c)[m] += cfg.eta;
                    grad.slope_mut(c)[m] += cfg.eta * sgn(w);
                }
            }
        }
        (0.5 * cfg.lambda * reg, cfg.eta * compact)
    }

    fn prepare(&mut self, features: &[Vec<f64>], labels: &[usize]) -> Result<()> {
        self.init_centers(features.iter().map(Vec::as_slice).zip(labels.iter().copied()))
    }

    fn after_step(&mut self, features: &[Vec<f64>], labels: &[usize], cfg: &TrainConfig) {
        update_centers(self, features, labels, cfg.center_lr);
    }
}

impl TrainableHead for SoftmaxHead {
    fn sample_loss(&self, f: &[f64], label: usize, _cfg: &TrainConfig, grad: &mut Self, df: &mut [f64]) -> f64 {
        let (loss, dlogits) = cross_entropy(self, f, label);
        let dim = f.len();
        let weights = self.weights();
        for (c, &d) in dlogits.iter().enumerate() {
            grad.bias_mut()[c] += d;
            for m in 0..dim {
                grad.weights_mut()[c * dim + m] += d * f[m];
                df[m] += d * weights[c * dim + m];
            }
        }
        loss
    }

    fn penalties(&self, cfg: &TrainConfig, grad: &mut Self) -> (f64, f64) {
        let mut reg = 0.0;
        for (g, &w) in grad.weights_mut().iter_mut().zip(self.weights()) {
            reg += w * w;
            *g += cfg.lambda * w;
        }
        (0.5 * cfg.lambda * reg, 0.0)
    }
}

/// Cross-entropy `−ln p_y` and its gradient `p − e_y` with respect to the logits.
pub fn cross_entropy(head: &SoftmaxHead, f: &[f64], label: usize) -> (f64, Vec<f64>) {
    let logits = head.logits(f).expect("feature dimension checked by caller");
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    let mut dlogits = softmax(&logits);
    dlogits[label] -= 1.0;
    (log_sum - logits[label], dlogits)
}

/// Gradients for every trainable parameter of a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<H> {
    pub net: FeatureNet,
    pub head: H,
}

/// Loss, gradients and the batch features they were computed from.
#[derive(Debug, Clone)]
pub struct BatchResult<H> {
    pub loss: LossBreakdown,
    pub grads: Gradients<H>,
    pub features: Vec<Vec<f64>>,
}

/// Full objective on one batch with analytic subgradients.
///
/// Hinges exactly at their threshold are inactive, `sgn(0) = 0` at the kinks
/// of `|·|`, and centers are treated as constants.
pub fn loss_and_gradients<H: TrainableHead>(
    inputs: &[&[f64]],
    labels: &[usize],
    model: &Model<H>,
    cfg: &TrainConfig,
) -> Result<BatchResult<H>> {
    if inputs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_dim(inputs.len(), labels.len())?;
    let classes = model.head.num_classes();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut grads = Gradients { net: model.net.zeroed(), head: model.head.zeroed() };
    let mut features = Vec::with_capacity(inputs.len());
    let mut data_loss = 0.0;
    let mut df = vec![0.0; model.head.feature_dim()];
    let mut head_grad = model.head.zeroed();
    for (&x, &y) in inputs.iter().zip(labels) {
        let (f, cache) = model.net.forward(x)?;
        df.fill(0.0);
        data_loss += model.head.sample_loss(&f, y, cfg, &mut head_grad, &mut df);
        if df.iter().any(|&v| v != 0.0) {
            df.iter_mut().for_each(|v| *v *= scale);
            model.net.backward(&cache, &df, &mut grads.net);
        }
        features.push(f);
    }
    for ((_, acc), (_, g)) in grads.head.params_mut().into_iter().zip(head_grad.params()) {
        for (a, &v) in acc.iter_mut().zip(g) {
            *a += scale * v;
        }
    }
    let (reg, compact) = model.head.penalties(cfg, &mut grads.head);
    Ok(BatchResult { loss: LossBreakdown::new(reg, scale * data_loss, compact), grads, features })
}

/// Momentum buffers, one per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    velocity: Vec<Vec<f64>>,
}

impl Momentum {
    pub fn new<P: Parameters>(params: &P) -> Self {
        Self { velocity: params.params().iter().map(|(_, p)| vec![0.0; p.len()]).collect() }
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }
}

/// `v ← μv − lr·(∇ + decay·θ)` on decayed blocks, `v ← μv − lr·∇` elsewhere;
/// then `θ ← θ + v`.
pub fn sgd_step<P: Parameters>(params: &mut P, grads: &P, state: &mut Momentum, cfg: &TrainConfig, lr: f64) {
    for (((kind, theta), (_, grad)), v) in
        params.params_mut().into_iter().zip(grads.params()).zip(state.velocity.iter_mut())
    {
        let decay = if kind.decayed() { cfg.weight_decay } else { 0.0 };
        for ((t, &g), v) in theta.iter_mut().zip(grad).zip(v.iter_mut()) {
            *v = cfg.momentum * *v - lr * (g + decay * *t);
            *t += *v;
        }
    }
}

/// Moves each present class's center toward its batch samples:
/// `Δs_c = Σ_{yᵢ=c}(s_c − fᵢ)/(1 + m_c)`, `s_c ← s_c − α Δs_c`.
/// Absent classes keep their centers; a shared vertex pools every sample.
pub fn update_centers(head: &mut ConicHead, features: &[Vec<f64>], labels: &[usize], center_lr: f64) {
    let dim = head.feature_dim();
    if head.shared_vertex() {
        if features.is_empty() {
            return;
        }
        let s = head.center(0).to_vec();
        let mut delta = vec![0.0; dim];
        for f in features {
            for m in 0..dim {
                delta[m] += s[m] - f[m];
            }
        }
        let denom = 1.0 + features.len() as f64;
        let updated: Vec<f64> = (0..dim).map(|m| s[m] - center_lr * delta[m] / denom).collect();
        for c in 0..head.num_classes() {
            head.center_mut(c).copy_from_slice(&updated);
        }
        return;
    }
    let classes = head.num_classes();
    let mut delta = vec![0.0; classes * dim];
    let mut counts = vec![0usize; classes];
    for (f, &y) in features.iter().zip(labels) {
        counts[y] += 1;
        let s = head.center(y);
        for m in 0..dim {
            delta[y * dim + m] += s[m] - f[m];
        }
    }
    for c in (0..classes).filter(|&c| counts[c] > 0) {
        let denom = 1.0 + counts[c] as f64;
        for (m, s) in head.center_mut(c).iter_mut().enumerate() {
            *s -= center_lr * delta[c * dim + m] / denom;
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// One-based epoch number.
    pub epoch: usize,
    /// Sample-weighted mean of the epoch's batch losses.
    pub loss: LossBreakdown,
    /// Accuracy on the full training set after the epoch.
    pub train_acc: f64,
}

/// Accuracy of `model` on every row of `dataset`.
pub fn dataset_accuracy<H: ClassifierHead>(model: &Model<H>, dataset: &Dataset) -> Result<f64> {
    let preds = dataset.iter().map(|(x, _)| model.predict(x)).collect::<Result<Vec<_>>>()?;
    accuracy(&preds, dataset.labels())
}

/// Mini-batch training with per-epoch seeded shuffling. Per batch: forward,
/// loss and gradients, SGD step on network and head, then the head's
/// post-step hook (center update for the conic head).
pub fn fit<H, F>(
    dataset: &Dataset,
    model: &mut Model<H>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<EpochMetrics>>
where
    H: TrainableHead,
    F: FnMut(&EpochMetrics),
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_dim(model.net.input_dim(), dataset.dim())?;
    check_dim(model.head.num_classes(), dataset.classes())?;
    if let Some(c) = dataset.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(c));
    }

    let initial: Vec<Vec<f64>> = dataset.iter().map(|(x, _)| model.net.features(x)).collect::<Result<_>>()?;
    model.head.prepare(&initial, dataset.labels())?;

    let mut net_state = Momentum::new(&model.net);
    let mut head_state = Momentum::new(&model.head);
    let mut rng = rng(mix_seed(cfg.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut sums = [0.0; 3];
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| dataset.sample(i)).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels()[i]).collect();
            let result = loss_and_gradients(&inputs, &labels, model, cfg)?;
            if !result.loss.total.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            sgd_step(&mut model.net, &result.grads.net, &mut net_state, cfg, lr);
            sgd_step(&mut model.head, &result.grads.head, &mut head_state, cfg, lr);
            model.head.after_step(&result.features, &labels, cfg);
            let weight = batch.len() as f64;
            sums[0] += weight * result.loss.reg_term;
            sums[1] += weight * result.loss.margin_term;
            sums[2] += weight * result.loss.compact_term;
        }
        let n = dataset.len() as f64;
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            loss: LossBreakdown::new(sums[0] / n, sums[1] / n, sums[2] / n),
            train_acc: dataset_accuracy(model, dataset)?,
        };
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(history)
}
