//! Analytic vs central finite-difference gradients of the full objective on
//! small random problems drawn away from every kink.

use dcepcc_core::model::{ClassifierHead, ConicHead, FeatureNet, Model, ParamKind, Parameters};
use dcepcc_core::training::{loss_and_gradients, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const STEP: f64 = 1e-5;
pub const THRESHOLD: f64 = 1e-4;
/// Minimum distance of every kink argument from zero.
const KINK_CLEARANCE: f64 = 1e-3;
/// Relative errors use `max(|analytic|, |numeric|, FLOOR)` as denominator.
const FLOOR: f64 = 1e-3;
const SAMPLES: usize = 6;
const HIDDEN: usize = 8;

/// Test hook: perturbs the analytic gradient so the check must fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    ScaleOffsets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub group: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemReport {
    pub dim: usize,
    pub classes: usize,
    /// Seed of the accepted draw after rejecting draws too close to a kink.
    pub draw: u64,
    pub groups: Vec<GroupError>,
}

impl ProblemReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

struct Problem {
    model: Model<ConicHead>,
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    cfg: TrainConfig,
}

fn draw(dim: usize, classes: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = FeatureNet::new(&[dim, HIDDEN, dim], rng.random()).expect("valid widths");
    let n = classes * dim;
    let mut uniform = |lo: f64, hi: f64, k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(lo..hi)).collect() };
    let w = uniform(-0.5, 0.5, n);
    let gamma = uniform(-1.5, -0.3, n);
    let b = uniform(0.5, 1.5, classes);
    let centers = uniform(-0.5, 0.5, n);
    let head = ConicHead::from_parts(classes, dim, w, gamma, b, centers, false).expect("valid head");
    let inputs = (0..SAMPLES).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let labels = (0..SAMPLES).map(|i| i % classes).collect();
    let cfg = TrainConfig { lambda: 0.1, eta: 0.7, kappa: 0.8, ..TrainConfig::default() };
    Problem { model: Model::new(net, head).expect("matching dims"), inputs, labels, cfg }
}

/// Smallest distance from zero of any quantity whose sign switches a
/// subgradient branch: ReLU pre-activations, `f − s`, hinge slacks,
/// compactness violations and the slopes inside `|w̃|`.
fn kink_distance(p: &Problem) -> f64 {
    let head = &p.model.head;
    let mut d = f64::INFINITY;
    for (x, &y) in p.inputs.iter().zip(&p.labels) {
        let (f, cache) = p.model.net.forward(x).expect("dims checked");
        let pre = cache.pre_activations();
        for z in pre[..pre.len() - 1].iter().flatten() {
            d = d.min(z.abs());
        }
        let scores = head.scores(&f).expect("dims checked");
        for c in 0..head.num_classes() {
            for (v, s) in f.iter().zip(head.center(c)) {
                d = d.min((v - s).abs());
            }
            if c != y {
                d = d.min((p.cfg.margin_delta - (scores[y] - scores[c])).abs());
            }
        }
    }
    for c in 0..head.num_classes() {
        for (&w, &g) in head.slope(c).iter().zip(head.gamma(c)) {
            d = d.min(w.abs()).min((p.cfg.kappa - (-g - w.abs())).abs());
        }
    }
    d
}

fn total_loss(p: &Problem, model: &Model<ConicHead>) -> f64 {
    let inputs: Vec<&[f64]> = p.inputs.iter().map(Vec::as_slice).collect();
    loss_and_gradients(&inputs, &p.labels, model, &p.cfg).expect("valid problem").loss.total
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

fn check_params<P: Parameters>(
    analytic: &P,
    model: &Model<ConicHead>,
    select: fn(&mut Model<ConicHead>) -> &mut P,
    p: &Problem,
    fault: Fault,
    groups: &mut Vec<GroupError>,
) {
    let grads: Vec<(ParamKind, Vec<f64>)> = analytic.params().into_iter().map(|(k, g)| (k, g.to_vec())).collect();
    for (block, (kind, grad)) in grads.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..grad.len() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            select(&mut plus).params_mut()[block].1[i] += STEP;
            select(&mut minus).params_mut()[block].1[i] -= STEP;
            let numeric = (total_loss(p, &plus) - total_loss(p, &minus)) / (2.0 * STEP);
            let mut a = grad[i];
            if fault == Fault::ScaleOffsets && *kind == ParamKind::ConeOffset {
                a = a * 1.01 + 1e-2;
            }
            worst = worst.max(rel_error(a, numeric));
        }
        groups.push(GroupError { group: kind.name(), max_rel_error: worst, checked: grad.len() });
    }
}

/// Checks one `(dim, classes)` problem. Draws are rejected until every kink
/// argument is at least `1e-3` from zero.
pub fn check_problem(dim: usize, classes: usize, seed: u64, fault: Fault) -> ProblemReport {
    let base = seed ^ ((dim as u64) << 32) ^ ((classes as u64) << 40);
    let (problem, draw_seed) = (0u64..)
        .map(|k| (draw(dim, classes, base.wrapping_add(k)), base.wrapping_add(k)))
        .find(|(p, _)| kink_distance(p) > KINK_CLEARANCE)
        .expect("unbounded search");
    let inputs: Vec<&[f64]> = problem.inputs.iter().map(Vec::as_slice).collect();
    let result = loss_and_gradients(&inputs, &problem.labels, &problem.model, &problem.cfg).expect("valid problem");
    let mut groups = Vec::new();
    let model = problem.model.clone();
    check_params(&result.grads.net, &model, |m| &mut m.net, &problem, fault, &mut groups);
    check_params(&result.grads.head, &model, |m| &mut m.head, &problem, fault, &mut groups);
    ProblemReport { dim, classes, draw: draw_seed, groups: merge(groups) }
}

/// Folds blocks that share a group name, such as the layers of the network.
fn merge(groups: Vec<GroupError>) -> Vec<GroupError> {
    let mut out: Vec<GroupError> = Vec::new();
    for g in groups {
        match out.iter_mut().find(|o| o.group == g.group) {
            Some(o) => {
                o.max_rel_error = o.max_rel_error.max(g.max_rel_error);
                o.checked += g.checked;
            }
            None => out.push(g),
        }
    }
    out
}

/// Every combination of `dims × classes`.
pub fn run(dims: &[usize], classes: &[usize], seed: u64, fault: Fault) -> Vec<ProblemReport> {
    dims.iter().flat_map(|&d| classes.iter().map(move |&c| check_problem(d, c, seed, fault))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_passes() {
        for r in run(&[2, 4, 8], &[2, 3, 5], 0, Fault::None) {
            assert!(r.max_rel_error() < THRESHOLD, "{r:?}");
        }
    }

    #[test]
    fn fault_is_detected() {
        let r = check_problem(2, 3, 0, Fault::ScaleOffsets);
        assert!(r.max_rel_error() > THRESHOLD);
    }
}
