//! In-memory labeled datasets, synthetic generators, seeded splits and
//! z-score standardization. Everything here is a pure function of its inputs
//! and seed.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::util::{all_finite, rng};

/// Row-major feature matrix with integer labels in `0..classes`.
///
/// The feature buffer is shared, so relabeling views such as
/// [`make_one_vs_rest`] never copy it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Arc<[f64]>,
    dim: usize,
    labels: Vec<usize>,
    classes: usize,
    class_names: Option<Vec<String>>,
    provenance: String,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if classes == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        check_dim(labels.len() * dim, features.len())?;
        if !all_finite(&features) {
            return Err(Error::NonFinite("dataset features"));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self { features: features.into(), dim, labels, classes, class_names: None, provenance: String::new() })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        check_dim(self.classes, names.len())?;
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// True when both datasets view the same feature allocation.
    pub fn shares_features(&self, other: &Dataset) -> bool {
        Arc::ptr_eq(&self.features, &other.features)
    }

    /// Copies the given rows, keeping labels and class metadata.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        Dataset {
            features: features.into(),
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Rows whose label is in `keep`, relabeled to their position in `keep`.
    pub fn select_classes(&self, keep: &[usize]) -> Result<Dataset> {
        let mut map = vec![None; self.classes];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.classes {
                return Err(Error::LabelOutOfRange { label: old, classes: self.classes });
            }
            map[old] = Some(new);
        }
        let indices: Vec<usize> = (0..self.len()).filter(|&i| map[self.labels[i]].is_some()).collect();
        let mut out = self.subset(&indices);
        out.labels = indices.iter().map(|&i| map[self.labels[i]].unwrap()).collect();
        out.classes = keep.len();
        out.class_names = self.class_names.as_ref().map(|names| keep.iter().map(|&c| names[c].clone()).collect());
        Ok(out)
    }

    fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> Dataset {
        let features: Vec<f64> = self.features.iter().enumerate().map(|(k, &v)| f(k % self.dim, v)).collect();
        Dataset { features: features.into(), ..self.clone() }
    }
}

/// Isotropic Gaussian clusters around seeded uniform centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spread: f64,
    /// Centers are drawn uniformly from `[-center_box, center_box]^dim`.
    pub center_box: f64,
    pub seed: u64,
}

impl Blobs {
    pub fn new(classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> Self {
        Self { classes, per_class, dim, spread, center_box: 10.0, seed }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = rng(self.seed);
        (0..self.classes)
            .map(|_| (0..self.dim).map(|_| self.center_box * (2.0 * rng.random::<f64>() - 1.0)).collect())
            .collect()
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.classes < 2 || self.per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "blobs need ≥ 2 classes, ≥ 1 sample per class and dim ≥ 1 (got {}, {}, {})",
                self.classes, self.per_class, self.dim
            )));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) || !(self.center_box >= 0.0) {
            return Err(Error::InvalidArgument("spread and center box must be finite and non-negative".into()));
        }
        let centers = self.centers();
        let mut rng = rng(self.seed ^ 0x5EED_B10B);
        let n = self.classes * self.per_class;
        let mut features = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..self.per_class {
                for &m in center {
                    let z: f64 = rng.sample(StandardNormal);
                    features.push(m + self.spread * z);
                }
                labels.push(c);
            }
        }
        Ok(Dataset::new(features, self.dim, labels, self.classes)?.with_provenance(format!(
            "blobs(classes={}, per_class={}, dim={}, spread={}, box={}, seed={})",
            self.classes, self.per_class, self.dim, self.spread, self.center_box, self.seed
        )))
    }
}

pub fn make_blobs(classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    Blobs::new(classes, per_class, dim, spread, seed).generate()
}

/// Binary 2D set: a Gaussian positive cluster at the origin (label 1) with
/// negative clusters (label 0) spread over the upper half of a circle.
/// The positives are only partly enclosed, so without a compactness margin
/// their acceptance region is free to grow downward.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcBinary {
    pub positives: usize,
    pub negative_clusters: usize,
    pub per_negative: usize,
    pub radius: f64,
    pub spread: f64,
    pub seed: u64,
}

impl ArcBinary {
    pub fn new(positives: usize, seed: u64) -> Self {
        Self { positives, negative_clusters: 4, per_negative: positives / 2, radius: 4.0, spread: 0.7, seed }
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.positives == 0 || self.negative_clusters == 0 || self.per_negative == 0 {
            return Err(Error::InvalidArgument("arc set needs positives and negatives".into()));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite() && self.radius.is_finite()) {
            return Err(Error::InvalidArgument("spread and radius must be finite".into()));
        }
        let mut rng = rng(self.seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..self.positives {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            features.extend_from_slice(&[self.spread * a, self.spread * b]);
            labels.push(1);
        }
        for k in 0..self.negative_clusters {
            let t = core::f64::consts::PI * (k as f64 + 0.5) / self.negative_clusters as f64;
            let (cx, cy) = (self.radius * libm::cos(t), self.radius * libm::sin(t));
            for _ in 0..self.per_negative {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                features.extend_from_slice(&[cx + self.spread * a, cy + self.spread * b]);
                labels.push(0);
            }
        }
        Ok(Dataset::new(features, 2, labels, 2)?
            .with_class_names(vec!["negative".into(), "positive".into()])?
            .with_provenance(format!(
                "arc-binary(positives={}, clusters={}, per_negative={}, radius={}, spread={}, seed={})",
                self.positives, self.negative_clusters, self.per_negative, self.radius, self.spread, self.seed
            )))
    }
}

/// Three 2D classes: a large cluster far away (0), a tight blob (1) and a
/// ring (2) around the blob. The pooled mean sits between the far cluster and
/// the blob, so a single shared vertex sees blob and ring in one orthant.
pub fn make_far_cluster(seed: u64) -> Result<Dataset> {
    let mut rng = rng(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..300 {
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        features.extend_from_slice(&[-3.0 + 0.5 * a, -3.0 + 0.5 * b]);
        labels.push(0);
    }
    for _ in 0..150 {
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        features.extend_from_slice(&[1.5 + 0.25 * a, 1.5 + 0.25 * b]);
        labels.push(1);
    }
    for _ in 0..150 {
        let t = core::f64::consts::TAU * rng.random::<f64>();
        let r = 1.2 + 0.1 * rng.sample::<f64, _>(StandardNormal);
        features.extend_from_slice(&[1.5 + r * libm::cos(t), 1.5 + r * libm::sin(t)]);
        labels.push(2);
    }
    Ok(Dataset::new(features, 2, labels, 3)?.with_provenance(format!("far-cluster(seed={seed})")))
}

/// Binary relabeling: `positive_class → 1`, everything else `→ 0`. The
/// feature matrix is shared with the input.
pub fn make_one_vs_rest(dataset: &Dataset, positive_class: usize) -> Result<Dataset> {
    if positive_class >= dataset.classes {
        return Err(Error::LabelOutOfRange { label: positive_class, classes: dataset.classes });
    }
    if !dataset.labels.contains(&positive_class) {
        return Err(Error::MissingClass(positive_class));
    }
    let names = dataset.class_names.as_ref().map(|names| vec![String::from("rest"), names[positive_class].clone()]);
    Ok(Dataset {
        features: Arc::clone(&dataset.features),
        dim: dataset.dim,
        labels: dataset.labels.iter().map(|&l| usize::from(l == positive_class)).collect(),
        classes: 2,
        class_names: names,
        provenance: format!("{} | one-vs-rest({positive_class})", dataset.provenance),
    })
}

/// Seeded train/validation/test partition.
///
/// Part sizes are `round(fraction · n)` (per class when stratified), capped by
/// what is left. Rows keep their original order inside each part.
pub fn split(
    dataset: &Dataset,
    fractions: [f64; 3],
    stratified: bool,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::InvalidArgument("split fractions must be finite and non-negative".into()));
    }
    if fractions.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument("split fractions sum to more than 1".into()));
    }
    let mut rng = rng(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    let groups: Vec<Vec<usize>> = if stratified {
        (0..dataset.classes).map(|c| (0..dataset.len()).filter(|&i| dataset.labels[i] == c).collect()).collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };
    for (g, mut members) in groups.into_iter().enumerate() {
        members.shuffle(&mut rng);
        let m = members.len();
        let mut start = 0;
        for (k, &fraction) in fractions.iter().enumerate() {
            let take = (libm::round(fraction * m as f64) as usize).min(m - start);
            if stratified && fraction > 0.0 && take == 0 && m > 0 {
                return Err(Error::InvalidArgument(format!(
                    "stratified split part {k} would get no samples of class {g}"
                )));
            }
            parts[k].extend_from_slice(&members[start..start + take]);
            start += take;
        }
    }
    let [mut a, mut b, mut c] = parts;
    a.sort_unstable();
    b.sort_unstable();
    c.sort_unstable();
    Ok((dataset.subset(&a), dataset.subset(&b), dataset.subset(&c)))
}

/// Per-feature z-scoring statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub const STD_FLOOR: f64 = 1e-8;

    /// Mean and population standard deviation of each column, std floored at
    /// [`Standardizer::STD_FLOOR`].
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("standardization data"));
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; train.dim];
        for (x, _) in train.iter() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; train.dim];
        for (x, _) in train.iter() {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| libm::sqrt(s / n).max(Self::STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        check_dim(self.mean.len(), dataset.dim)?;
        Ok(dataset.map_features(|m, v| (v - self.mean[m]) / self.std[m]))
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.mean.len(), x.len())?;
        Ok(x.iter().enumerate().map(|(m, v)| (v - self.mean[m]) / self.std[m]).collect())
    }
}

/// Fits statistics on `train` only and applies them to `train` and `others`.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Standardizer, Dataset, Vec<Dataset>)> {
    let stats = Standardizer::fit(train)?;
    let train_out = stats.apply(train)?;
    let rest = others.iter().map(|d| stats.apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((stats, train_out, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_class() -> Dataset {
        Dataset::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1, vec![0, 1, 1, 2, 0, 1, 2], 3).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0, f64::NAN], 1, vec![0, 0], 1).is_err());
        assert_eq!(Dataset::new(vec![0.0], 1, vec![3], 2), Err(Error::LabelOutOfRange { label: 3, classes: 2 }));
        assert!(Dataset::new(vec![0.0; 3], 2, vec![0, 0], 1).is_err());
    }

    #[test]
    fn zero_spread_blobs_sit_on_centers() {
        let blobs = Blobs::new(3, 4, 2, 0.0, 17);
        let ds = blobs.generate().unwrap();
        let centers = blobs.centers();
        for (x, y) in ds.iter() {
            assert_eq!(x, &centers[y][..]);
        }
    }

    #[test]
    fn blobs_are_deterministic() {
        assert_eq!(make_blobs(3, 10, 4, 1.0, 5).unwrap(), make_blobs(3, 10, 4, 1.0, 5).unwrap());
        assert_ne!(make_blobs(3, 10, 4, 1.0, 5).unwrap(), make_blobs(3, 10, 4, 1.0, 6).unwrap());
        assert!(make_blobs(1, 10, 4, 1.0, 5).is_err());
        assert!(make_blobs(2, 0, 4, 1.0, 5).is_err());
    }

    #[test]
    fn one_vs_rest_counts_and_sharing() {
        let ds = three_class();
        let bin = make_one_vs_rest(&ds, 1).unwrap();
        assert_eq!(bin.class_counts(), vec![4, 3]);
        assert!(bin.shares_features(&ds));
        let twice = make_one_vs_rest(&bin, 1).unwrap();
        assert_eq!(twice.labels(), bin.labels());
        let total: usize = (0..3).map(|c| make_one_vs_rest(&ds, c).unwrap().class_counts()[1]).sum();
        assert_eq!(total, ds.len());
        assert!(make_one_vs_rest(&ds, 3).is_err());
        let missing = Dataset::new(vec![0.0, 1.0], 1, vec![0, 0], 2).unwrap();
        assert_eq!(make_one_vs_rest(&missing, 1), Err(Error::MissingClass(1)));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = make_blobs(2, 50, 2, 1.0, 3).unwrap();
        let (tr, va, te) = split(&ds, [0.6, 0.0, 0.4], false, 9).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (60, 0, 40));
        let again = split(&ds, [0.6, 0.0, 0.4], false, 9).unwrap();
        assert_eq!(tr, again.0);
        assert_eq!(te, again.2);
        assert!(split(&ds, [0.7, 0.2, 0.2], false, 9).is_err());
        assert!(split(&ds, [-0.1, 0.2, 0.2], false, 9).is_err());
    }

    #[test]
    fn stratified_split_balances_classes() {
        let ds = make_blobs(2, 51, 2, 1.0, 3).unwrap();
        let (tr, va, te) = split(&ds, [0.5, 0.2, 0.3], true, 1).unwrap();
        for part in [&tr, &va, &te] {
            let c = part.class_counts();
            assert!(c[0].abs_diff(c[1]) <= 1, "{c:?}");
        }
        assert_eq!(tr.len() + va.len() + te.len(), 102);
        let tiny = Dataset::new(vec![0.0, 1.0, 2.0], 1, vec![0, 0, 1], 2).unwrap();
        assert!(split(&tiny, [0.5, 0.0, 0.5], true, 0).is_err());
    }

    #[test]
    fn standardize_train_statistics() {
        let ds = make_blobs(3, 40, 3, 2.5, 8).unwrap();
        let (tr, _, te) = split(&ds, [0.6, 0.0, 0.4], true, 2).unwrap();
        let (stats, tr_z, rest) = standardize(&tr, &[&te]).unwrap();
        let n = tr_z.len() as f64;
        for m in 0..3 {
            let col: Vec<f64> = tr_z.iter().map(|(x, _)| x[m]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let std = libm::sqrt(col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n);
            assert!(mean.abs() < 1e-9);
            assert!((std - 1.0).abs() < 1e-6);
        }
        assert_eq!(stats.apply(&tr).unwrap(), tr_z);
        assert_eq!(rest[0], stats.apply(&te).unwrap());
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let ds = Dataset::new(vec![3.0, 1.0, 3.0, 2.0, 3.0, 4.0], 2, vec![0, 0, 0], 1).unwrap();
        let (_, z, _) = standardize(&ds, &[]).unwrap();
        assert!(z.iter().all(|(x, _)| x[0] == 0.0));
    }

    #[test]
    fn select_classes_relabels() {
        let ds = three_class();
        let sub = ds.select_classes(&[2, 0]).unwrap();
        assert_eq!(sub.labels(), &[1, 0, 1, 0]);
        assert_eq!(sub.classes(), 2);
        assert_eq!(sub.features(), &[0.0, 3.0, 4.0, 6.0]);
    }
}
