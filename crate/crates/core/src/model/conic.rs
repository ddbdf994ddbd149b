use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{ClassifierHead, ParamKind, Parameters};
use crate::error::{check_dim, Error, Result};
use crate::geometry::ConicRegion;
use crate::util::{all_finite, rng, sgn};

/// Multi-class extended polyhedral conic head in tilde form:
///
/// ```text
/// g_c(f) = w̃_cᵀ(f − s_c) + γ̃_cᵀ|f − s_c| + b_c
/// ```
///
/// `g_c ≥ 0` is class `c`'s acceptance region and the prediction is
/// `argmax_c g_c`. Centers `s_c` are running statistics, not trainable
/// parameters: they are skipped by [`Parameters`] and moved only by
/// [`crate::training::update_centers`].
///
/// With `shared_vertex` every class uses one pooled center.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicHead {
    classes: usize,
    dim: usize,
    w: Vec<f64>,
    gamma: Vec<f64>,
    b: Vec<f64>,
    centers: Vec<f64>,
    shared_vertex: bool,
}

impl ConicHead {
    /// `w̃ ~ U(−0.01, 0.01)`, `γ̃ = −1`, `b = 1`, centers at the origin until
    /// [`ConicHead::init_centers`] runs. Every class region starts bounded.
    pub fn new(classes: usize, dim: usize, shared_vertex: bool, seed: u64) -> Result<Self> {
        Self::with_gamma_init(classes, dim, shared_vertex, -1.0, seed)
    }

    /// Same as [`ConicHead::new`] with every `γ̃` entry set to `gamma_init`,
    /// which must be negative. A small magnitude leaves the compactness hinge
    /// active from the first step.
    pub fn with_gamma_init(
        classes: usize,
        dim: usize,
        shared_vertex: bool,
        gamma_init: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(gamma_init < 0.0) || !gamma_init.is_finite() {
            return Err(Error::InvalidArgument("gamma_init must be finite and negative".into()));
        }
        if classes == 0 || dim == 0 {
            return Err(Error::InvalidArgument("conic head needs at least one class and dimension".into()));
        }
        let mut rng = rng(seed);
        let w = (0..classes * dim).map(|_| 0.01 * (2.0 * rng.random::<f64>() - 1.0)).collect();
        Ok(Self {
            classes,
            dim,
            w,
            gamma: vec![gamma_init; classes * dim],
            b: vec![1.0; classes],
            centers: vec![0.0; classes * dim],
            shared_vertex,
        })
    }

    /// Builds a head from row-major `classes × dim` blocks.
    pub fn from_parts(
        classes: usize,
        dim: usize,
        w: Vec<f64>,
        gamma: Vec<f64>,
        b: Vec<f64>,
        centers: Vec<f64>,
        shared_vertex: bool,
    ) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::InvalidArgument("conic head needs at least one class and dimension".into()));
        }
        check_dim(classes * dim, w.len())?;
        check_dim(classes * dim, gamma.len())?;
        check_dim(classes, b.len())?;
        check_dim(classes * dim, centers.len())?;
        if !all_finite(&w) || !all_finite(&gamma) || !all_finite(&b) || !all_finite(&centers) {
            return Err(Error::NonFinite("conic head parameters"));
        }
        Ok(Self { classes, dim, w, gamma, b, centers, shared_vertex })
    }

    pub fn shared_vertex(&self) -> bool {
        self.shared_vertex
    }

    pub fn slope(&self, c: usize) -> &[f64] {
        &self.w[c * self.dim..(c + 1) * self.dim]
    }

    pub fn gamma(&self, c: usize) -> &[f64] {
        &self.gamma[c * self.dim..(c + 1) * self.dim]
    }

    pub fn offset(&self, c: usize) -> f64 {
        self.b[c]
    }

    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    pub fn center_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.centers[c * self.dim..(c + 1) * self.dim]
    }

    pub fn slope_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.w[c * self.dim..(c + 1) * self.dim]
    }

    pub fn gamma_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.gamma[c * self.dim..(c + 1) * self.dim]
    }

    pub fn offset_mut(&mut self, c: usize) -> &mut f64 {
        &mut self.b[c]
    }

    /// Sets every center to its class mean (the pooled mean when the vertex is
    /// shared). Classes without samples keep their current center.
    pub fn init_centers<'a, I>(&mut self, samples: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let groups = if self.shared_vertex { 1 } else { self.classes };
        let mut sums = vec![0.0; groups * self.dim];
        let mut counts = vec![0usize; groups];
        for (f, label) in samples {
            check_dim(self.dim, f.len())?;
            if label >= self.classes {
                return Err(Error::LabelOutOfRange { label, classes: self.classes });
            }
            let g = if self.shared_vertex { 0 } else { label };
            counts[g] += 1;
            for (s, v) in sums[g * self.dim..(g + 1) * self.dim].iter_mut().zip(f) {
                *s += v;
            }
        }
        for c in 0..self.classes {
            let g = if self.shared_vertex { 0 } else { c };
            if counts[g] == 0 {
                continue;
            }
            let n = counts[g] as f64;
            for m in 0..self.dim {
                self.centers[c * self.dim + m] = sums[g * self.dim + m] / n;
            }
        }
        Ok(())
    }

    /// Score of a single class; `f` must have the head's dimension.
    pub fn score(&self, c: usize, f: &[f64]) -> f64 {
        let (w, gamma, s) = (self.slope(c), self.gamma(c), self.center(c));
        let mut acc = 0.0;
        for m in 0..self.dim {
            let u = f[m] - s[m];
            acc += w[m] * u + gamma[m] * libm::fabs(u);
        }
        acc + self.b[c]
    }

    /// `∂g_c/∂f = w̃_c + γ̃_c ⊙ sgn(f − s_c)` with `sgn(0) = 0`.
    pub fn input_gradient(&self, f: &[f64], c: usize) -> Result<Vec<f64>> {
        check_dim(self.dim, f.len())?;
        if c >= self.classes {
            return Err(Error::LabelOutOfRange { label: c, classes: self.classes });
        }
        let (w, gamma, s) = (self.slope(c), self.gamma(c), self.center(c));
        Ok((0..self.dim).map(|m| w[m] + gamma[m] * sgn(f[m] - s[m])).collect())
    }

    /// Class `c` in the original sign convention: `w = −w̃`, `γ = −γ̃`, same
    /// `s` and `b`, so that `eval(f) = −g_c(f)`.
    pub fn region(&self, c: usize) -> ConicRegion {
        ConicRegion::new(
            self.center(c).to_vec(),
            self.slope(c).iter().map(|v| -v).collect(),
            self.gamma(c).iter().map(|v| -v).collect(),
            self.b[c],
        )
        .expect("head parameters are finite and dimension-consistent")
    }

    /// Inverse of [`ConicHead::region`] for one class.
    pub fn set_region(&mut self, c: usize, region: &ConicRegion) -> Result<()> {
        check_dim(self.dim, region.dim())?;
        for m in 0..self.dim {
            self.w[c * self.dim + m] = -region.slope()[m];
            self.gamma[c * self.dim + m] = -region.gamma()[m];
            self.centers[c * self.dim + m] = region.vertex()[m];
        }
        self.b[c] = region.offset();
        Ok(())
    }
}

impl ClassifierHead for ConicHead {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn scores(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, f.len())?;
        Ok((0..self.classes).map(|c| self.score(c, f)).collect())
    }
}

impl Parameters for ConicHead {
    fn params(&self) -> Vec<(ParamKind, &[f64])> {
        vec![
            (ParamKind::ConeSlope, &self.w[..]),
            (ParamKind::ConeGamma, &self.gamma[..]),
            (ParamKind::ConeOffset, &self.b[..]),
        ]
    }

    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        vec![
            (ParamKind::ConeSlope, &mut self.w[..]),
            (ParamKind::ConeGamma, &mut self.gamma[..]),
            (ParamKind::ConeOffset, &mut self.b[..]),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1_head() -> ConicHead {
        ConicHead::from_parts(1, 2, vec![0.0, 0.0], vec![-1.0, -1.0], vec![1.0], vec![0.0, 0.0], false).unwrap()
    }

    #[test]
    fn score_examples() {
        let head = l1_head();
        assert_eq!(head.scores(&[0.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(head.scores(&[1.0, 0.0]).unwrap(), vec![0.0]);
        assert!(head.scores(&[1.0]).is_err());
    }

    #[test]
    fn input_gradient_examples() {
        let head = l1_head();
        assert_eq!(head.input_gradient(&[2.0, -3.0], 0).unwrap(), vec![-1.0, 1.0]);
        let mut skewed = head.clone();
        skewed.slope_mut(0).copy_from_slice(&[0.3, -0.2]);
        assert_eq!(skewed.input_gradient(&[0.0, 0.0], 0).unwrap(), vec![0.3, -0.2]);
        assert!(head.input_gradient(&[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut head = ConicHead::new(3, 4, false, 5).unwrap();
        head.center_mut(1).copy_from_slice(&[0.3, -0.2, 0.5, 1.0]);
        head.gamma_mut(1).copy_from_slice(&[-0.7, -1.4, -0.9, -2.0]);
        let f = [1.2, -0.9, 0.1, 0.4];
        let g = head.input_gradient(&f, 1).unwrap();
        let h = 1e-6;
        for m in 0..4 {
            let mut up = f;
            up[m] += h;
            let mut down = f;
            down[m] -= h;
            let numeric = (head.score(1, &up) - head.score(1, &down)) / (2.0 * h);
            assert!((g[m] - numeric).abs() / g[m].abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn init_centers_uses_class_means() {
        let mut head = ConicHead::new(3, 2, false, 0).unwrap();
        let data: [([f64; 2], usize); 4] = [([1.0, 0.0], 0), ([3.0, 2.0], 0), ([5.0, 5.0], 1), ([9.0, 9.0], 1)];
        head.init_centers(data.iter().map(|(f, y)| (&f[..], *y))).unwrap();
        assert_eq!(head.center(0), &[2.0, 1.0]);
        assert_eq!(head.center(1), &[7.0, 7.0]);
        assert_eq!(head.center(2), &[0.0, 0.0]);

        let mut shared = ConicHead::new(3, 2, true, 0).unwrap();
        shared.init_centers(data.iter().map(|(f, y)| (&f[..], *y))).unwrap();
        for c in 0..3 {
            assert_eq!(shared.center(c), &[4.5, 4.0]);
        }
    }

    #[test]
    fn initial_regions_are_bounded() {
        let head = ConicHead::new(4, 3, false, 1).unwrap();
        for c in 0..4 {
            assert!(head.region(c).is_bounded());
        }
    }

    #[test]
    fn region_round_trip() {
        let head = ConicHead::new(2, 3, false, 8).unwrap();
        let mut other = ConicHead::new(2, 3, false, 9).unwrap();
        for c in 0..2 {
            other.set_region(c, &head.region(c)).unwrap();
        }
        assert_eq!(head, other);
    }

    #[test]
    fn centers_are_not_trainable() {
        let head = ConicHead::new(2, 3, false, 8).unwrap();
        assert_eq!(head.param_count(), 2 * 3 + 2 * 3 + 2);
    }
}
