use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{ClassifierHead, ParamKind, Parameters};
use crate::error::{check_dim, Error, Result};
use crate::util::{all_finite, rng};

/// Linear soft-max baseline head: logits `W f + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl SoftmaxHead {
    /// Glorot-uniform weights, zero bias.
    pub fn new(classes: usize, dim: usize, seed: u64) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::InvalidArgument("soft-max head needs at least one class and dimension".into()));
        }
        let mut rng = rng(seed);
        let limit = libm::sqrt(6.0 / (classes + dim) as f64);
        let weights = (0..classes * dim).map(|_| limit * (2.0 * rng.random::<f64>() - 1.0)).collect();
        Ok(Self { classes, dim, weights, bias: vec![0.0; classes] })
    }

    pub fn from_parts(classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::InvalidArgument("soft-max head needs at least one class and dimension".into()));
        }
        check_dim(classes * dim, weights.len())?;
        check_dim(classes, bias.len())?;
        if !all_finite(&weights) || !all_finite(&bias) {
            return Err(Error::NonFinite("soft-max parameters"));
        }
        Ok(Self { classes, dim, weights, bias })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, f.len())?;
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(f).fold(b, |acc, (w, v)| acc + w * v))
            .collect())
    }

    /// Class probabilities `softmax(W f + b)`.
    pub fn probabilities(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(f)?))
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Max-subtracted soft-max; stable for large logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl ClassifierHead for SoftmaxHead {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    /// Logits; the arg-max matches that of the probabilities.
    fn scores(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.logits(f)
    }
}

impl Parameters for SoftmaxHead {
    fn params(&self) -> Vec<(ParamKind, &[f64])> {
        vec![(ParamKind::SoftmaxWeight, &self.weights[..]), (ParamKind::SoftmaxBias, &self.bias[..])]
    }

    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        vec![(ParamKind::SoftmaxWeight, &mut self.weights[..]), (ParamKind::SoftmaxBias, &mut self.bias[..])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let head = SoftmaxHead::new(5, 3, 2).unwrap();
        let p = head.probabilities(&[3.0, -7.5, 0.2]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(head.probabilities(&[0.0]).is_err());
    }
}
