use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{ParamKind, Parameters};
use crate::error::{check_dim, Error, Result};
use crate::util::{all_finite, rng};

/// Affine layer `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        check_dim(inputs * outputs, weights.len())?;
        check_dim(outputs, bias.len())?;
        if !all_finite(&weights) || !all_finite(&bias) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self { inputs, outputs, weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (w, v)| acc + w * v))
            .collect()
    }
}

/// Fully connected feature extractor: rectifier on hidden layers, identity
/// on the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNet {
    layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations recorded by [`FeatureNet::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Pre-activations of each layer, last layer included.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

impl FeatureNet {
    /// Random network with the given widths `input → hidden… → feature`.
    ///
    /// Hidden layers use He-uniform weights, the output layer Glorot-uniform;
    /// biases start at zero.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("a network needs at least input and output widths".into()));
        }
        let mut rng = rng(seed);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = if k == last {
                    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
                } else {
                    libm::sqrt(6.0 / fan_in as f64)
                };
                let weights = (0..fan_in * fan_out).map(|_| limit * (2.0 * rng.random::<f64>() - 1.0)).collect();
                Dense::new(fan_in, fan_out, weights, vec![0.0; fan_out])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].outputs, pair[1].inputs)?;
        }
        Ok(Self { layers })
    }

    /// Single linear layer computing `f = x`.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self::from_layers(vec![Dense::new(dim, dim, weights, vec![0.0; dim])?])
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Widths `input, hidden…, output`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_dim(self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&current);
            let out = if k == last { z.clone() } else { z.iter().map(|&v| v.max(0.0)).collect() };
            inputs.push(core::mem::replace(&mut current, out));
            pre.push(z);
        }
        Ok((current, ForwardCache { inputs, pre }))
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|(f, _)| f)
    }

    /// Back-propagates `∂L/∂f`, accumulating parameter gradients into `grads`
    /// (a network of the same shape) and returning `∂L/∂x`. The rectifier's
    /// derivative at exactly zero is taken as zero.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut FeatureNet) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        let last = self.layers.len() - 1;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if k != last {
                for (d, &z) in delta.iter_mut().zip(&cache.pre[k]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &cache.inputs[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &v) in row.iter_mut().zip(input) {
                    *gw += d * v;
                }
            }
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            delta = next;
        }
        delta
    }
}

impl Parameters for FeatureNet {
    fn params(&self) -> Vec<(ParamKind, &[f64])> {
        self.layers
            .iter()
            .flat_map(|l| [(ParamKind::NetWeight, &l.weights[..]), (ParamKind::NetBias, &l.bias[..])])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        self.layers
            .iter_mut()
            .flat_map(|l| [(ParamKind::NetWeight, &mut l.weights[..]), (ParamKind::NetBias, &mut l.bias[..])])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = FeatureNet::identity(3).unwrap();
        assert_eq!(net.features(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn hidden_rectifier_clips_negative_preactivation() {
        let hidden = Dense::new(1, 1, vec![-1.0], vec![0.0]).unwrap();
        let out = Dense::new(1, 1, vec![1.0], vec![0.0]).unwrap();
        let net = FeatureNet::from_layers(vec![hidden, out]).unwrap();
        let (f, cache) = net.forward(&[1.0]).unwrap();
        assert_eq!(cache.pre_activations()[0], vec![-1.0]);
        assert_eq!(f, vec![0.0]);
    }

    #[test]
    fn shapes_are_checked() {
        let a = Dense::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let b = Dense::new(4, 1, vec![0.0; 4], vec![0.0]).unwrap();
        assert!(FeatureNet::from_layers(vec![a, b]).is_err());
        assert!(Dense::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        let net = FeatureNet::new(&[3, 4, 2], 1).unwrap();
        assert_eq!(net.dims(), vec![3, 4, 2]);
        assert!(net.forward(&[0.0; 2]).is_err());
        assert!(FeatureNet::new(&[3], 1).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        assert_eq!(FeatureNet::new(&[4, 8, 2], 9).unwrap(), FeatureNet::new(&[4, 8, 2], 9).unwrap());
        assert_ne!(FeatureNet::new(&[4, 8, 2], 9).unwrap(), FeatureNet::new(&[4, 8, 2], 10).unwrap());
    }

    /// Central differences of `Σ_k c_k f_k(x)` against the analytic backward pass.
    #[test]
    fn backward_matches_finite_differences() {
        let net = FeatureNet::new(&[3, 6, 5, 2], 3).unwrap();
        let x = [0.7, -0.4, 1.1];
        let coef = [0.8, -1.3];
        let objective =
            |n: &FeatureNet, x: &[f64]| -> f64 { n.features(x).unwrap().iter().zip(&coef).map(|(f, c)| f * c).sum() };
        let (_, cache) = net.forward(&x).unwrap();
        for z in cache.pre_activations().iter().flatten() {
            assert!(z.abs() > 1e-3, "test point too close to a rectifier kink");
        }
        let mut grads = net.zeroed();
        let gx = net.backward(&cache, &coef, &mut grads);

        let h = 1e-6;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        let analytic: Vec<f64> = grads.params().into_iter().flat_map(|(_, p)| p.to_vec()).collect();
        let mut idx = 0;
        let mut probe = net.clone();
        let blocks = probe.params().len();
        for block in 0..blocks {
            let len = probe.params()[block].1.len();
            for j in 0..len {
                let orig = probe.params()[block].1[j];
                probe.params_mut()[block].1[j] = orig + h;
                let up = objective(&probe, &x);
                probe.params_mut()[block].1[j] = orig - h;
                let down = objective(&probe, &x);
                probe.params_mut()[block].1[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[idx];
                if a != 0.0 || numeric.abs() > 1e-9 {
                    assert!(rel(a, numeric) < 1e-5, "param {idx}: {a} vs {numeric}");
                }
                idx += 1;
            }
        }
        for i in 0..3 {
            let mut up = x;
            up[i] += h;
            let mut down = x;
            down[i] -= h;
            let numeric = (objective(&net, &up) - objective(&net, &down)) / (2.0 * h);
            assert!(rel(gx[i], numeric) < 1e-5);
        }
    }

    #[test]
    fn nonnegative_weights_give_monotone_outputs() {
        let mut net = FeatureNet::new(&[2, 5, 3], 4).unwrap();
        for (_, block) in net.params_mut() {
            for v in block.iter_mut() {
                *v = v.abs();
            }
        }
        let base = net.features(&[0.5, 0.5]).unwrap();
        let bumped = net.features(&[0.9, 0.5]).unwrap();
        for (a, b) in base.iter().zip(&bumped) {
            assert!(b >= a);
        }
    }
}
