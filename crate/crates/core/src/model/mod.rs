//! Trainable pipeline: a rectifier MLP feature extractor followed by either
//! the multi-class conic head or the soft-max baseline head.

use alloc::vec::Vec;

use crate::error::Result;
use crate::util::argmax;

mod conic;
mod net;
mod softmax;

pub use conic::ConicHead;
pub use net::{Dense, FeatureNet, ForwardCache};
pub use softmax::{softmax, SoftmaxHead};

/// Role of a parameter block; decides whether the optimizer decays it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    NetWeight,
    NetBias,
    ConeSlope,
    ConeGamma,
    ConeOffset,
    SoftmaxWeight,
    SoftmaxBias,
}

impl ParamKind {
    /// Weight decay applies to slopes and weight matrices only.
    pub fn decayed(self) -> bool {
        matches!(self, Self::NetWeight | Self::ConeSlope | Self::SoftmaxWeight)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NetWeight => "net.weight",
            Self::NetBias => "net.bias",
            Self::ConeSlope => "cone.w",
            Self::ConeGamma => "cone.gamma",
            Self::ConeOffset => "cone.b",
            Self::SoftmaxWeight => "softmax.weight",
            Self::SoftmaxBias => "softmax.bias",
        }
    }
}

/// Flat view over the trainable parameter blocks of a component.
///
/// Gradients use the same type as the parameters they belong to, so block
/// order and shapes always line up.
pub trait Parameters: Clone {
    fn params(&self) -> Vec<(ParamKind, &[f64])>;
    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])>;

    /// Same shape with every trainable entry set to zero.
    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for (_, block) in z.params_mut() {
            block.fill(0.0);
        }
        z
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }
}

/// A classification head over `d`-dimensional features; larger score wins.
pub trait ClassifierHead {
    fn num_classes(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn scores(&self, f: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, f: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(f)?))
    }
}

/// Feature network plus head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<H> {
    pub net: FeatureNet,
    pub head: H,
}

impl<H: ClassifierHead> Model<H> {
    pub fn new(net: FeatureNet, head: H) -> Result<Self> {
        crate::error::check_dim(head.feature_dim(), net.output_dim())?;
        Ok(Self { net, head })
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.features(x)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.head.scores(&self.net.features(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.head.predict(&self.net.features(x)?)
    }
}
