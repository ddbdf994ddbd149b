//! JSON checkpoints. Floats are written in shortest round-trip form, so
//! save → load → save reproduces the file byte for byte.

use std::path::Path;

use dcepcc_core::data::Standardizer;
use dcepcc_core::evaluation::ScoreScaler;
use dcepcc_core::model::{ConicHead, Dense, FeatureNet, Model, SoftmaxHead};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetRecord {
    pub dims: Vec<usize>,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HeadRecord {
    Conic {
        classes: usize,
        dim: usize,
        shared_vertex: bool,
        w: Vec<f64>,
        gamma: Vec<f64>,
        b: Vec<f64>,
        centers: Vec<f64>,
    },
    Softmax {
        classes: usize,
        dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardizerRecord {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub dataset: String,
    pub class_names: Option<Vec<String>>,
    pub seed: u64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub net: NetRecord,
    pub head: HeadRecord,
    /// Per-class score maxima for open-set scoring (conic head only).
    pub scaler: Option<Vec<f64>>,
    pub standardizer: Option<StandardizerRecord>,
    pub config: RunConfig,
    pub provenance: Provenance,
}

/// A restored model of either head type.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Conic(Model<ConicHead>),
    Softmax(Model<SoftmaxHead>),
}

impl AnyModel {
    pub fn net(&self) -> &FeatureNet {
        match self {
            AnyModel::Conic(m) => &m.net,
            AnyModel::Softmax(m) => &m.net,
        }
    }

    pub fn scores(&self, x: &[f64]) -> dcepcc_core::Result<Vec<f64>> {
        match self {
            AnyModel::Conic(m) => m.scores(x),
            AnyModel::Softmax(m) => m.scores(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> dcepcc_core::Result<usize> {
        match self {
            AnyModel::Conic(m) => m.predict(x),
            AnyModel::Softmax(m) => m.predict(x),
        }
    }

    pub fn num_classes(&self) -> usize {
        use dcepcc_core::model::ClassifierHead;
        match self {
            AnyModel::Conic(m) => m.head.num_classes(),
            AnyModel::Softmax(m) => m.head.num_classes(),
        }
    }
}

pub fn net_record(net: &FeatureNet) -> NetRecord {
    NetRecord {
        dims: net.dims(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                inputs: l.inputs(),
                outputs: l.outputs(),
                weights: l.weights().to_vec(),
                bias: l.bias().to_vec(),
            })
            .collect(),
    }
}

pub fn conic_record(head: &ConicHead) -> HeadRecord {
    use dcepcc_core::model::ClassifierHead;
    let (classes, dim) = (head.num_classes(), head.feature_dim());
    let gather = |f: &dyn Fn(usize) -> Vec<f64>| (0..classes).flat_map(f).collect::<Vec<f64>>();
    HeadRecord::Conic {
        classes,
        dim,
        shared_vertex: head.shared_vertex(),
        w: gather(&|c| head.slope(c).to_vec()),
        gamma: gather(&|c| head.gamma(c).to_vec()),
        b: (0..classes).map(|c| head.offset(c)).collect(),
        centers: gather(&|c| head.center(c).to_vec()),
    }
}

pub fn softmax_record(head: &SoftmaxHead) -> HeadRecord {
    use dcepcc_core::model::ClassifierHead;
    HeadRecord::Softmax {
        classes: head.num_classes(),
        dim: head.feature_dim(),
        weights: head.weights().to_vec(),
        bias: head.bias().to_vec(),
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("checkpoint values are finite");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let version: Version = serde_json::from_str(text)
            .map_err(|e| CliError::Data(format!("checkpoint has no readable format_version: {e}")))?;
        if version.format_version != FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "checkpoint format_version {} is not supported (expected {FORMAT_VERSION})",
                version.format_version
            )));
        }
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("malformed checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Rebuilds the network and head, validating every shape.
    pub fn model(&self) -> CliResult<AnyModel> {
        let layers = self
            .net
            .layers
            .iter()
            .map(|l| Dense::new(l.inputs, l.outputs, l.weights.clone(), l.bias.clone()))
            .collect::<dcepcc_core::Result<Vec<_>>>()?;
        let net = FeatureNet::from_layers(layers)?;
        if net.dims() != self.net.dims {
            return Err(CliError::Data("checkpoint dims disagree with its layers".into()));
        }
        Ok(match &self.head {
            HeadRecord::Conic { classes, dim, shared_vertex, w, gamma, b, centers } => {
                let head = ConicHead::from_parts(
                    *classes,
                    *dim,
                    w.clone(),
                    gamma.clone(),
                    b.clone(),
                    centers.clone(),
                    *shared_vertex,
                )?;
                AnyModel::Conic(Model::new(net, head)?)
            }
            HeadRecord::Softmax { classes, dim, weights, bias } => {
                let head = SoftmaxHead::from_parts(*classes, *dim, weights.clone(), bias.clone())?;
                AnyModel::Softmax(Model::new(net, head)?)
            }
        })
    }

    pub fn scaler(&self) -> CliResult<Option<ScoreScaler>> {
        Ok(match &self.scaler {
            Some(maxima) => Some(ScoreScaler::from_maxima(maxima.clone())?),
            None => None,
        })
    }

    pub fn standardizer(&self) -> Option<Standardizer> {
        self.standardizer.as_ref().map(|s| Standardizer { mean: s.mean.clone(), std: s.std.clone() })
    }
}
