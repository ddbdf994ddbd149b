//! Flat TOML run configuration. Every key is optional; `key=value` overrides
//! from the command line are applied on top of the file.

use std::path::Path;

use dcepcc_core::evaluation::{HeadKind, ProtocolConfig, ScoreTransform};
use dcepcc_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadChoice {
    Conic,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformChoice {
    Maxabs,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: f64,
    pub eta: f64,
    pub kappa: f64,
    pub margin_delta: f64,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub center_lr: f64,
    pub seed: u64,

    pub head: HeadChoice,
    pub shared_vertex: bool,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub gamma_init: f64,
    pub standardize: bool,

    pub known: usize,
    pub repeats: usize,
    pub train_fraction: f64,
    pub transform: TransformChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let p = ProtocolConfig::default();
        Self {
            lambda: t.lambda,
            eta: t.eta,
            kappa: t.kappa,
            margin_delta: t.margin_delta,
            lr: t.lr,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            center_lr: t.center_lr,
            seed: t.seed,
            head: HeadChoice::Conic,
            shared_vertex: false,
            hidden: p.hidden,
            feature_dim: p.feature_dim,
            gamma_init: p.gamma_init,
            standardize: p.standardize,
            known: p.known,
            repeats: p.repeats,
            train_fraction: p.train_fraction,
            transform: TransformChoice::Maxabs,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` in order and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.feature_dim == 0 || self.hidden.contains(&0) {
            return Err(CliError::Usage("layer widths must be ≥ 1".into()));
        }
        if !(self.gamma_init < 0.0 && self.gamma_init.is_finite()) {
            return Err(CliError::Usage("gamma_init must be finite and negative".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Usage("train_fraction must be in (0, 1)".into()));
        }
        if self.known == 0 || self.repeats == 0 {
            return Err(CliError::Usage("known and repeats must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            eta: self.eta,
            kappa: self.kappa,
            margin_delta: self.margin_delta,
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            center_lr: self.center_lr,
            seed: self.seed,
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            known: self.known,
            repeats: self.repeats,
            train_fraction: self.train_fraction,
            hidden: self.hidden.clone(),
            feature_dim: self.feature_dim,
            transform: match self.transform {
                TransformChoice::Maxabs => ScoreTransform::MaxAbs,
                TransformChoice::Sigmoid => ScoreTransform::Sigmoid,
            },
            gamma_init: self.gamma_init,
            standardize: self.standardize,
            seed: self.seed,
        }
    }

    pub fn head_kind(&self) -> HeadKind {
        match self.head {
            HeadChoice::Conic => HeadKind::Conic { shared_vertex: self.shared_vertex },
            HeadChoice::Softmax => HeadKind::Softmax,
        }
    }

    /// Network widths `input → hidden… → feature_dim`.
    pub fn net_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(self.feature_dim);
        dims
    }
}

/// `key=value` with a TOML value; bare words are taken as strings.
fn parse_override(item: &str) -> CliResult<(String, toml::Value)> {
    let (key, raw) =
        item.split_once('=').ok_or_else(|| CliError::Usage(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Usage(format!("override `{item}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}
