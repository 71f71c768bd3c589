use super::config::SplineNetConfig;
use super::network::SplineNet;
use super::params::{ModelParams, Tensor};
use super::train::History;
use crate::error::{Error, Result};
use crate::layers::AreaNormState;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "splinenet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named-tensor archive with the config, seed and running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    pub seed: u64,
    pub config: SplineNetConfig,
    pub parameter_count: usize,
    pub tensors: Vec<Tensor>,
    pub area_norm: Vec<AreaNormState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<History>,
    /// Free-form run manifest supplied by the caller.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub manifest: serde_json::Value,
}

impl Checkpoint {
    pub fn from_model(model: &SplineNet) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed: model.config().seed,
            config: model.config().clone(),
            parameter_count: model.params().count(),
            tensors: model.params().tensors().to_vec(),
            area_norm: model.norm_states().to_vec(),
            history: None,
            manifest: serde_json::Value::Null,
        }
    }

    pub fn into_model(self) -> Result<SplineNet> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut params = ModelParams::new();
        for t in self.tensors {
            params.register(t)?;
        }
        SplineNet::from_parts(self.config, params, self.area_norm)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let mut net = SplineNet::new(SplineNetConfig {
            input_channels: 2,
            seed: 9,
            ..SplineNetConfig::default()
        })
        .unwrap();
        net.params_mut().get_mut("head.bias").unwrap().data[1] = 0.1 + 0.2;
        let ck = Checkpoint::from_model(&net);
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), text);
        let model = back.into_model().unwrap();
        assert_eq!(model.params(), net.params());
    }

    #[test]
    fn rejects_mismatched_layout() {
        let net = SplineNet::new(SplineNetConfig::default()).unwrap();
        let mut ck = Checkpoint::from_model(&net);
        ck.config.hidden += 1;
        assert!(ck.into_model().is_err());
    }
}
