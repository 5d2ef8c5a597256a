//! JSON checkpoint format for [`Mlp`]: a header with the architecture and
//! activation names followed by row-major layer values.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, Mlp, OutputActivation};
use crate::{Error, Result};

pub const MLP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub schema_version: u32,
    pub architecture: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
    pub layers: Vec<LayerRecord>,
}

impl From<Mlp> for MlpRecord {
    fn from(m: Mlp) -> Self {
        MlpRecord {
            schema_version: MLP_SCHEMA_VERSION,
            architecture: m.architecture(),
            hidden_activation: m.hidden_activation,
            output_activation: m.output_activation,
            layers: m
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.input_dim(),
                    cols: l.output_dim(),
                    weights: l.weights.iter().copied().collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRecord) -> Result<Self> {
        if r.schema_version != MLP_SCHEMA_VERSION {
            return Err(Error::Shape(format!(
                "unsupported network schema_version {}",
                r.schema_version
            )));
        }
        let layers = r
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.rows, l.cols), l.weights)
                    .map_err(|e| Error::Shape(e.to_string()))?;
                Ok(Dense { weights, biases: Array1::from(l.biases) })
            })
            .collect::<Result<Vec<_>>>()?;
        let mlp = Mlp::from_layers(layers, r.hidden_activation, r.output_activation)?;
        if mlp.architecture() != r.architecture {
            return Err(Error::Shape(format!(
                "header architecture {:?} disagrees with layers {:?}",
                r.architecture,
                mlp.architecture()
            )));
        }
        if !mlp.parameters().iter().all(|v| v.is_finite()) {
            return Err(Error::Shape("non-finite parameter in checkpoint".into()));
        }
        Ok(mlp)
    }
}

pub fn save_mlp(mlp: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string(mlp)?)?;
    Ok(())
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<Mlp> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn file_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(&[3, 5, 2], Activation::Relu, OutputActivation::TanhScaled(1.5), Some(3e-3), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_mlp(&net, &path).unwrap();
        assert_eq!(load_mlp(&path).unwrap(), net);

        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(json["architecture"], serde_json::json!([3, 5, 2]));
        assert_eq!(json["hidden_activation"], "relu");
    }

    #[test]
    fn inconsistent_header_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(&[3, 5, 2], Activation::Tanh, OutputActivation::Linear, None, &mut rng).unwrap();
        let mut rec = MlpRecord::from(net);
        rec.architecture = vec![3, 4, 2];
        assert!(Mlp::try_from(rec).is_err());
    }
}
