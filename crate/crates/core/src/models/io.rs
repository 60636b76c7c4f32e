//! Model persistence: UTF-8 JSON with full round-trip float precision.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Activation, Layer, Model};
use crate::numerics::Tensor;

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    input_dim: usize,
    num_classes: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    activation: String,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        input_dim: model.input_dim(),
        num_classes: model.num_classes(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerFile {
                rows: l.weight.rows(),
                cols: l.weight.cols(),
                activation: l.activation.as_str().to_string(),
                weights: l.weight.data().to_vec(),
                bias: l.bias.data().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let text = std::fs::read_to_string(&path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, lf) in file.layers.into_iter().enumerate() {
        if lf.weights.len() != lf.rows * lf.cols {
            return Err(Error::Parse(format!(
                "layer {i}: {} weights but rows*cols = {}",
                lf.weights.len(),
                lf.rows * lf.cols
            )));
        }
        if lf.bias.len() != lf.rows {
            return Err(Error::Parse(format!(
                "layer {i}: {} bias entries but rows = {}",
                lf.bias.len(),
                lf.rows
            )));
        }
        let activation = Activation::parse(&lf.activation)
            .map_err(|e| Error::Parse(format!("layer {i}: {e}")))?;
        let weight = Tensor::matrix(lf.rows, lf.cols, lf.weights)
            .map_err(|e| Error::Parse(format!("layer {i} weights: {e}")))?;
        let bias = Tensor::vector(lf.bias)
            .map_err(|e| Error::Parse(format!("layer {i} bias: {e}")))?;
        layers.push(Layer::new(weight, bias, activation).map_err(|e| {
            Error::Parse(format!("layer {i}: {e}"))
        })?);
    }
    let model = Model::new(layers).map_err(|e| Error::Parse(e.to_string()))?;
    if model.input_dim() != file.input_dim || model.num_classes() != file.num_classes {
        return Err(Error::Parse(format!(
            "declared dims ({}, {}) disagree with layers ({}, {})",
            file.input_dim,
            file.num_classes,
            model.input_dim(),
            model.num_classes()
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn round_trip_preserves_predictions_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut rng = RngStream::new(21);
        let model = Model::mlp(7, &[12, 5], 4, &mut rng);
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for _ in 0..100 {
            let x = Tensor::vector((0..7).map(|_| rng.normal()).collect()).unwrap();
            assert_eq!(
                model.forward(&x).unwrap().data(),
                loaded.forward(&x).unwrap().data()
            );
        }
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut rng = RngStream::new(22);
        save_model(&Model::affine(3, 2, &mut rng), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut rng = RngStream::new(23);
        save_model(&Model::affine(3, 2, &mut rng), &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::UnsupportedVersion { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn inconsistent_layer_shape_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let json = r#"{
            "format_version": 1,
            "input_dim": 2,
            "num_classes": 2,
            "layers": [{"rows": 2, "cols": 2, "activation": "identity",
                        "weights": [1.0, 0.0, 0.0], "bias": [0.0, 0.0]}]
        }"#;
        std::fs::write(&path, json).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }
}
