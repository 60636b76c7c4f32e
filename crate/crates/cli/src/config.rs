//! Experiment configuration: one JSON document per run, with CLI
//! `--key value` overrides merged in before validation. The effective
//! merged document is echoed into the output directory for provenance.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use univperturb_core::{Error, Result};

/// Loads a JSON config, applies dotted-path overrides, and deserializes.
/// Returns the typed config together with the merged document.
pub fn load_config<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<(T, Value)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
    for (key, raw) in parse_overrides(overrides)? {
        apply_override(&mut value, &key, raw)?;
    }
    let typed: T = serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
    Ok((typed, value))
}

/// Pairs up `--key value` tokens.
fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut iter = tokens.iter();
    while let Some(key) = iter.next() {
        let Some(stripped) = key.strip_prefix("--") else {
            return Err(Error::Config(format!(
                "override {key:?} must start with --"
            )));
        };
        let Some(value) = iter.next() else {
            return Err(Error::Config(format!("override --{stripped} is missing a value")));
        };
        out.push((stripped.to_string(), value.clone()));
    }
    Ok(out)
}

/// Sets `key` (dotted path into nested objects) to `raw`, parsed as JSON
/// when possible and kept as a string otherwise.
fn apply_override(doc: &mut Value, key: &str, raw: String) -> Result<()> {
    let parsed: Value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
    let mut cursor = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override --{key}: {part} is not an object field"))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Writes the merged config into the output directory.
pub fn echo_config(out_dir: &Path, merged: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(merged).map_err(Error::from)?;
    std::fs::write(out_dir.join("effective_config.json"), text)?;
    Ok(())
}

fn default_overshoot() -> f64 {
    0.02
}

fn default_attack_max_iter() -> usize {
    50
}

fn default_max_passes() -> usize {
    10
}

fn default_delta() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: String,
    #[serde(default)]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub samples_per_class: Option<usize>,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// csv_file: path to the data file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// idx_file: image and label file paths, optional sample cap.
    #[serde(default)]
    pub images_path: Option<PathBuf>,
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: Option<usize>,
    #[serde(default)]
    pub val: Option<usize>,
    #[serde(default)]
    pub eval: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub kind: String,
    #[serde(default)]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl TrainParams {
    pub fn to_core(&self) -> univperturb_core::models::TrainConfig {
        univperturb_core::models::TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub arch: ArchConfig,
    pub train: TrainParams,
    pub out_dir: PathBuf,
}

/// Universal-perturbation parameters shared by several commands.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalParams {
    pub p: String,
    pub xi: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default)]
    pub shuffle_seed: u64,
    #[serde(default = "default_overshoot")]
    pub overshoot: f64,
    #[serde(default = "default_attack_max_iter")]
    pub attack_max_iter: usize,
}

impl UniversalParams {
    pub fn to_core(&self, model_id: &str) -> Result<univperturb_core::universal::UniversalConfig> {
        Ok(univperturb_core::universal::UniversalConfig {
            p: univperturb_core::numerics::NormOrder::parse(&self.p)?,
            xi: self.xi,
            delta: self.delta,
            max_passes: self.max_passes,
            shuffle_seed: self.shuffle_seed,
            overshoot: self.overshoot,
            attack_max_iter: self.attack_max_iter,
            model_id: model_id.to_string(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalCommandConfig {
    pub model: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub universal: UniversalParams,
    /// Use only the first `x_size` samples of the train split as X.
    #[serde(default)]
    pub x_size: Option<usize>,
    /// Optional [lo, hi] clamp applied to perturbed points at evaluation.
    #[serde(default)]
    pub clamp: Option<(f64, f64)>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeCommandConfig {
    pub which: String,
    /// Model files; single-model analyses use the first entry.
    pub models: Vec<PathBuf>,
    #[serde(default)]
    pub perturbation: Option<PathBuf>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub seed: u64,
    /// sweep: target l2 norms.
    #[serde(default)]
    pub norms: Vec<f64>,
    /// normals/subspace/sqrtd: how many train-split samples to attack.
    #[serde(default)]
    pub n_samples: Option<usize>,
    /// subspace: dimension of the probed subspace and probe norm.
    #[serde(default)]
    pub subspace_k: Option<usize>,
    #[serde(default)]
    pub probe_xi: Option<f64>,
    #[serde(default)]
    pub probe_seeds: Option<usize>,
    /// transfer: universal-perturbation parameters and X size.
    #[serde(default)]
    pub universal: Option<UniversalParams>,
    #[serde(default)]
    pub x_size: Option<usize>,
    #[serde(default = "default_overshoot")]
    pub overshoot: f64,
    #[serde(default = "default_attack_max_iter")]
    pub attack_max_iter: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneCommandConfig {
    pub model: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub universal: UniversalParams,
    pub train: TrainParams,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_finetune_epochs")]
    pub finetune_epochs: usize,
    #[serde(default = "default_mix_prob")]
    pub mix_prob: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: f64,
    #[serde(default)]
    pub x_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    pub out_dir: PathBuf,
}

fn default_pool_size() -> usize {
    10
}

fn default_finetune_epochs() -> usize {
    5
}

fn default_mix_prob() -> f64 {
    0.5
}

fn default_alpha_max() -> f64 {
    univperturb_core::defense::DEFAULT_ALPHA_MAX
}

fn default_rounds() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportCommandConfig {
    pub perturbation: PathBuf,
    pub side: usize,
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_nested_fields() {
        let mut doc: Value = serde_json::from_str(
            r#"{"dataset": {"kind": "gaussian_blobs", "noise": 0.1}, "out_dir": "x"}"#,
        )
        .unwrap();
        apply_override(&mut doc, "dataset.noise", "0.25".into()).unwrap();
        apply_override(&mut doc, "out_dir", "y".into()).unwrap();
        assert_eq!(doc["dataset"]["noise"], Value::from(0.25));
        assert_eq!(doc["out_dir"], Value::from("y"));
    }

    #[test]
    fn override_pairs_must_be_flagged_and_complete() {
        assert!(parse_overrides(&["noise".into(), "0.1".into()]).is_err());
        assert!(parse_overrides(&["--noise".into()]).is_err());
        let pairs = parse_overrides(&["--a".into(), "1".into(), "--b.c".into(), "x".into()])
            .unwrap();
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"perturbation": "p.json", "side": 8, "out": "o.pgm", "bogus": 1}"#)
            .unwrap();
        let res: Result<(ExportCommandConfig, Value)> = load_config(&path, &[]);
        assert!(res.is_err());
    }
}
