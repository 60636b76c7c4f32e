//! Command implementations behind the `univperturb` subcommands.

pub mod analyze;
pub mod export;
pub mod finetune;
pub mod train;
pub mod universal;

use std::path::Path;

use univperturb_core::models::{load_model, Model, SampleSet};
use univperturb_core::{Error, Result};

use crate::config::{DatasetConfig, SplitConfig};
use crate::dataset;

/// Loads a model file, naming the file on failure.
pub fn load_model_named(path: &Path) -> Result<Model> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "missing model file {}",
            path.display()
        )));
    }
    load_model(path)
}

/// Identifier for a model file: its file stem.
pub fn model_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

/// The generated pool with its resolved split subsets.
pub struct ResolvedData {
    pub pool: SampleSet,
    pub train: SampleSet,
    pub val: Option<SampleSet>,
    pub eval: Option<SampleSet>,
}

pub fn resolve_data(dataset_cfg: &DatasetConfig, split_cfg: &SplitConfig) -> Result<ResolvedData> {
    let pool = dataset::generate(dataset_cfg)?;
    let splits = dataset::resolve_splits(pool.len(), split_cfg)?;
    let train = pool.subset(&splits.train, "train")?;
    let val = if splits.val.is_empty() {
        None
    } else {
        Some(pool.subset(&splits.val, "val")?)
    };
    let eval = if splits.eval.is_empty() {
        None
    } else {
        Some(pool.subset(&splits.eval, "eval")?)
    };
    Ok(ResolvedData {
        pool,
        train,
        val,
        eval,
    })
}

/// First `x_size` samples of the train split, or all of it.
pub fn x_subset(train: &SampleSet, x_size: Option<usize>) -> Result<SampleSet> {
    match x_size {
        Some(n) => {
            if n == 0 || n > train.len() {
                return Err(Error::Config(format!(
                    "x_size {n} outside the train split of {} samples",
                    train.len()
                )));
            }
            let idx: Vec<usize> = (0..n).collect();
            train.subset(&idx, "x")
        }
        None => Ok(train.clone()),
    }
}

pub fn require_val(val: Option<SampleSet>) -> Result<SampleSet> {
    val.ok_or_else(|| Error::Config("this command needs a nonempty validation split".into()))
}
