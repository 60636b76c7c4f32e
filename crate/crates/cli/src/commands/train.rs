//! `univperturb train`: generate data, fit a model, save it with metrics.

use serde_json::Value;

use univperturb_core::models::{accuracy, save_model, train, Model};
use univperturb_core::numerics::RngStream;
use univperturb_core::{Error, Result};

use crate::commands::{require_val, resolve_data};
use crate::config::{echo_config, TrainCommandConfig};

pub fn run(cfg: TrainCommandConfig, merged: Value) -> Result<()> {
    let train_cfg = cfg.train.to_core();
    train_cfg.validate()?;

    let data = resolve_data(&cfg.dataset, &cfg.split)?;
    let valset = require_val(data.val)?;

    let classes = data
        .pool
        .labels()
        .iter()
        .max()
        .map(|&m| m + 1)
        .unwrap_or(0);
    let mut init_rng = RngStream::new(train_cfg.seed).child(1);
    let model = match cfg.arch.kind.as_str() {
        "affine" => Model::affine(data.pool.dim(), classes, &mut init_rng),
        "mlp" => {
            if cfg.arch.hidden.is_empty() {
                return Err(Error::Config("mlp architecture needs \"hidden\" widths".into()));
            }
            Model::mlp(data.pool.dim(), &cfg.arch.hidden, classes, &mut init_rng)
        }
        other => return Err(Error::Config(format!("unknown architecture {other:?}"))),
    };

    let report = train(&model, &data.train, &train_cfg)?;
    let val_accuracy = accuracy(&report.model, &valset)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    echo_config(&cfg.out_dir, &merged)?;
    let model_path = cfg.out_dir.join("model.json");
    save_model(&report.model, &model_path)?;

    println!(
        "train accuracy {:.4}, validation accuracy {:.4}; model written to {}",
        report.train_accuracy,
        val_accuracy,
        model_path.display()
    );
    Ok(())
}
