//! `univperturb finetune`: the pool-of-perturbations robustness loop.

use serde_json::Value;

use univperturb_core::defense::{robustness_iteration, RobustnessConfig};
use univperturb_core::models::save_model;
use univperturb_core::Result;

use crate::commands::{load_model_named, model_id, require_val, resolve_data};
use crate::config::{echo_config, FinetuneCommandConfig};
use crate::report::{num, write_csv};

pub fn run(cfg: FinetuneCommandConfig, merged: Value) -> Result<()> {
    let model = load_model_named(&cfg.model)?;
    let data = resolve_data(&cfg.dataset, &cfg.split)?;
    let valset = require_val(data.val)?;

    let rcfg = RobustnessConfig {
        universal: cfg.universal.to_core(&model_id(&cfg.model))?,
        train: cfg.train.to_core(),
        pool_size: cfg.pool_size,
        finetune_epochs: cfg.finetune_epochs,
        mix_prob: cfg.mix_prob,
        alpha_max: cfg.alpha_max,
        x_size: cfg.x_size,
        seed: cfg.seed,
    };
    let outcome = robustness_iteration(&model, &data.train, &valset, &rcfg, cfg.rounds)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    echo_config(&cfg.out_dir, &merged)?;
    let rows: Vec<Vec<String>> = std::iter::once(&outcome.baseline)
        .chain(&outcome.rounds)
        .map(|r| {
            vec![
                r.round.to_string(),
                num(r.fresh_fooling_rate),
                num(r.clean_accuracy),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_dir.join("rounds.csv"),
        &["round", "fresh_fooling_rate", "clean_accuracy"],
        &rows,
    )?;
    save_model(&outcome.model, cfg.out_dir.join("model_finetuned.json"))?;

    for r in std::iter::once(&outcome.baseline).chain(&outcome.rounds) {
        println!(
            "round {}: fresh fooling rate {}, clean accuracy {}",
            r.round,
            num(r.fresh_fooling_rate),
            num(r.clean_accuracy)
        );
    }
    Ok(())
}
