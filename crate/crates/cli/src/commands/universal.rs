//! `univperturb universal`: run the aggregate-and-project construction and
//! persist the perturbation with its evaluation.

use serde_json::Value;

use univperturb_core::universal::{compute_universal, fooling_rate_clamped, save_perturbation};
use univperturb_core::Result;

use crate::commands::{load_model_named, model_id, require_val, resolve_data, x_subset};
use crate::config::{echo_config, UniversalCommandConfig};
use crate::report::{num, write_csv};

pub fn run(cfg: UniversalCommandConfig, merged: Value) -> Result<()> {
    let model = load_model_named(&cfg.model)?;
    let data = resolve_data(&cfg.dataset, &cfg.split)?;
    let valset = require_val(data.val)?;
    let x_set = x_subset(&data.train, cfg.x_size)?;

    let ucfg = cfg.universal.to_core(&model_id(&cfg.model))?;
    let outcome = compute_universal(&model, &x_set, &ucfg)?;
    let v = &outcome.perturbation.v;

    let x_report = fooling_rate_clamped(&model, &x_set, v, cfg.clamp)?;
    let val_report = fooling_rate_clamped(&model, &valset, v, cfg.clamp)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    echo_config(&cfg.out_dir, &merged)?;
    save_perturbation(&outcome.perturbation, cfg.out_dir.join("perturbation.json"))?;

    let rows: Vec<Vec<String>> = val_report
        .label_pairs
        .iter()
        .zip(&val_report.flipped)
        .enumerate()
        .map(|(i, (&(clean, perturbed), &flip))| {
            vec![
                i.to_string(),
                clean.to_string(),
                perturbed.to_string(),
                (flip as u8).to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_dir.join("label_pairs.csv"),
        &["sample", "clean_label", "perturbed_label", "flipped"],
        &rows,
    )?;

    println!(
        "Err(X) = {}, Err(val) = {}, passes = {}, converged = {}",
        num(x_report.rate),
        num(val_report.rate),
        outcome.perturbation.passes,
        outcome.perturbation.converged
    );
    Ok(())
}
