//! `univperturb export`: render a perturbation as a grayscale PGM image.

use serde_json::Value;

use univperturb_core::universal::load_perturbation;
use univperturb_core::{Error, Result};

use crate::config::ExportCommandConfig;
use crate::report::write_pgm;

pub fn run(cfg: ExportCommandConfig, merged: Value) -> Result<()> {
    if !cfg.perturbation.exists() {
        return Err(Error::Config(format!(
            "missing perturbation file {}",
            cfg.perturbation.display()
        )));
    }
    let p = load_perturbation(&cfg.perturbation)?;
    let dim = p.v.len();
    if cfg.side * cfg.side != dim {
        return Err(Error::Config(format!(
            "perturbation has dimension {dim}, which is not side^2 = {}",
            cfg.side * cfg.side
        )));
    }
    if let Some(parent) = cfg.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
            std::fs::write(
                parent.join("export_config.json"),
                serde_json::to_string_pretty(&merged)?,
            )?;
        }
    }
    write_pgm(&cfg.out, cfg.side, cfg.side, p.v.data())?;
    println!("wrote {}x{} PGM to {}", cfg.side, cfg.side, cfg.out.display());
    Ok(())
}
