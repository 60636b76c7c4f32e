//! Plot-ready artifact writers: CSV with header rows and binary PGM.

use std::io::Write;
use std::path::Path;

use univperturb_core::{Error, Result};

/// Writes a CSV file: one header line, `\n` terminators throughout.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes a binary PGM (P5, maxval 255). Values are affinely mapped so the
/// minimum lands on 0 and the maximum on 255, rounding half up.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Config(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::Domain(
            "zero dynamic range: all values equal, nothing to scale".into(),
        ));
    }
    let scale = 255.0 / (max - min);
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| ((v - min) * scale + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    let mut file = std::fs::File::create(path)?;
    write!(file, "P5\n{width} {height}\n255\n")?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Display formatting for floats in CSV cells: shortest round-trip form.
pub fn num(v: f64) -> String {
    format!("{v}")
}
