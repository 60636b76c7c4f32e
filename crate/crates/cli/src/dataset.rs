//! Dataset generation, file loaders, and seeded split discipline.
//!
//! One pool is generated (or loaded) per run; the train / validation /
//! eval splits are disjoint ranges of a seeded permutation of its indices,
//! so every command resolving the same dataset and split config sees the
//! same partition.

use std::io::Read;
use std::path::Path;

use univperturb_core::models::SampleSet;
use univperturb_core::numerics::{RngStream, Tensor};
use univperturb_core::{Error, Result};

use crate::config::{DatasetConfig, SplitConfig};

pub fn generate(cfg: &DatasetConfig) -> Result<SampleSet> {
    match cfg.kind.as_str() {
        "gaussian_blobs" => {
            let classes = require(cfg.num_classes, "num_classes")?;
            let dim = require(cfg.dim, "dim")?;
            let per_class = require(cfg.samples_per_class, "samples_per_class")?;
            let noise = require(cfg.noise, "noise")?;
            gaussian_blobs(classes, dim, per_class, noise, cfg.seed.unwrap_or(0))
        }
        "two_moons" => {
            let per_class = require(cfg.samples_per_class, "samples_per_class")?;
            let noise = require(cfg.noise, "noise")?;
            two_moons(per_class, noise, cfg.seed.unwrap_or(0))
        }
        "csv_file" => {
            let path = cfg
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("csv_file dataset needs \"path\"".into()))?;
            load_csv(path)
        }
        "idx_file" => {
            let images = cfg.images_path.as_ref().ok_or_else(|| {
                Error::Config("idx_file dataset needs \"images_path\"".into())
            })?;
            let labels = cfg.labels_path.as_ref().ok_or_else(|| {
                Error::Config("idx_file dataset needs \"labels_path\"".into())
            })?;
            load_idx(images, labels, cfg.limit)
        }
        other => Err(Error::Config(format!("unknown dataset kind {other:?}"))),
    }
}

fn require<T: Copy>(field: Option<T>, name: &str) -> Result<T> {
    field.ok_or_else(|| Error::Config(format!("dataset config is missing \"{name}\"")))
}

/// Gaussian blobs: one uniformly random unit-norm center per class,
/// isotropic Gaussian noise around it.
pub fn gaussian_blobs(
    classes: usize,
    dim: usize,
    per_class: usize,
    noise: f64,
    seed: u64,
) -> Result<SampleSet> {
    if classes < 2 || per_class < 1 || dim < 1 {
        return Err(Error::Config(
            "gaussian_blobs needs >= 2 classes, >= 1 dim, >= 1 sample per class".into(),
        ));
    }
    let mut rng = RngStream::new(seed);
    let mut centers = Vec::with_capacity(classes);
    for _ in 0..classes {
        let dir: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        centers.push(dir.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let mut inputs = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let x: Vec<f64> = center.iter().map(|c| c + noise * rng.normal()).collect();
            inputs.push(Tensor::vector(x)?);
            labels.push(class);
        }
    }
    SampleSet::new(inputs, labels, "gaussian_blobs")
}

/// The classic interleaved half-circles in the plane.
pub fn two_moons(per_class: usize, noise: f64, seed: u64) -> Result<SampleSet> {
    if per_class < 1 {
        return Err(Error::Config("two_moons needs >= 1 sample per class".into()));
    }
    let mut rng = RngStream::new(seed);
    let mut inputs = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for i in 0..per_class {
        let t = std::f64::consts::PI * i as f64 / (per_class.max(2) - 1) as f64;
        inputs.push(Tensor::vector(vec![
            t.cos() + noise * rng.normal(),
            t.sin() + noise * rng.normal(),
        ])?);
        labels.push(0);
        inputs.push(Tensor::vector(vec![
            1.0 - t.cos() + noise * rng.normal(),
            0.5 - t.sin() + noise * rng.normal(),
        ])?);
        labels.push(1);
    }
    SampleSet::new(inputs, labels, "two_moons")
}

/// CSV rows of `d` features followed by an integer class label.
pub fn load_csv(path: &Path) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read dataset {}: {e}", path.display())))?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse(format!(
                "{}: line {}: need at least one feature and a label",
                path.display(),
                line_no + 1
            )));
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for (col, field) in fields[..fields.len() - 1].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: field {}: invalid number {:?}",
                    path.display(),
                    line_no + 1,
                    col + 1,
                    field
                ))
            })?;
            row.push(v);
        }
        let label: usize = fields[fields.len() - 1].trim().parse().map_err(|_| {
            Error::Parse(format!(
                "{}: line {}: invalid label {:?}",
                path.display(),
                line_no + 1,
                fields[fields.len() - 1]
            ))
        })?;
        inputs.push(Tensor::vector(row)?);
        labels.push(label);
    }
    SampleSet::new(inputs, labels, "csv_file")
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Standard IDX layout: unsigned-byte image tensors and 1-byte labels,
/// pixel values mapped to [0, 1].
pub fn load_idx(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<SampleSet> {
    let images = read_all(images_path)?;
    let labels = read_all(labels_path)?;

    let (magic, rest) = split_u32(&images, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse(format!(
            "{}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x} (u8 images, 3 dims)",
            images_path.display()
        )));
    }
    let (count, rest) = split_u32(rest, images_path)?;
    let (rows, rest) = split_u32(rest, images_path)?;
    let (cols, pixels) = split_u32(rest, images_path)?;
    let (count, rows, cols) = (count as usize, rows as usize, cols as usize);
    let dim = rows * cols;
    if pixels.len() != count * dim {
        return Err(Error::Parse(format!(
            "{}: {} pixel bytes for {count} images of {rows}x{cols}",
            images_path.display(),
            pixels.len()
        )));
    }

    let (magic, rest) = split_u32(&labels, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse(format!(
            "{}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x} (u8 labels)",
            labels_path.display()
        )));
    }
    let (label_count, label_bytes) = split_u32(rest, labels_path)?;
    if label_count as usize != count {
        return Err(Error::Parse(format!(
            "{count} images but {label_count} labels"
        )));
    }
    if label_bytes.len() != count {
        return Err(Error::Parse(format!(
            "{}: {} label bytes for {count} entries",
            labels_path.display(),
            label_bytes.len()
        )));
    }

    let take = limit.unwrap_or(count).min(count);
    let mut inputs = Vec::with_capacity(take);
    let mut label_vec = Vec::with_capacity(take);
    for i in 0..take {
        let data: Vec<f64> = pixels[i * dim..(i + 1) * dim]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        inputs.push(Tensor::vector(data)?);
        label_vec.push(label_bytes[i] as usize);
    }
    SampleSet::new(inputs, label_vec, "idx_file")
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot read dataset {}: {e}", path.display())))?
        .read_to_end(&mut buf)?;
    Ok(buf)
}

fn split_u32<'a>(bytes: &'a [u8], path: &Path) -> Result<(u32, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(Error::Parse(format!("{}: truncated header", path.display())));
    }
    let v = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    Ok((v, &bytes[4..]))
}

/// Disjoint train / validation / eval index partitions of a pool of `n`
/// samples, from one seeded permutation.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub eval: Vec<usize>,
}

pub fn resolve_splits(n: usize, cfg: &SplitConfig) -> Result<Splits> {
    let train = cfg.train.unwrap_or((n as f64 * 0.7).round() as usize);
    let val = cfg.val.unwrap_or((n as f64 * 0.2).round() as usize);
    let eval = cfg.eval.unwrap_or(n.saturating_sub(train + val));
    if train + val + eval > n {
        return Err(Error::Config(format!(
            "splits {train}+{val}+{eval} exceed the pool of {n} samples"
        )));
    }
    if train == 0 {
        return Err(Error::Config("train split must be nonempty".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(cfg.seed).shuffle(&mut order);
    Ok(Splits {
        train: order[..train].to_vec(),
        val: order[train..train + val].to_vec(),
        eval: order[train + val..train + val + eval].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic_and_labeled() {
        let a = gaussian_blobs(3, 8, 5, 0.1, 42).unwrap();
        let b = gaussian_blobs(3, 8, 5, 0.1, 42).unwrap();
        assert_eq!(a.len(), 15);
        for i in 0..a.len() {
            assert_eq!(a.input(i).data(), b.input(i).data());
            assert_eq!(a.label(i), b.label(i));
        }
        assert_eq!(a.labels().iter().filter(|&&l| l == 2).count(), 5);
    }

    #[test]
    fn moons_have_two_interleaved_classes() {
        let m = two_moons(50, 0.05, 7).unwrap();
        assert_eq!(m.len(), 100);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.labels().iter().filter(|&&l| l == 0).count(), 50);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "1.0,2.0,0\n3.5,-1.25,1\n").unwrap();
        let set = load_csv(&path).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.input(1).data(), &[3.5, -1.25]);
        assert_eq!(set.label(1), 1);

        std::fs::write(&path, "1.0,abc,0\n").unwrap();
        let err = load_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("field 2"), "{err}");
    }

    #[test]
    fn idx_loader_reads_standard_layout() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("imgs.idx");
        let labels = dir.path().join("lbls.idx");

        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes()); // 2 images
        img.extend_from_slice(&2u32.to_be_bytes()); // 2x2
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&[0, 255, 128, 64, 10, 20, 30, 40]);
        std::fs::write(&images, img).unwrap();

        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&2u32.to_be_bytes());
        lbl.extend_from_slice(&[3, 7]);
        std::fs::write(&labels, lbl).unwrap();

        let set = load_idx(&images, &labels, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 4);
        assert_eq!(set.input(0).data()[1], 1.0);
        assert_eq!(set.label(1), 7);

        let limited = load_idx(&images, &labels, Some(1)).unwrap();
        assert_eq!(limited.len(), 1);
    }

    #[test]
    fn idx_loader_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("imgs.idx");
        let labels = dir.path().join("lbls.idx");
        std::fs::write(&images, 99u32.to_be_bytes()).unwrap();
        std::fs::write(&labels, IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        assert!(matches!(
            load_idx(&images, &labels, None),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn splits_are_disjoint_and_seeded() {
        let cfg = SplitConfig {
            seed: 11,
            train: Some(6),
            val: Some(3),
            eval: Some(1),
        };
        let s = resolve_splits(10, &cfg).unwrap();
        assert_eq!(s.train.len(), 6);
        assert_eq!(s.val.len(), 3);
        assert_eq!(s.eval.len(), 1);
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.eval)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 10);

        let again = resolve_splits(10, &cfg).unwrap();
        assert_eq!(s.train, again.train);

        let over = SplitConfig {
            seed: 0,
            train: Some(8),
            val: Some(8),
            eval: Some(0),
        };
        assert!(resolve_splits(10, &over).is_err());
    }
}
