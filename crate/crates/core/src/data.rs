//! Datasets and minibatch plans.
//!
//! Supported sources:
//! - Iris-style CSV (four numeric columns and a class label),
//! - IDX image/label files as used by the MNIST family,
//! - a seeded generator of low-rank synthetic images for autoencoding.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// One row per sample.
    pub features: DenseMatrix,
    /// One row per sample; one-hot for classification.
    pub targets: DenseMatrix,
    /// Class names in one-hot column order, when the targets are classes.
    pub classes: Vec<String>,
    /// Raw labels, when loaded from an IDX label file.
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: DenseMatrix, targets: DenseMatrix) -> Result<Self> {
        if features.rows() != targets.rows() {
            return Err(Error::Dimension(format!(
                "{} feature rows vs {} target rows",
                features.rows(),
                targets.rows()
            )));
        }
        if features.as_slice().iter().chain(targets.as_slice()).any(|v| v.is_nan()) {
            return Err(Error::Poisoned("dataset contains NaN".into()));
        }
        Ok(Self {
            name: name.into(),
            features,
            targets,
            classes: Vec::new(),
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }

    /// Copies the given samples into a new dataset, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let (x, y) = self.gather(indices);
        Dataset {
            name: self.name.clone(),
            features: x,
            targets: y,
            classes: self.classes.clone(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Feature and target rows for a batch.
    pub fn gather(&self, indices: &[usize]) -> (DenseMatrix, DenseMatrix) {
        (
            gather_rows(&self.features, indices),
            gather_rows(&self.targets, indices),
        )
    }

    /// Shuffles with `seed` and splits into `(train, rest)` with `n_train`
    /// samples in the first part.
    pub fn shuffled_split(&self, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if n_train > self.len() {
            return Err(Error::Precondition(format!(
                "cannot take {n_train} training samples from {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok((self.subset(&order[..n_train]), self.subset(&order[n_train..])))
    }
}

fn gather_rows(m: &DenseMatrix, indices: &[usize]) -> DenseMatrix {
    let mut out = Vec::with_capacity(indices.len() * m.cols());
    for &i in indices {
        out.extend_from_slice(m.row(i));
    }
    DenseMatrix::from_row_major(indices.len(), m.cols(), out).expect("gathered shape")
}

/// Loads an Iris-format CSV: four numeric features and a class label per
/// line. A non-numeric first row is treated as a header. Classes are one-hot
/// encoded in order of first appearance and features are standardized per
/// column (population variance).
pub fn load_iris_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_iris_csv(&text)
}

pub fn parse_iris_csv(text: &str) -> Result<Dataset> {
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut classes: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let numeric: Vec<Option<f64>> = fields.iter().take(4).map(|f| f.parse().ok()).collect();
        if rows.is_empty() && labels.is_empty() && numeric.iter().all(Option::is_none) {
            // header
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let mut feats = [0.0; 4];
        for (k, value) in numeric.iter().enumerate() {
            feats[k] = value.filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("field {} (`{}`) is not a finite number", k + 1, fields[k]),
            })?;
        }
        let label = fields[4];
        if label.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "missing class label".into(),
            });
        }
        let class = match classes.iter().position(|c| c == label) {
            Some(c) => c,
            None if classes.len() < 3 => {
                classes.push(label.to_string());
                classes.len() - 1
            }
            None => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown class label `{label}` (already saw {})", classes.join(", ")),
                })
            }
        };
        rows.push(feats);
        labels.push(class);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }

    let n = rows.len();
    let mut features = DenseMatrix::from_row_major(n, 4, rows.concat()).expect("4 columns");
    standardize_columns(&mut features);
    let mut targets = DenseMatrix::zeros(n, 3);
    for (s, &c) in labels.iter().enumerate() {
        targets[(s, c)] = 1.0;
    }
    let mut ds = Dataset::new("iris", features, targets)?;
    ds.classes = classes;
    Ok(ds)
}

/// Zero mean and unit population variance per column. Constant columns are
/// only centred.
pub fn standardize_columns(m: &mut DenseMatrix) {
    let n = m.rows() as f64;
    for j in 0..m.cols() {
        let mean = (0..m.rows()).map(|i| m[(i, j)]).sum::<f64>() / n;
        let var = (0..m.rows()).map(|i| (m[(i, j)] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for i in 0..m.rows() {
            let centred = m[(i, j)] - mean;
            m[(i, j)] = if sd > 0.0 { centred / sd } else { centred };
        }
    }
}

/// Raw contents of an IDX3 image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated header reading {what}")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "image file magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_be_u32(bytes, 4, "image count")? as usize;
    let rows = read_be_u32(bytes, 8, "row count")? as usize;
    let cols = read_be_u32(bytes, 12, "column count")? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != need {
        return Err(Error::Format(format!(
            "expected {need} pixel bytes, found {}",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "label file magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Format(format!(
            "expected {count} label bytes, found {}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IDX_IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads IDX images (and optionally labels) as an autoencoding dataset:
/// pixels scaled to `[0, 1]`, targets equal to features.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: Option<&Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let images = parse_idx_images(&bytes)?;
    let labels = match labels_path {
        Some(p) => {
            let lb = parse_idx_labels(&fs::read(p).map_err(|e| Error::io(p, e))?)?;
            if lb.len() != images.count {
                return Err(Error::Format(format!(
                    "{} images but {} labels",
                    images.count,
                    lb.len()
                )));
            }
            Some(lb)
        }
        None => None,
    };
    let mut ds = idx_to_dataset(&images)?;
    ds.labels = labels;
    Ok(ds)
}

pub fn idx_to_dataset(images: &IdxImages) -> Result<Dataset> {
    let dim = images.rows * images.cols;
    let pixels: Vec<f64> = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let features = DenseMatrix::from_row_major(images.count, dim, pixels)?;
    Dataset::new("idx", features.clone(), features)
}

/// Seeded low-rank images for autoencoding. Each `side × side` image is
/// `w·a bᵀ + (1−w)·c dᵀ` with smooth profiles `a, b, c, d ∈ [0, 1]`, so every
/// image has rank at most two and all pixels already lie in `[0, 1]`.
pub fn synth_autoencoder(n_samples: usize, side: usize, seed: u64) -> Result<Dataset> {
    if side < 2 {
        return Err(Error::Precondition(format!("image side must be >= 2, got {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = side * side;
    let mut data = Vec::with_capacity(n_samples * dim);
    let profile = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let freq = rng.gen_range(0.5..2.5);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        (0..side)
            .map(|i| 0.5 + 0.5 * (freq * std::f64::consts::PI * i as f64 / side as f64 + phase).sin())
            .collect()
    };
    for _ in 0..n_samples {
        let (a, b, c, d) = (
            profile(&mut rng),
            profile(&mut rng),
            profile(&mut rng),
            profile(&mut rng),
        );
        let w: f64 = rng.gen_range(0.2..0.8);
        for i in 0..side {
            for j in 0..side {
                let v = w * a[i] * b[j] + (1.0 - w) * c[i] * d[j];
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    let features = DenseMatrix::from_row_major(n_samples, dim, data)?;
    Dataset::new("synthetic-autoencoder", features.clone(), features)
}

/// How one epoch is cut into equally sized batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    /// Residual components per batch, `samples_per_batch × output_dim`.
    pub residual_len: usize,
    /// Samples left out because they did not fill a batch.
    pub dropped: Vec<usize>,
}

impl BatchPlan {
    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }
}

/// Shuffles the sample indices with `epoch_seed` and slices them into
/// contiguous batches; a trailing remainder is dropped.
pub fn make_batches(
    dataset: &Dataset,
    samples_per_batch: usize,
    output_dim: usize,
    epoch_seed: u64,
) -> Result<BatchPlan> {
    plan_batches(dataset.len(), samples_per_batch, output_dim, epoch_seed)
}

pub fn plan_batches(
    sample_count: usize,
    samples_per_batch: usize,
    output_dim: usize,
    epoch_seed: u64,
) -> Result<BatchPlan> {
    if samples_per_batch == 0 || samples_per_batch > sample_count {
        return Err(Error::Precondition(format!(
            "batch size {samples_per_batch} does not fit {sample_count} samples"
        )));
    }
    let mut order: Vec<usize> = (0..sample_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
    let full = sample_count / samples_per_batch * samples_per_batch;
    let dropped = order.split_off(full);
    let batches = order.chunks(samples_per_batch).map(<[usize]>::to_vec).collect();
    Ok(BatchPlan {
        batches,
        residual_len: samples_per_batch * output_dim,
        dropped,
    })
}
