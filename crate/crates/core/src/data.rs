//! Labeled datasets: synthetic Gaussian blobs, MNIST IDX files, the chief's
//! validation holdout and per-worker distribution.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Row-major feature matrix with one class label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, class_count: usize) -> Result<Self> {
        if dim == 0 || class_count == 0 {
            return Err(Error::InvalidArgument(
                "dataset dim and class count must be positive".into(),
            ));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                actual: features.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: class_count,
            });
        }
        Ok(Self {
            features,
            labels,
            dim,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Copies the given rows, in order, into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            class_count: self.class_count,
        }
    }
}

/// How the training set is handed out to workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistributionMode {
    /// Every worker holds the whole training set.
    FullCopy,
    /// A shuffled partition into near-equal shards.
    EqualShards,
}

impl std::str::FromStr for DistributionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full_copy" => Ok(Self::FullCopy),
            "equal_shards" => Ok(Self::EqualShards),
            other => Err(format!("unknown distribution `{other}` (full_copy|equal_shards)")),
        }
    }
}

impl std::fmt::Display for DistributionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FullCopy => "full_copy",
            Self::EqualShards => "equal_shards",
        })
    }
}

/// Isotropic Gaussian blobs around seed-derived class centers.
///
/// Centers are drawn uniformly from `[-1, 1]^dim`, so with moderate `dim`
/// they are well separated relative to small `spread`. Rows are grouped by
/// class in generation order.
pub fn gen_blobs(class_count: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if class_count == 0 || dim == 0 || per_class == 0 {
        return Err(Error::InvalidArgument(
            "gen_blobs arguments must be positive".into(),
        ));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid spread {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..class_count * dim)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let mut features = Vec::with_capacity(class_count * per_class * dim);
    let mut labels = Vec::with_capacity(class_count * per_class);
    for class in 0..class_count {
        let center = &centers[class * dim..(class + 1) * dim];
        for _ in 0..per_class {
            if spread == 0.0 {
                features.extend_from_slice(center);
            } else {
                let noise = Normal::new(0.0, spread).expect("spread validated");
                features.extend(center.iter().map(|c| c + noise.sample(&mut rng)));
            }
            labels.push(class);
        }
    }
    Dataset::new(features, labels, dim, class_count)
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::IdxFormat {
            path: path.to_path_buf(),
            reason: "truncated header".into(),
        })
}

fn check_magic(found: u32, expected: u32, path: &Path) -> Result<()> {
    if found != expected {
        return Err(Error::IdxFormat {
            path: path.to_path_buf(),
            reason: format!("bad magic 0x{found:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

/// Parses an IDX image/label pair from raw bytes. Pixels are scaled to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8], images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    check_magic(read_u32_be(images, 0, images_path)?, IDX_IMAGES_MAGIC, images_path)?;
    check_magic(read_u32_be(labels, 0, labels_path)?, IDX_LABELS_MAGIC, labels_path)?;

    let n_images = read_u32_be(images, 4, images_path)? as usize;
    let rows = read_u32_be(images, 8, images_path)? as usize;
    let cols = read_u32_be(images, 12, images_path)? as usize;
    let n_labels = read_u32_be(labels, 4, labels_path)? as usize;
    if n_images != n_labels {
        return Err(Error::IdxCountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let dim = rows * cols;
    let pixels = images.get(16..16 + n_images * dim).ok_or_else(|| Error::IdxFormat {
        path: images_path.to_path_buf(),
        reason: format!("truncated payload, expected {} pixel bytes", n_images * dim),
    })?;
    let label_bytes = labels.get(8..8 + n_labels).ok_or_else(|| Error::IdxFormat {
        path: labels_path.to_path_buf(),
        reason: format!("truncated payload, expected {n_labels} label bytes"),
    })?;

    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&l| usize::from(l)).collect();
    let class_count = labels.iter().copied().max().map_or(1, |m| m + 1).max(10);
    Dataset::new(features, labels, dim, class_count)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(ip)?;
    let labels = fs::read(lp)?;
    parse_idx(&images, &labels, ip, lp)
}

/// Shuffles and splits off `round(n * validation_fraction)` rows.
pub fn split_holdout(data: &Dataset, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} not in (0, 1)"
        )));
    }
    let n = data.len();
    let n_val = (n as f64 * validation_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidArgument(format!(
            "fraction {validation_fraction} of {n} rows leaves an empty split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (val_idx, train_idx) = order.split_at(n_val);
    Ok((data.subset(train_idx), data.subset(val_idx)))
}

/// Hands the training set to `k` workers.
///
/// Full copies share one allocation. Shards keep the input's row order.
pub fn distribute(data: &Dataset, k: usize, mode: DistributionMode, seed: u64) -> Result<Vec<Arc<Dataset>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    match mode {
        DistributionMode::FullCopy => {
            let shared = Arc::new(data.clone());
            Ok(vec![shared; k])
        }
        DistributionMode::EqualShards => {
            let n = data.len();
            if n < k {
                return Err(Error::InvalidArgument(format!(
                    "{n} rows cannot be sharded across {k} workers"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (base, extra) = (n / k, n % k);
            let mut shards = Vec::with_capacity(k);
            let mut start = 0;
            for i in 0..k {
                let size = base + usize::from(i < extra);
                let mut idx = order[start..start + size].to_vec();
                idx.sort_unstable();
                shards.push(Arc::new(data.subset(&idx)));
                start += size;
            }
            Ok(shards)
        }
    }
}
