//! Dataset construction: label-heterogeneous per-device partitions, IDX
//! image ingestion, and a synthetic class-conditional Gaussian pool for
//! desk-scale runs.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::learner::Batch;
use crate::linalg::Mat;

/// A labeled sample pool: M rows of features with integer labels in
/// [0, n_classes). Every class must be represented.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    inputs: Mat,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledPool {
    pub fn new(inputs: Mat, labels: Vec<usize>, n_classes: usize) -> Result<LabeledPool> {
        if inputs.rows() != labels.len() {
            return Err(Error::input(format!(
                "{} labels for {} samples",
                labels.len(),
                inputs.rows()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::input("pool must contain at least one sample"));
        }
        if !inputs.all_finite() {
            return Err(Error::input("pool features contain non-finite values"));
        }
        let mut counts = vec![0usize; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::input(format!(
                    "label {y} out of range for {n_classes} classes"
                )));
            }
            counts[y] += 1;
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::input(format!("class {missing} has no samples")));
        }
        Ok(LabeledPool {
            inputs,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn classes(&self) -> usize {
        self.n_classes
    }

    pub fn inputs(&self) -> &Mat {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Pool that may cover only part of the label space, as device shards
    /// do. Labels must still lie in [0, n_classes).
    pub fn from_shard(inputs: Mat, labels: Vec<usize>, n_classes: usize) -> Result<LabeledPool> {
        if inputs.rows() != labels.len() || inputs.rows() == 0 {
            return Err(Error::input("shard needs one label per sample, at least one sample"));
        }
        if !inputs.all_finite() {
            return Err(Error::input("shard features contain non-finite values"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::input(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(LabeledPool {
            inputs,
            labels,
            n_classes,
        })
    }

    /// Copy the given rows into a mini-batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let inputs = Mat::from_fn(indices.len(), self.dim(), |i, j| {
            self.inputs[(indices[i], j)]
        });
        Batch::new(inputs, indices.iter().map(|&i| self.labels[i]).collect())
    }

    /// New pool from a subset of rows, keeping the class count.
    fn subset(&self, indices: &[usize]) -> Result<LabeledPool> {
        let inputs = Mat::from_fn(indices.len(), self.dim(), |i, j| {
            self.inputs[(indices[i], j)]
        });
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        // Subsets may legitimately cover only some classes.
        Ok(LabeledPool {
            inputs,
            labels,
            n_classes: self.n_classes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Setup {
    /// Devices in the same room draw overlapping label windows.
    ClusterAligned,
    /// Each device draws its label set independently of the graph.
    Random,
}

/// How the global pool is split across devices.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PartitionSpec {
    pub labels_per_device: usize,
    pub train_per_device: usize,
    pub local_test_per_device: usize,
    pub global_test_size: usize,
    pub setup: Setup,
}

impl PartitionSpec {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.labels_per_device == 0 || self.labels_per_device > n_classes {
            return Err(Error::input(format!(
                "labels_per_device must be in [1, {n_classes}], got {}",
                self.labels_per_device
            )));
        }
        for (name, v) in [
            ("train_per_device", self.train_per_device),
            ("local_test_per_device", self.local_test_per_device),
            ("global_test_size", self.global_test_size),
        ] {
            if v == 0 {
                return Err(Error::input(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One device's shard: training pool, a local test set over the same label
/// support, and the label set itself.
#[derive(Debug, Clone)]
pub struct DeviceData {
    pub train: LabeledPool,
    pub local_test: LabeledPool,
    pub allowed_labels: BTreeSet<usize>,
}

/// Per-class cursors into shuffled sample indices. Draws are without
/// replacement until a class is exhausted; training draws then fall back to
/// sampling with replacement, while test draws must stay held-out.
struct ClassPools {
    by_class: Vec<Vec<usize>>,
    cursor: Vec<usize>,
}

impl ClassPools {
    fn new<R: Rng>(pool: &LabeledPool, rng: &mut R) -> ClassPools {
        let mut by_class = vec![Vec::new(); pool.classes()];
        for (i, &y) in pool.labels().iter().enumerate() {
            by_class[y].push(i);
        }
        for list in &mut by_class {
            list.shuffle(rng);
        }
        ClassPools {
            cursor: vec![0; by_class.len()],
            by_class,
        }
    }

    fn draw_held_out(&mut self, class: usize, count: usize) -> Result<Vec<usize>> {
        let available = self.by_class[class].len() - self.cursor[class];
        if available < count {
            return Err(Error::input(format!(
                "class {class}: needs {count} more held-out samples, only {available} left"
            )));
        }
        let start = self.cursor[class];
        self.cursor[class] += count;
        Ok(self.by_class[class][start..start + count].to_vec())
    }

    fn draw_train<R: Rng>(&mut self, class: usize, count: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        let fresh = (self.by_class[class].len() - self.cursor[class]).min(count);
        let start = self.cursor[class];
        out.extend_from_slice(&self.by_class[class][start..start + fresh]);
        self.cursor[class] += fresh;
        for _ in fresh..count {
            let pick = rng.random_range(0..self.by_class[class].len());
            out.push(self.by_class[class][pick]);
        }
        out
    }
}

/// Split `count` into `parts` near-equal quotas, the remainder spread over
/// the first parts.
fn quotas(count: usize, parts: usize) -> Vec<usize> {
    let base = count / parts;
    let extra = count % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Assign each device its label window. Cluster starts are spread evenly
/// over the label circle so the union of windows covers every class whenever
/// K * L >= n_c; devices inside a cluster shift the start by at most one, so
/// any two cluster mates share at least L-1 labels.
fn label_sets<R: Rng>(
    graph: &Graph,
    labels_per_device: usize,
    n_classes: usize,
    setup: Setup,
    rng: &mut R,
) -> Vec<BTreeSet<usize>> {
    let l = labels_per_device;
    let clusters = graph.cluster_count();
    graph
        .device_ids()
        .iter()
        .map(|id| match setup {
            Setup::ClusterAligned => {
                let cluster_start = id.cluster * n_classes / clusters;
                let start = (cluster_start + id.local % 2) % n_classes;
                (0..l).map(|t| (start + t) % n_classes).collect()
            }
            Setup::Random => {
                let mut all: Vec<usize> = (0..n_classes).collect();
                all.shuffle(rng);
                all.into_iter().take(l).collect()
            }
        })
        .collect()
}

/// Partition a pool into per-device shards plus one shared global test set
/// covering every class. The global test is held out first; device local
/// tests are held out per device; training shards prefer disjoint samples
/// and fall back to replacement only once a class is exhausted.
pub fn partition<R: Rng>(
    pool: &LabeledPool,
    spec: &PartitionSpec,
    graph: &Graph,
    rng: &mut R,
) -> Result<(Vec<DeviceData>, LabeledPool)> {
    spec.validate(pool.classes())?;
    let n_classes = pool.classes();
    let mut pools = ClassPools::new(pool, rng);

    // Shared global test set spanning all classes.
    let mut global_indices = Vec::with_capacity(spec.global_test_size);
    for (class, quota) in quotas(spec.global_test_size, n_classes).into_iter().enumerate() {
        global_indices.extend(pools.draw_held_out(class, quota)?);
    }
    let global_test = LabeledPool::new(
        pool.subset(&global_indices)?.inputs,
        global_indices.iter().map(|&i| pool.labels()[i]).collect(),
        n_classes,
    )?;

    let sets = label_sets(graph, spec.labels_per_device, n_classes, spec.setup, rng);
    let mut devices = Vec::with_capacity(graph.len());
    for allowed in sets {
        let ordered: Vec<usize> = allowed.iter().copied().collect();
        let train_quota = quotas(spec.train_per_device, ordered.len());
        let test_quota = quotas(spec.local_test_per_device, ordered.len());

        let mut test_indices = Vec::with_capacity(spec.local_test_per_device);
        for (&class, &quota) in ordered.iter().zip(&test_quota) {
            test_indices.extend(pools.draw_held_out(class, quota)?);
        }
        let mut train_indices = Vec::with_capacity(spec.train_per_device);
        for (&class, &quota) in ordered.iter().zip(&train_quota) {
            train_indices.extend(pools.draw_train(class, quota, rng));
        }

        devices.push(DeviceData {
            train: pool.subset(&train_indices)?,
            local_test: pool.subset(&test_indices)?,
            allowed_labels: allowed,
        });
    }
    Ok((devices, global_test))
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(reader: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader
        .read_exact(&mut buf)
        .map_err(|e| Error::input(format!("{what}: truncated header: {e}")))?;
    Ok(u32::from_be_bytes(buf))
}

/// Load an IDX image/label file pair (big-endian, magic 0x803 / 0x801).
/// Pixels are scaled to [0, 1]; a 28x28 image becomes a 784-feature row.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledPool> {
    let mut images = std::fs::File::open(images_path.as_ref())?;
    let magic = read_u32_be(&mut images, "image file")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::input(format!(
            "image file: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&mut images, "image file")? as usize;
    let rows = read_u32_be(&mut images, "image file")? as usize;
    let cols = read_u32_be(&mut images, "image file")? as usize;
    let dim = rows * cols;
    let mut pixels = vec![0u8; count * dim];
    images
        .read_exact(&mut pixels)
        .map_err(|e| Error::input(format!("image file: truncated pixel data: {e}")))?;

    let mut labels_file = std::fs::File::open(labels_path.as_ref())?;
    let magic = read_u32_be(&mut labels_file, "label file")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::input(format!(
            "label file: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let label_count = read_u32_be(&mut labels_file, "label file")? as usize;
    if label_count != count {
        return Err(Error::input(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let mut raw_labels = vec![0u8; count];
    labels_file
        .read_exact(&mut raw_labels)
        .map_err(|e| Error::input(format!("label file: truncated label data: {e}")))?;

    let inputs = Mat::from_fn(count, dim, |i, j| pixels[i * dim + j] as f64 / 255.0);
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    LabeledPool::new(inputs, labels, n_classes)
}

/// Synthetic class-conditional Gaussian pool: class means sit `separation`
/// apart along random unit directions with unit within-class covariance.
/// Features are affinely rescaled into [0, 1]. Deterministic under the rng.
pub fn synth_gaussian_pool<R: Rng>(
    n_classes: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    rng: &mut R,
) -> Result<LabeledPool> {
    if n_classes < 2 || dim == 0 || per_class == 0 {
        return Err(Error::input(
            "synthetic pool needs >= 2 classes and positive dim/per_class",
        ));
    }
    if separation.is_nan() || separation < 0.0 {
        return Err(Error::input(format!(
            "separation must be nonnegative, got {separation}"
        )));
    }
    let mut means = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut dir {
            *v *= separation / norm;
        }
        means.push(dir);
    }

    let total = n_classes * per_class;
    let mut inputs = Mat::zeros(total, dim);
    let mut labels = Vec::with_capacity(total);
    for (class, mean) in means.iter().enumerate() {
        for s in 0..per_class {
            let row = inputs.row_mut(class * per_class + s);
            for (slot, center) in row.iter_mut().zip(mean) {
                let noise: f64 = rng.sample(StandardNormal);
                *slot = center + noise;
            }
            labels.push(class);
        }
    }

    // Rescale to [0, 1] so learning rates behave uniformly across pools.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in inputs.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-12);
    let scaled = Mat::from_fn(total, dim, |i, j| (inputs[(i, j)] - lo) / span);
    LabeledPool::new(scaled, labels, n_classes)
}
