use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{normalize_mesh, rotate_mesh, RotationSpec, TriangleMesh};
use super::off::parse_off;
use super::voxel::{voxelize, VoxelGrid};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};
use crate::util::{derive_seed, write_atomic};

pub const VOXEL_MAGIC: &[u8; 4] = b"VOXL";
pub const VOXEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}, expected train or test"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub class_id: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub classes: Vec<String>,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetIndex {
    /// Walk `<root>/<class>/<split>/<name>.off`. Classes are sorted by name;
    /// entries within a class and split by file name.
    pub fn scan(root: &Path) -> Result<Self> {
        let mut classes: Vec<(String, PathBuf)> = read_dirs(root)?
            .into_iter()
            .filter_map(|p| Some((p.file_name()?.to_str()?.to_owned(), p)))
            .collect();
        classes.sort();
        if classes.is_empty() {
            return Err(Error::Data(format!("no class directories under {}", root.display())));
        }
        let mut entries = Vec::new();
        for (class_id, (_, dir)) in classes.iter().enumerate() {
            for split in Split::ALL {
                let split_dir = dir.join(split.name());
                if !split_dir.is_dir() {
                    continue;
                }
                let mut files: Vec<PathBuf> = std::fs::read_dir(&split_dir)
                    .map_err(|e| Error::io(&split_dir, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("off")))
                    .collect();
                files.sort();
                entries.extend(files.into_iter().map(|path| DatasetEntry { path, class_id, split }));
            }
        }
        Ok(DatasetIndex {
            classes: classes.into_iter().map(|(n, _)| n).collect(),
            entries,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> + '_ {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn per_class_counts(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for e in self.split(split) {
            counts[e.class_id] += 1;
        }
        counts
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            classes: &'a [String],
            train_count: usize,
            test_count: usize,
            per_class_train: Vec<usize>,
            per_class_test: Vec<usize>,
            entries: &'a [DatasetEntry],
        }
        Ok(serde_json::to_string_pretty(&Out {
            classes: &self.classes,
            train_count: self.split_len(Split::Train),
            test_count: self.split_len(Split::Test),
            per_class_train: self.per_class_counts(Split::Train),
            per_class_test: self.per_class_counts(Split::Test),
            entries: &self.entries,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct In {
            classes: Vec<String>,
            entries: Vec<DatasetEntry>,
        }
        let parsed: In = serde_json::from_str(text)?;
        let index = DatasetIndex {
            classes: parsed.classes,
            entries: parsed.entries,
        };
        if let Some(e) = index.entries.iter().find(|e| e.class_id >= index.classes.len()) {
            return Err(Error::Data(format!(
                "{} has class id {} but only {} classes",
                e.path.display(),
                e.class_id,
                index.classes.len()
            )));
        }
        Ok(index)
    }
}

fn read_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    Ok(std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect())
}

/// Read and parse one OFF file.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_off(&bytes)
}

/// Normalize, optionally rotate, and voxelize. Rotation is applied to the raw
/// mesh and followed by normalization so the rotated shape fills the grid
/// the same way an unrotated one does.
pub fn mesh_to_grid(mesh: &TriangleMesh, dims: [usize; 3], rotation: Option<&RotationSpec>) -> Result<VoxelGrid> {
    let normalized = match rotation {
        Some(r) => normalize_mesh(&rotate_mesh(mesh, r)?, dims)?,
        None => normalize_mesh(mesh, dims)?,
    };
    voxelize(&normalized, dims)
}

/// Grids and labels for one split, as stored in a `.voxl` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelCache {
    pub dims: [usize; 3],
    pub labels: Vec<usize>,
    pub grids: Vec<VoxelGrid>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

impl VoxelCache {
    /// Voxelize every entry of `split` in parallel. Unreadable or degenerate
    /// meshes are skipped and reported; output order follows the index.
    pub fn build(index: &DatasetIndex, split: Split, dims: [usize; 3]) -> (Self, Vec<Skipped>) {
        let entries: Vec<&DatasetEntry> = index.split(split).collect();
        let results: Vec<Result<VoxelGrid>> = entries
            .par_iter()
            .map(|e| mesh_to_grid(&load_mesh(&e.path)?, dims, None))
            .collect();
        let mut cache = VoxelCache {
            dims,
            labels: Vec::new(),
            grids: Vec::new(),
        };
        let mut skipped = Vec::new();
        for (e, r) in entries.iter().zip(results) {
            match r {
                Ok(g) => {
                    cache.labels.push(e.class_id);
                    cache.grids.push(g);
                }
                Err(err) => skipped.push(Skipped {
                    path: e.path.clone(),
                    reason: err.to_string(),
                }),
            }
        }
        (cache, skipped)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.len() * (4 + VoxelGrid::packed_len(self.dims)));
        out.extend_from_slice(VOXEL_MAGIC);
        out.extend_from_slice(&VOXEL_VERSION.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (label, grid) in self.labels.iter().zip(&self.grids) {
            out.extend_from_slice(&(*label as u32).to_le_bytes());
            out.extend_from_slice(grid.packed());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, msg: String| Error::Format {
            offset: offset as u64,
            msg,
        };
        let u32_at = |at: usize, what: &str| -> Result<u32> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
                .ok_or_else(|| fail(at, format!("truncated: missing {what}")))
        };
        if bytes.get(..4) != Some(VOXEL_MAGIC) {
            return Err(fail(0, "not a voxel cache (bad magic)".into()));
        }
        let version = u32_at(4, "version")?;
        if version != VOXEL_VERSION {
            return Err(fail(4, format!("unsupported voxel cache version {version}")));
        }
        let dims = [
            u32_at(8, "dims")? as usize,
            u32_at(12, "dims")? as usize,
            u32_at(16, "dims")? as usize,
        ];
        if dims.contains(&0) {
            return Err(fail(8, format!("zero grid extent {dims:?}")));
        }
        let count = u32_at(20, "sample count")? as usize;
        let packed = VoxelGrid::packed_len(dims);
        let mut cache = VoxelCache {
            dims,
            labels: Vec::with_capacity(count.min(1 << 20)),
            grids: Vec::with_capacity(count.min(1 << 20)),
        };
        let mut at = 24;
        for i in 0..count {
            cache.labels.push(u32_at(at, "class id")? as usize);
            let bits = bytes
                .get(at + 4..at + 4 + packed)
                .ok_or_else(|| fail(at + 4, format!("truncated: sample {i} of {count} occupancy")))?;
            cache.grids.push(VoxelGrid::from_packed(dims, bits.to_vec())?);
            at += 4 + packed;
        }
        if at != bytes.len() {
            return Err(fail(at, format!("{} trailing bytes", bytes.len() - at)));
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Mesh behind a sample.
#[derive(Debug, Clone)]
pub enum SampleSource {
    Mesh(TriangleMesh),
    /// OFF file re-read on demand.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub label: usize,
    /// Precomputed unrotated grid, if any.
    pub grid: Option<VoxelGrid>,
    /// Mesh used for augmentation, if any.
    pub mesh: Option<SampleSource>,
}

/// Labeled samples for one split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dims: [usize; 3],
    pub num_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn from_cache(cache: VoxelCache, num_classes: usize) -> Result<Self> {
        if let Some(&l) = cache.labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Data(format!("cache label {l} but only {num_classes} classes")));
        }
        Ok(Dataset {
            dims: cache.dims,
            num_classes,
            samples: cache
                .labels
                .into_iter()
                .zip(cache.grids)
                .map(|(label, g)| Sample {
                    label,
                    grid: Some(g),
                    mesh: None,
                })
                .collect(),
        })
    }

    /// In-memory meshes; grids are voxelized on demand.
    pub fn from_meshes(meshes: Vec<(TriangleMesh, usize)>, dims: [usize; 3], num_classes: usize) -> Result<Self> {
        let samples = meshes
            .into_par_iter()
            .map(|(m, label)| {
                let grid = mesh_to_grid(&m, dims, None)?;
                Ok(Sample {
                    label,
                    grid: Some(grid),
                    mesh: Some(SampleSource::Mesh(m)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            dims,
            num_classes,
            samples,
        })
    }

    /// Attach OFF source paths from `index` to a cache built from the same
    /// index and split, enabling augmentation.
    pub fn attach_sources(&mut self, paths: Vec<PathBuf>) -> Result<()> {
        if paths.len() != self.samples.len() {
            return Err(Error::Data(format!(
                "{} mesh paths for {} cached samples",
                paths.len(),
                self.samples.len()
            )));
        }
        for (s, p) in self.samples.iter_mut().zip(paths) {
            s.mesh = Some(SampleSource::File(p));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Subset by sample position, keeping order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dims: self.dims,
            num_classes: self.num_classes,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Occupancy of sample `idx`, rotated by a fresh random rotation seeded
    /// from `(seed, epoch, idx)` when `augment` is set.
    pub fn grid(&self, idx: usize, augment: Option<(u64, u64)>) -> Result<VoxelGrid> {
        let s = &self.samples[idx];
        match augment {
            None => match (&s.grid, &s.mesh) {
                (Some(g), _) => Ok(g.clone()),
                (None, Some(src)) => mesh_to_grid(&self.source_mesh(src)?, self.dims, None),
                (None, None) => Err(Error::Data(format!("sample {idx} has neither grid nor mesh"))),
            },
            Some((seed, epoch)) => {
                let src = s.mesh.as_ref().ok_or_else(|| {
                    Error::Data(format!(
                        "augmentation needs source meshes, sample {idx} only has a cached grid"
                    ))
                })?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[epoch, idx as u64]));
                let rot = RotationSpec::random(&mut rng);
                mesh_to_grid(&self.source_mesh(src)?, self.dims, Some(&rot))
            }
        }
    }

    fn source_mesh(&self, src: &SampleSource) -> Result<TriangleMesh> {
        match src {
            SampleSource::Mesh(m) => Ok(m.clone()),
            SampleSource::File(p) => load_mesh(p),
        }
    }

    pub fn can_augment(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.mesh.is_some())
    }

    /// Stack the given samples into `[n, 1, d, h, w]`.
    pub fn batch_tensor<T: Scalar>(&self, indices: &[usize], augment: Option<(u64, u64)>) -> Result<Tensor<T>> {
        let [d, h, w] = self.dims;
        let vol = d * h * w;
        let grids: Vec<VoxelGrid> = indices
            .par_iter()
            .map(|&i| self.grid(i, augment))
            .collect::<Result<_>>()?;
        let mut data = vec![T::zero(); indices.len() * vol];
        for (g, chunk) in grids.iter().zip(data.chunks_mut(vol)) {
            g.write_into(chunk);
        }
        Tensor::from_vec(&[indices.len(), 1, d, h, w], data)
    }
}

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub x: Tensor<T>,
    pub labels: Vec<usize>,
    /// Dataset positions of the rows.
    pub indices: Vec<usize>,
}

/// Epoch-order permutation of `0..n`, determined by `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[epoch])));
    order
}

/// Shuffled batches for one epoch; the final short batch is kept.
pub struct BatchIter<'a, T> {
    data: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
    augment: Option<(u64, u64)>,
    _t: std::marker::PhantomData<T>,
}

pub fn batch_iter<T: Scalar>(
    data: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    shuffle: bool,
    augment: bool,
) -> Result<BatchIter<'_, T>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Data("split is empty".into()));
    }
    if augment && !data.can_augment() {
        return Err(Error::Data("augmentation requested but samples have no source meshes".into()));
    }
    let order = if shuffle {
        epoch_order(data.len(), seed, epoch)
    } else {
        (0..data.len()).collect()
    };
    Ok(BatchIter {
        data,
        order,
        batch_size,
        pos: 0,
        augment: augment.then_some((seed, epoch)),
        _t: std::marker::PhantomData,
    })
}

impl<T: Scalar> BatchIter<'_, T> {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl<T: Scalar> Iterator for BatchIter<'_, T> {
    type Item = Result<Batch<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        let labels = indices.iter().map(|&i| self.data.samples[i].label).collect();
        Some(
            self.data
                .batch_tensor(&indices, self.augment)
                .map(|x| Batch { x, labels, indices }),
        )
    }
}
