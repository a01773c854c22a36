//! Mesh ingestion, normalization, rotation, voxelization and batching.

mod dataset;
mod mesh;
mod off;
mod voxel;

pub use dataset::{
    batch_iter, epoch_order, load_mesh, mesh_to_grid, Batch, BatchIter, Dataset, DatasetEntry, DatasetIndex,
    Sample, SampleSource, Skipped, Split, VoxelCache, VOXEL_MAGIC, VOXEL_VERSION,
};
pub use mesh::{normalize_mesh, rotate_mesh, RotationSpec, TriangleMesh, FILL_FRACTION};
pub use off::{parse_off, write_off};
pub use voxel::{triangle_box_overlap, voxelize, VoxelGrid};
