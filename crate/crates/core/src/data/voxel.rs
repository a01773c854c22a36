use super::mesh::TriangleMesh;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Binary occupancy, bit-packed LSB-first in row-major `(d, h, w)` order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VoxelGrid {
    dims: [usize; 3],
    bits: Vec<u8>,
}

impl VoxelGrid {
    pub fn empty(dims: [usize; 3]) -> Self {
        VoxelGrid {
            dims,
            bits: vec![0; Self::packed_len(dims)],
        }
    }

    pub fn packed_len(dims: [usize; 3]) -> usize {
        (dims[0] * dims[1] * dims[2]).div_ceil(8)
    }

    pub fn from_packed(dims: [usize; 3], bits: Vec<u8>) -> Result<Self> {
        if bits.len() != Self::packed_len(dims) {
            return Err(Error::dim(format!(
                "{} packed bytes for a {dims:?} grid, expected {}",
                bits.len(),
                Self::packed_len(dims)
            )));
        }
        Ok(VoxelGrid { dims, bits })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn packed(&self) -> &[u8] {
        &self.bits
    }

    fn linear(&self, [d, h, w]: [usize; 3]) -> usize {
        (d * self.dims[1] + h) * self.dims[2] + w
    }

    pub fn get(&self, at: [usize; 3]) -> bool {
        let i = self.linear(at);
        self.bits[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, at: [usize; 3]) {
        let i = self.linear(at);
        self.bits[i / 8] |= 1 << (i % 8);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Write occupancy as 0/1 values into `out` (length `d*h*w`).
    pub fn write_into<T: Scalar>(&self, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.len());
        for (i, v) in out.iter_mut().enumerate() {
            *v = if self.bits[i / 8] >> (i % 8) & 1 == 1 {
                T::one()
            } else {
                T::zero()
            };
        }
    }
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Separating-axis test between a triangle and the closed cube of half-size
/// `half` centered at `center`.
pub fn triangle_box_overlap(tri: [V3; 3], center: V3, half: f64) -> bool {
    let v = tri.map(|p| sub(p, center));
    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > half || hi < -half {
            return false;
        }
    }
    let edges = [sub(v[1], v[0]), sub(v[2], v[1]), sub(v[0], v[2])];
    let n = cross(edges[0], edges[1]);
    let r = half * (n[0].abs() + n[1].abs() + n[2].abs());
    if dot(n, v[0]).abs() > r {
        return false;
    }
    for e in edges {
        for a in 0..3 {
            let mut unit = [0.0; 3];
            unit[a] = 1.0;
            let axis = cross(unit, e);
            let p = v.map(|x| dot(axis, x));
            let r = half * (axis[0].abs() + axis[1].abs() + axis[2].abs());
            let lo = p[0].min(p[1]).min(p[2]);
            let hi = p[0].max(p[1]).max(p[2]);
            if lo > r || hi < -r {
                return false;
            }
        }
    }
    true
}

/// Surface occupancy of a normalized mesh: a voxel is set iff some triangle
/// touches its closed cell. Cell `i` along an axis of extent `n` spans
/// `[i - n/2, i + 1 - n/2]`; `x, y, z` map to `d, h, w`.
pub fn voxelize(mesh: &TriangleMesh, dims: [usize; 3]) -> Result<VoxelGrid> {
    let half = dims.map(|n| n as f64 / 2.0);
    const SLACK: f64 = 1e-9;
    if let Some(v) = mesh
        .vertices
        .iter()
        .find(|v| (0..3).any(|a| !(v[a].abs() <= half[a] + SLACK)))
    {
        return Err(Error::Geometry(format!(
            "vertex {v:?} lies outside the {dims:?} grid; normalize the mesh first"
        )));
    }
    let mut grid = VoxelGrid::empty(dims);
    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let lo = tri[0][a].min(tri[1][a]).min(tri[2][a]) + half[a];
            let hi = tri[0][a].max(tri[1][a]).max(tri[2][a]) + half[a];
            let first = (lo.ceil() - 1.0).max(0.0) as usize;
            let last = (hi.floor().max(0.0) as usize).min(dims[a] - 1);
            range[a] = (first.min(dims[a] - 1), last);
        }
        for i in range[0].0..=range[0].1 {
            for j in range[1].0..=range[1].1 {
                for k in range[2].0..=range[2].1 {
                    if grid.get([i, j, k]) {
                        continue;
                    }
                    let center = [
                        i as f64 + 0.5 - half[0],
                        j as f64 + 0.5 - half[1],
                        k as f64 + 0.5 - half[2],
                    ];
                    if triangle_box_overlap(tri, center, 0.5) {
                        grid.set([i, j, k]);
                    }
                }
            }
        }
    }
    Ok(grid)
}
