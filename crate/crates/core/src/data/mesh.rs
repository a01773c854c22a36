use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Fraction of the grid extent spanned by the longest bounding-box edge.
pub const FILL_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::Geometry("mesh has no faces".into()));
        }
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::Geometry(format!(
                "face {f:?} indexes past {} vertices",
                vertices.len()
            )));
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn triangle(&self, f: usize) -> [[f64; 3]; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }
}

/// Center the bounding box on the origin and scale uniformly so the longest
/// edge spans [`FILL_FRACTION`] of the smallest grid extent. Coordinates are
/// in voxel units.
pub fn normalize_mesh(mesh: &TriangleMesh, dims: [usize; 3]) -> Result<TriangleMesh> {
    if mesh.vertices.is_empty() {
        return Err(Error::Geometry("mesh has no vertices".into()));
    }
    let (lo, hi) = mesh.bounds();
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::Geometry("mesh has non-finite coordinates".into()));
    }
    let center = [0, 1, 2].map(|a| (lo[a] + hi[a]) / 2.0);
    let longest = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if longest <= 0.0 {
        return Err(Error::Geometry("mesh has zero extent".into()));
    }
    let extent = *dims.iter().min().expect("three dims") as f64;
    let scale = FILL_FRACTION * extent / longest;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| [0, 1, 2].map(|a| (v[a] - center[a]) * scale))
        .collect();
    Ok(TriangleMesh {
        vertices,
        faces: mesh.faces.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSpec {
    pub axis: [f64; 3],
    /// Radians.
    pub angle: f64,
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl RotationSpec {
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self> {
        let r = RotationSpec { axis, angle };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<()> {
        let n = norm(self.axis);
        if !((n - 1.0).abs() <= 1e-12) || !self.angle.is_finite() {
            return Err(Error::Spec(format!(
                "rotation axis must be a unit vector (norm {n}) and angle finite ({})",
                self.angle
            )));
        }
        Ok(())
    }

    pub fn with_angle(self, angle: f64) -> Self {
        RotationSpec { angle, ..self }
    }

    /// Axis uniform on the sphere (normalized Gaussian), angle uniform in `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let g: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(rng));
            let n = norm(g);
            if n > 1e-6 {
                let axis = g.map(|v| v / n);
                let angle = rng.random::<f64>() * TAU;
                return RotationSpec { axis, angle };
            }
        }
    }

    /// Rodrigues matrix `cI + s[k]x + (1 - c)kk^T`. Whole quarter turns use
    /// exact sine and cosine so grid-axis rotations map the grid onto itself.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let quarter = self.angle / FRAC_PI_2;
        let (s, c) = if quarter == quarter.round() && quarter.abs() < 1e9 {
            match (quarter as i64).rem_euclid(4) {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            }
        } else {
            self.angle.sin_cos()
        };
        let [x, y, z] = self.axis;
        let t = 1.0 - c;
        [
            [c + t * x * x, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, c + t * y * y, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, c + t * z * z],
        ]
    }
}

/// Rotate every vertex about the origin; faces are unchanged.
pub fn rotate_mesh(mesh: &TriangleMesh, rot: &RotationSpec) -> Result<TriangleMesh> {
    rot.check()?;
    let r = rot.matrix();
    if r == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        return Ok(mesh.clone());
    }
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| r.map(|row| row[0] * v[0] + row[1] * v[1] + row[2] * v[2]))
        .collect();
    Ok(TriangleMesh {
        vertices,
        faces: mesh.faces.clone(),
    })
}
