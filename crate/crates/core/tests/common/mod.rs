#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volres::data::{write_off, Dataset, TriangleMesh, VoxelGrid};

/// Axis-aligned box centered at the origin with the given full extents.
pub fn box_mesh(extent: [f64; 3]) -> TriangleMesh {
    let h = extent.map(|e| e / 2.0);
    let vertices: Vec<[f64; 3]> = (0..8)
        .map(|i| [0, 1, 2].map(|a| if (i >> a) & 1 == 1 { h[a] } else { -h[a] }))
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh::new(vertices, faces).unwrap()
}

pub fn octahedron(radii: [f64; 3]) -> TriangleMesh {
    let [a, b, c] = radii;
    let vertices = vec![
        [a, 0.0, 0.0],
        [-a, 0.0, 0.0],
        [0.0, b, 0.0],
        [0.0, -b, 0.0],
        [0.0, 0.0, c],
        [0.0, 0.0, -c],
    ];
    let mut faces = Vec::new();
    for x in [0, 1] {
        for y in [2, 3] {
            for z in [4, 5] {
                faces.push([x, y, z]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).unwrap()
}

/// Closed lat-long sphere with per-vertex radial noise and a random stretch.
pub fn random_blob(rng: &mut impl Rng) -> TriangleMesh {
    let rings = rng.random_range(16..32);
    let segments = rng.random_range(20..40);
    let stretch = [0; 3].map(|_| rng.random_range(0.5..1.5));
    let mut vertices = vec![[0.0, 0.0, stretch[2]], [0.0, 0.0, -stretch[2]]];
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            let rad = rng.random_range(0.7..1.3);
            vertices.push([
                rad * stretch[0] * theta.sin() * phi.cos(),
                rad * stretch[1] * theta.sin() * phi.sin(),
                rad * stretch[2] * theta.cos(),
            ]);
        }
    }
    let at = |r: usize, s: usize| 2 + (r - 1) * segments + s % segments;
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, at(1, s), at(1, s + 1)]);
        faces.push([1, at(rings - 1, s + 1), at(rings - 1, s)]);
        for r in 1..rings - 1 {
            faces.push([at(r, s), at(r + 1, s), at(r + 1, s + 1)]);
            faces.push([at(r, s), at(r + 1, s + 1), at(r, s + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces).unwrap()
}

/// Independent occupancy estimate: scatter uniform points over every
/// triangle and mark the cell each lands in, or every cell whose closed
/// extent holds it when it sits on a cell wall.
pub fn point_sampling_oracle(mesh: &TriangleMesh, dims: [usize; 3], points_per_triangle: usize, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = VoxelGrid::empty(dims);
    let half = dims.map(|n| n as f64 / 2.0);
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        for _ in 0..points_per_triangle {
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let (u, v, w) = (1.0 - s, s * (1.0 - r2), s * r2);
            let p = [0, 1, 2].map(|i| u * a[i] + v * b[i] + w * c[i] + half[i]);
            let cells = [0, 1, 2].map(|i| {
                let lo = (p[i].floor() as isize).clamp(0, dims[i] as isize - 1) as usize;
                let on_wall = p[i] == p[i].floor() && lo > 0 && p[i] < dims[i] as f64;
                if on_wall {
                    (lo - 1, lo)
                } else {
                    (lo, lo)
                }
            });
            for i in cells[0].0..=cells[0].1 {
                for j in cells[1].0..=cells[1].1 {
                    for k in cells[2].0..=cells[2].1 {
                        grid.set([i, j, k]);
                    }
                }
            }
        }
    }
    grid
}

pub fn agreement(a: &VoxelGrid, b: &VoxelGrid) -> f64 {
    let [d, h, w] = a.dims();
    let mut same = 0usize;
    for i in 0..d {
        for j in 0..h {
            for k in 0..w {
                same += (a.get([i, j, k]) == b.get([i, j, k])) as usize;
            }
        }
    }
    same as f64 / a.len() as f64
}

/// Boxes (class 0) against octahedra (class 1) with random proportions.
pub fn shape_meshes(n_per_class: usize, seed: u64) -> Vec<(TriangleMesh, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..n_per_class {
        let e = [0; 3].map(|_| rng.random_range(0.6..1.4));
        out.push((box_mesh(e), 0));
        let r = [0; 3].map(|_| rng.random_range(0.6..1.4));
        out.push((octahedron(r), 1));
    }
    out
}

pub fn shape_dataset(n_per_class: usize, dims: [usize; 3], seed: u64) -> Dataset {
    Dataset::from_meshes(shape_meshes(n_per_class, seed), dims, 2).unwrap()
}

/// `<root>/<class>/<split>/<name>.off` with the given per-class counts.
pub fn write_tree(root: &Path, classes: &[(&str, usize, usize)], mesh: impl Fn(usize, usize) -> TriangleMesh) {
    for (c, &(name, train, test)) in classes.iter().enumerate() {
        for (split, n) in [("train", train), ("test", test)] {
            let dir = root.join(name).join(split);
            std::fs::create_dir_all(&dir).unwrap();
            for i in 0..n {
                let text = write_off(&mesh(c, i));
                std::fs::write(dir.join(format!("{name}_{i:04}.off")), text).unwrap();
            }
        }
    }
}

/// The tiny fixture: two classes, three training and one test mesh each.
pub fn fixture_tree(root: &Path) {
    write_tree(root, &[("box", 3, 1), ("octahedron", 3, 1)], |c, i| {
        let s = 1.0 + 0.1 * i as f64;
        if c == 0 {
            box_mesh([s, 1.0, 0.7])
        } else {
            octahedron([1.0, s, 0.8])
        }
    });
}
