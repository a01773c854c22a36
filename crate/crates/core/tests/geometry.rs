mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use volres::data::{
    mesh_to_grid, normalize_mesh, parse_off, rotate_mesh, voxelize, write_off, RotationSpec, TriangleMesh, VoxelGrid,
};

use common::*;

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn blob(seed: u64) -> TriangleMesh {
    random_blob(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn unit_axis() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("non-degenerate", |v| dist(*v, [0.0; 3]) > 1e-3)
        .prop_map(|v| {
            let n = dist(v, [0.0; 3]);
            v.map(|x| x / n)
        })
}

/// Where voxel `(i, j, k)` lands after `quarters` turns about grid axis `axis`.
fn turned_index(at: [usize; 3], n: usize, axis: usize, quarters: usize) -> [usize; 3] {
    let (p, q) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut v = at;
    for _ in 0..quarters % 4 {
        let (a, b) = (v[p], v[q]);
        v[p] = n - 1 - b;
        v[q] = a;
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_preserves_norms_and_distances(seed in 0u64..1000, axis in unit_axis(), angle in -10.0f64..10.0) {
        let mesh = blob(seed);
        let rot = RotationSpec::new(axis, angle).unwrap();
        let turned = rotate_mesh(&mesh, &rot).unwrap();
        prop_assert_eq!(&turned.faces, &mesh.faces);
        let origin = [0.0; 3];
        for (a, b) in mesh.vertices.iter().zip(&turned.vertices) {
            prop_assert!((dist(*a, origin) - dist(*b, origin)).abs() <= 1e-10);
        }
        for i in 0..mesh.vertices.len() {
            for j in i + 1..mesh.vertices.len() {
                let before = dist(mesh.vertices[i], mesh.vertices[j]);
                let after = dist(turned.vertices[i], turned.vertices[j]);
                prop_assert!((before - after).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_angle_is_bitwise_identity(seed in 0u64..1000, axis in unit_axis()) {
        let mesh = blob(seed);
        let rot = RotationSpec::new(axis, 0.0).unwrap();
        prop_assert_eq!(rotate_mesh(&mesh, &rot).unwrap(), mesh);
    }

    #[test]
    fn off_text_round_trips(seed in 0u64..1000, scale in 1e-3f64..1e3) {
        let raw = blob(seed);
        let mesh = TriangleMesh::new(
            raw.vertices.iter().map(|v| v.map(|x| x * scale)).collect(),
            raw.faces.clone(),
        ).unwrap();
        prop_assert_eq!(parse_off(write_off(&mesh).as_bytes()).unwrap(), mesh);
    }

    #[test]
    fn normalized_mesh_fits_grid(seed in 0u64..1000, d in 4usize..40, h in 4usize..40, w in 4usize..40) {
        let dims = [d, h, w];
        let m = normalize_mesh(&blob(seed), dims).unwrap();
        let (lo, hi) = m.bounds();
        let extent = *dims.iter().min().unwrap() as f64;
        let longest = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        prop_assert!((longest - 0.95 * extent).abs() < 1e-9 * extent);
        for a in 0..3 {
            prop_assert!(lo[a] >= -(dims[a] as f64) / 2.0 && hi[a] <= dims[a] as f64 / 2.0);
            prop_assert!((lo[a] + hi[a]).abs() < 1e-9);
        }
    }

    #[test]
    fn grids_are_nonempty_and_binary(seed in 0u64..1000, n in 4usize..33) {
        let dims = [n, n, n];
        let g = mesh_to_grid(&blob(seed), dims, None).unwrap();
        prop_assert!(g.count() > 0);
        prop_assert_eq!(g.packed().len(), VoxelGrid::packed_len(dims));
        let mut dense = vec![0.0f32; g.len()];
        g.write_into(&mut dense);
        prop_assert!(dense.iter().all(|&v| v == 0.0 || v == 1.0));
        prop_assert_eq!(dense.iter().filter(|&&v| v == 1.0).count(), g.count());
    }

    #[test]
    fn quarter_turns_permute_box_grids(
        extent in prop::array::uniform3(0.3f64..1.0),
        axis in 0usize..3,
        quarters in 0usize..4,
        n in 6usize..24,
    ) {
        let dims = [n, n, n];
        let mesh = box_mesh(extent);
        let mut unit = [0.0; 3];
        unit[axis] = 1.0;
        let rot = RotationSpec::new(unit, quarters as f64 * std::f64::consts::FRAC_PI_2).unwrap();
        let plain = mesh_to_grid(&mesh, dims, None).unwrap();
        let turned = mesh_to_grid(&mesh, dims, Some(&rot)).unwrap();
        prop_assert_eq!(plain.count(), turned.count());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let to = turned_index([i, j, k], n, axis, quarters);
                    prop_assert_eq!(plain.get([i, j, k]), turned.get(to), "voxel {:?} -> {:?}", [i, j, k], to);
                }
            }
        }
    }
}

#[test]
fn voxelizer_agrees_with_point_sampling() {
    let dims = [30, 30, 30];
    for seed in 0..20u64 {
        let mesh = normalize_mesh(&blob(seed), dims).unwrap();
        let exact = voxelize(&mesh, dims).unwrap();
        let sampled = point_sampling_oracle(&mesh, dims, 1000, seed);
        let a = agreement(&exact, &sampled);
        assert!(a >= 0.995, "mesh {seed}: agreement {a}");
        // every sampled point lies on the surface, so the exact grid covers it
        let [d, h, w] = dims;
        for i in 0..d {
            for j in 0..h {
                for k in 0..w {
                    assert!(!sampled.get([i, j, k]) || exact.get([i, j, k]), "mesh {seed} voxel {:?}", [i, j, k]);
                }
            }
        }
    }
}

#[test]
fn symmetric_solids_survive_half_turns_unchanged() {
    let dims = [20, 20, 20];
    let oct = octahedron([1.0, 1.0, 1.0]);
    let plain = mesh_to_grid(&oct, dims, None).unwrap();
    for axis in 0..3 {
        let mut unit = [0.0; 3];
        unit[axis] = 1.0;
        for q in 1..4 {
            let rot = RotationSpec::new(unit, q as f64 * std::f64::consts::FRAC_PI_2).unwrap();
            assert_eq!(mesh_to_grid(&oct, dims, Some(&rot)).unwrap(), plain, "axis {axis} quarters {q}");
        }
    }
}

