use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use volres::ops::{conv3d_direct, conv3d_forward, softmax};
use volres::tensor::matmul;
use volres::train::mean_softmax;
use volres::Tensor;

#[derive(Debug, Clone)]
struct ConvCase {
    n: usize,
    c: usize,
    co: usize,
    dims: [usize; 3],
    kernel: usize,
    stride: usize,
    pad: usize,
    seed: u64,
}

fn conv_case() -> impl Strategy<Value = ConvCase> {
    (1usize..3, 1usize..4, 1usize..5, prop::array::uniform3(1usize..8), 1usize..4, 1usize..3, 0usize..3, any::<u64>())
        .prop_filter("kernel fits padded input", |(_, _, _, dims, k, _, p, _)| {
            dims.iter().all(|&d| d + 2 * p >= *k)
        })
        .prop_map(|(n, c, co, dims, kernel, stride, pad, seed)| ConvCase {
            n,
            c,
            co,
            dims,
            kernel,
            stride,
            pad,
            seed,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lowered_conv_is_bitwise_direct_conv(case in conv_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
        let [d, h, w] = case.dims;
        let k = case.kernel;
        let x = Tensor::<f64>::randn(&[case.n, case.c, d, h, w], 1.0, &mut rng);
        let weight = Tensor::randn(&[case.co, case.c, k, k, k], 1.0, &mut rng);
        let bias = Tensor::randn(&[case.co], 1.0, &mut rng);
        let fast = conv3d_forward(&x, &weight, &bias, case.stride, case.pad).unwrap();
        let slow = conv3d_direct(&x, &weight, &bias, case.stride, case.pad).unwrap();
        prop_assert!(fast.bitwise_eq(&slow));
    }

    #[test]
    fn conv_is_linear_in_the_input(case in conv_case(), alpha in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
        let [d, h, w] = case.dims;
        let k = case.kernel;
        let shape = [case.n, case.c, d, h, w];
        let a = Tensor::<f64>::randn(&shape, 1.0, &mut rng);
        let b = Tensor::randn(&shape, 1.0, &mut rng);
        let weight = Tensor::randn(&[case.co, case.c, k, k, k], 1.0, &mut rng);
        let zero = Tensor::zeros(&[case.co]);
        let conv = |x: &Tensor<f64>| conv3d_forward(x, &weight, &zero, case.stride, case.pad).unwrap();
        let combined = conv(&a.add(&b.scale(alpha)).unwrap());
        let separate = conv(&a).add(&conv(&b).scale(alpha)).unwrap();
        for (p, q) in combined.data().iter().zip(separate.data()) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn matmul_matches_triple_loop(m in 1usize..12, k in 1usize..12, n in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::<f64>::randn(&[m, k], 1.0, &mut rng);
        let b = Tensor::<f64>::randn(&[k, n], 1.0, &mut rng);
        let c = matmul(&a, &b).unwrap();
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|p| a.at(&[i, p]) * b.at(&[p, j])).sum();
                prop_assert!((c.at(&[i, j]) - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn mean_softmax_stays_on_the_simplex(members in 1usize..6, rows in 1usize..5, classes in 2usize..41, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs: Vec<Tensor<f64>> = (0..members)
            .map(|_| softmax(&Tensor::randn(&[rows, classes], 3.0, &mut rng)).unwrap())
            .collect();
        let mean = mean_softmax(&probs).unwrap();
        for r in 0..rows {
            let row: Vec<f64> = (0..classes).map(|c| mean.at(&[r, c])).collect();
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
        let copies = vec![probs[0].clone(); members];
        prop_assert!(mean_softmax(&copies).unwrap().bitwise_eq(&probs[0]));
    }
}

#[test]
fn two_member_mean_is_the_midpoint() {
    let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.5, 0.25, 0.25]).unwrap();
    let q = Tensor::from_vec(&[1, 3], vec![0.1, 0.6, 0.3]).unwrap();
    let m = mean_softmax(&[p, q]).unwrap();
    for (got, want) in m.data().iter().zip([0.3, 0.425, 0.275]) {
        assert!((got - want).abs() < 1e-15);
    }
}
