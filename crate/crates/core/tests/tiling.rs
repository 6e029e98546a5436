use eqvit::group::GroupSpec;
use eqvit::layers::{eq_linear, tiled_matrix};
use eqvit::tensor::{NdArray, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct sum `out[n, (co, B)] = Σ_{ci, g} z[n, (ci, g)] · W_{B⁻¹∘g}[ci, co] + b[co]`.
fn oracle(z: &[Vec<f64>], blocks: &[Vec<Vec<f64>>], bias: &[f64], spec: &GroupSpec) -> Vec<Vec<f64>> {
    let t = spec.order();
    let (c_in, c_out) = (blocks[0].len(), blocks[0][0].len());
    z.iter()
        .map(|row| {
            let mut out = vec![0.0; c_out * t];
            for co in 0..c_out {
                for bi in 0..t {
                    let b_inv = spec.inverse(spec.element(bi));
                    let mut acc = bias[co];
                    for ci in 0..c_in {
                        for gi in 0..t {
                            let w = &blocks[spec.index_of(spec.compose(b_inv, spec.element(gi)))];
                            acc += row[ci * t + gi] * w[ci][co];
                        }
                    }
                    out[co * t + bi] = acc;
                }
            }
            out
        })
        .collect()
}

fn array(rows: &[Vec<f64>]) -> NdArray<f64> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    NdArray::new(vec![rows.len(), rows[0].len()], flat).unwrap()
}

#[test]
fn fifty_random_configurations_match_the_direct_sum() {
    let groups = [(1, false), (1, true), (2, false), (2, true), (4, false), (4, true)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let (t, refl) = groups[case % groups.len()];
        let spec = GroupSpec::new(t, refl).unwrap();
        let order = spec.order();
        let (c_in, c_out, n) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..7));
        let mut r = || rng.random_range(-1.0..1.0);
        let blocks: Vec<Vec<Vec<f64>>> =
            (0..order).map(|_| (0..c_in).map(|_| (0..c_out).map(|_| r()).collect()).collect()).collect();
        let z: Vec<Vec<f64>> = (0..n).map(|_| (0..c_in * order).map(|_| r()).collect()).collect();
        let bias: Vec<f64> = (0..c_out).map(|_| r()).collect();
        let want = array(&oracle(&z, &blocks, &bias, &spec));

        let block_arrays: Vec<NdArray<f64>> = blocks.iter().map(|b| array(b)).collect();
        let tensors: Vec<Tensor<f64>> = block_arrays.iter().cloned().map(Tensor::constant).collect();
        let b = Tensor::constant(NdArray::new(vec![c_out], bias.clone()).unwrap());
        let got = eq_linear(&Tensor::constant(array(&z)), &tensors, Some(&b), &spec).unwrap();
        worst = worst.max(got.value().max_abs_diff(&want).unwrap());

        let zero_bias = oracle(&z, &blocks, &vec![0.0; c_out], &spec);
        let tiled = array(&z).matmul(&tiled_matrix(&block_arrays, &spec).unwrap()).unwrap();
        worst = worst.max(tiled.max_abs_diff(&array(&zero_bias)).unwrap());
    }
    assert!(worst <= 1e-12, "worst gap {worst:e}");
}
