// SPDX-License-Identifier: MIT OR Apache-2.0

use mps_core::classify::{center_data, knn1_classify, lda_classify, lda_fit, Pca};
use mps_core::{
    mps_compress_test, tucker_compress_test, CompressionConfig, CorePosition, DenseTensor,
    FeatureMatrix, HooiConfig, Matrix, MpsModel, PermuteMode, PermutationPlan, TuckerModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.sample(StandardNormal)).unwrap()
}

fn multi_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut lin| {
            shape
                .iter()
                .map(|&d| {
                    let i = lin % d;
                    lin /= d;
                    i
                })
                .collect()
        })
        .collect()
}

/// Row vector `B[i_1]…B[i_{n-1}]` and column vector `C[i_{n+1}]…C[i_{N+1}]`
/// for a sample index given in permuted order (sample mode excluded).
fn chain_vectors(model: &MpsModel, pidx: &[usize]) -> (Matrix, Matrix) {
    let s = model.plan().sample_axis();
    let mut left = Matrix::from_element(1, 1, 1.0);
    for (j, &i) in pidx[..s].iter().enumerate() {
        left = left * model.left_slice(j, i);
    }
    let mut right = Matrix::from_element(1, 1, 1.0);
    for (t, &i) in pidx[s..].iter().enumerate().rev() {
        right = model.right_slice(t, i) * right;
    }
    (left, right)
}

/// Sample index in permuted order, from an index in original sample order.
fn permuted_sample_index(plan: &PermutationPlan, idx: &[usize]) -> Vec<usize> {
    plan.sample_mode_order().iter().map(|&m| idx[m]).collect()
}

fn full_contraction(model: &MpsModel, sample_shape: &[usize]) -> DenseTensor {
    let k = model.n_samples();
    let mut shape = sample_shape.to_vec();
    shape.push(k);
    let mut out = DenseTensor::zeros(shape).unwrap();
    for idx in multi_indices(sample_shape) {
        let (l, r) = chain_vectors(model, &permuted_sample_index(model.plan(), &idx));
        for (kk, g) in model.cores().iter().enumerate() {
            let v = (&l * g * &r)[(0, 0)];
            let mut full = idx.clone();
            full.push(kk);
            let o = out.offset(&full);
            out.data_mut()[o] = v;
        }
    }
    out
}

fn brute_projection(model: &MpsModel, y: &DenseTensor) -> Matrix {
    let (a, b) = model.core_shape();
    let mut q = Matrix::zeros(a, b);
    for idx in multi_indices(y.shape()) {
        let (l, r) = chain_vectors(model, &permuted_sample_index(model.plan(), &idx));
        q += l.transpose() * r.transpose() * y.get(&idx);
    }
    q
}

fn rel_err(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.axpy(-1.0, b).unwrap().frobenius_norm() / b.frobenius_norm()
}

#[test]
fn naive_contraction_matches_input_at_full_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for shape in [vec![3, 4, 5], vec![2, 6], vec![4, 1, 3, 2]] {
        let mut full = shape.clone();
        full.push(5);
        let x = gaussian(full, &mut rng);
        let model = MpsModel::train(&x, &CompressionConfig::new(1.0)).unwrap();
        let oracle = full_contraction(&model, &shape);
        assert!(rel_err(&oracle, &x) < 1e-10);
        assert!(rel_err(&model.reconstruct().unwrap(), &oracle) < 1e-12);
    }
}

#[test]
fn naive_contraction_matches_reconstruct_when_truncated() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = gaussian(vec![4, 5, 3, 6], &mut rng);
    for eps in [0.5, 0.8, 0.95] {
        let model = MpsModel::train(&x, &CompressionConfig::new(eps)).unwrap();
        let oracle = full_contraction(&model, &[4, 5, 3]);
        assert!(rel_err(&model.reconstruct().unwrap(), &oracle) < 1e-12);
    }
}

#[test]
fn projection_matches_brute_force_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = gaussian(vec![3, 4, 2, 7], &mut rng);
    for pos in 1..=4 {
        let mut cfg = CompressionConfig::new(0.8);
        cfg.core_position = CorePosition::Fixed(pos);
        cfg.permute = PermuteMode::None;
        let model = MpsModel::train(&x, &cfg).unwrap();
        let y = gaussian(vec![3, 4, 2], &mut rng);
        let q = mps_compress_test(&model, &y).unwrap();
        let oracle = brute_projection(&model, &y);
        assert!((&q - &oracle).norm() <= 1e-12 * (1.0 + oracle.norm()), "position {pos}");
    }
}

#[test]
fn rank_one_collection_gives_unit_bonds() {
    let a = [1.0, -2.0, 0.5];
    let b = [3.0, 1.0];
    let c = [0.2, 0.4, -0.1, 1.0];
    let w = [2.0, -1.0, 0.5, 4.0, -3.0];
    let x = DenseTensor::from_fn(vec![3, 2, 4, 5], |i| a[i[0]] * b[i[1]] * c[i[2]] * w[i[3]]).unwrap();
    let model = MpsModel::train(&x, &CompressionConfig::new(0.9)).unwrap();
    assert!(model.bond_dims().iter().all(|&d| d == 1));
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm(&a) * norm(&b) * norm(&c);
    for (g, wk) in model.cores().iter().zip(w) {
        assert_eq!(g.shape(), (1, 1));
        assert!((g[(0, 0)].abs() - wk.abs() * scale).abs() < 1e-10 * scale);
    }
    // one global sign for all samples
    let sign = model.cores()[0][(0, 0)].signum() * w[0].signum();
    assert!(model.cores().iter().zip(w).all(|(g, wk)| g[(0, 0)].signum() * wk.signum() == sign));
}

#[test]
fn hooi_recovers_exact_tucker_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let core = gaussian(vec![2, 2, 2, 4], &mut rng);
    let mut x = core;
    for mode in 0..3 {
        let a = Matrix::from_fn(5, 2, |_, _| rng.sample(StandardNormal));
        x = x.mode_product(&a, mode).unwrap();
    }
    let model = TuckerModel::train(&x, &HooiConfig::fixed(vec![2, 2, 2])).unwrap();
    let norm2 = x.frobenius_norm().powi(2);
    assert!(model.fit_residual() <= 1e-8 * norm2);
    assert!(rel_err(&model.reconstruct().unwrap(), &x) < 1e-6);
    for w in model.residual_history().windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * norm2);
    }
    let k1 = x.trailing_slice(1).unwrap();
    let q = tucker_compress_test(&model, &k1).unwrap();
    let g = &model.training_cores()[1];
    assert!(q.axpy(-1.0, g).unwrap().frobenius_norm() < 1e-10 * (1.0 + g.frobenius_norm()));
}

#[test]
fn knn_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    let train_rows = rows(40, &mut rng);
    let labels: Vec<u32> = (0..40).map(|_| rng.random_range(0..5)).collect();
    let test_rows = rows(25, &mut rng);
    let train = FeatureMatrix::from_rows(&train_rows, labels.clone()).unwrap();
    let test = FeatureMatrix::from_rows(&test_rows, vec![0; 25]).unwrap();
    let got = knn1_classify(&train, &test).unwrap();
    for (q, g) in test_rows.iter().zip(got) {
        let mut best = (f64::INFINITY, 0);
        for (i, r) in train_rows.iter().enumerate() {
            let d: f64 = q.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        assert_eq!(g, labels[best.1]);
    }
}

#[test]
fn lda_separates_distant_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let centres = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0]];
    let sample = |n: usize, rng: &mut ChaCha8Rng| {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, m) in centres.iter().enumerate() {
            for _ in 0..n {
                rows.push(m.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>());
                labels.push(c as u32);
            }
        }
        FeatureMatrix::from_rows(&rows, labels).unwrap()
    };
    let train = sample(30, &mut rng);
    let test = sample(20, &mut rng);
    let model = lda_fit(&train).unwrap();
    let pred = lda_classify(&model, &test).unwrap();
    let hits = pred.iter().zip(test.labels()).filter(|(a, b)| a == b).count();
    assert!(hits as f64 / 60.0 >= 0.95);
}

#[test]
fn lda_handles_more_features_than_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3u32 {
        for _ in 0..4 {
            let mut r: Vec<f64> = (0..50).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
            r[c as usize] += 5.0;
            rows.push(r);
            labels.push(c);
        }
    }
    let f = FeatureMatrix::from_rows(&rows, labels.clone()).unwrap();
    let model = lda_fit(&f).unwrap();
    assert_eq!(lda_classify(&model, &f).unwrap(), labels);
}

#[test]
fn pca_on_a_line_keeps_the_line_direction() {
    let origin = [1.0, -1.0, 3.0, 0.5, 2.0];
    let step = [2.0, 1.0, -2.0, 0.0, 4.0];
    let rows: Vec<Vec<f64>> = (0..9)
        .map(|i| {
            let t = i as f64 - 4.0;
            origin.iter().zip(step).map(|(o, d)| o + d * t).collect()
        })
        .collect();
    let f = FeatureMatrix::from_rows(&rows, vec![0; 9]).unwrap();
    let pca = Pca::fit(&f, 1).unwrap();
    let axis = pca.axes().column(0);
    let dir = nalgebra::DVector::from_vec(step.to_vec()) / 5.0;
    assert!((axis.dot(&dir).abs() - 1.0).abs() < 1e-12);
    let back = pca.inverse_transform(&pca.transform(&f).unwrap());
    assert!((back - f.data()).norm() < 1e-10);
}

#[test]
fn full_pca_preserves_pairwise_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let f = FeatureMatrix::from_rows(&rows, vec![0; 10]).unwrap();
    let out = Pca::fit(&f, 4).unwrap().transform(&f).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            let d0 = (f.data().row(i) - f.data().row(j)).norm();
            let d1 = (out.data().row(i) - out.data().row(j)).norm();
            assert!((d0 - d1).abs() < 1e-10);
        }
    }
}

#[test]
fn centred_samples_sum_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let samples: Vec<DenseTensor> = (0..7).map(|_| gaussian(vec![3, 4, 2], &mut rng)).collect();
    let (centred, mean) = center_data(&samples).unwrap();
    let mut sum = DenseTensor::zeros(vec![3, 4, 2]).unwrap();
    for c in &centred {
        sum = sum.axpy(1.0, c).unwrap();
    }
    let scale: f64 = samples.iter().map(|t| t.frobenius_norm()).sum();
    assert!(sum.frobenius_norm() <= 1e-10 * scale);
    for (c, t) in centred.iter().zip(&samples) {
        assert!(c.axpy(1.0, &mean).unwrap().axpy(-1.0, t).unwrap().frobenius_norm() < 1e-12);
    }
}

#[test]
fn pca_variance_grows_with_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let f = FeatureMatrix::from_rows(&rows, vec![0; 12]).unwrap();
    let mut prev = 0.0;
    for p in 1..=5 {
        let total: f64 = Pca::fit(&f, p).unwrap().explained_variance().iter().sum();
        assert!(total >= prev);
        prev = total;
    }
}
