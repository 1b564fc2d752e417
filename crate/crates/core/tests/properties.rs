// SPDX-License-Identifier: MIT OR Apache-2.0

use mps_core::linalg::{threshold_rank, ThresholdMode};
use mps_core::{
    mps_compress_test, CompressionConfig, CorePosition, DenseTensor, HooiConfig, MpsModel,
    PermuteMode, TuckerModel,
};
use proptest::prelude::*;

fn tensor_strategy(max_order: usize, max_extent: usize, max_k: usize) -> impl Strategy<Value = DenseTensor> {
    (prop::collection::vec(1..=max_extent, 2..=max_order), 1..=max_k).prop_flat_map(|(mut shape, k)| {
        shape.push(k);
        let n: usize = shape.iter().product();
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |data| DenseTensor::new(shape.clone(), data).unwrap())
    })
}

fn has_signal(x: &DenseTensor) -> bool {
    x.frobenius_norm() > 1e-3
}

fn prefix_product(dims: &[usize], upto: usize) -> usize {
    dims[..upto].iter().product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matricize_refold_round_trip(x in tensor_strategy(4, 4, 3), mode in 0usize..5) {
        let mode = mode % x.order();
        let m = x.matricize(mode).unwrap();
        prop_assert_eq!(m.nrows(), x.shape()[mode]);
        let back = DenseTensor::refold(&m, mode, x.shape()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn frobenius_invariant_under_matricization(x in tensor_strategy(4, 4, 3)) {
        for mode in 0..x.order() {
            let m = x.matricize(mode).unwrap();
            prop_assert!((m.norm() - x.frobenius_norm()).abs() <= 1e-12 * (1.0 + x.frobenius_norm()));
        }
    }

    #[test]
    fn canonical_factors_are_orthonormal(x in tensor_strategy(4, 4, 4), eps in 0.3f64..=1.0) {
        prop_assume!(has_signal(&x));
        let model = MpsModel::train(&x, &CompressionConfig::new(eps)).unwrap();
        for d in model.left_canonical_defects().into_iter().chain(model.right_canonical_defects()) {
            prop_assert!(d <= 1e-10, "defect {}", d);
        }
    }

    #[test]
    fn bond_dims_respect_bounds(x in tensor_strategy(4, 4, 4), eps in 0.3f64..=1.0) {
        prop_assume!(has_signal(&x));
        let model = MpsModel::train(&x, &CompressionConfig::new(eps)).unwrap();
        let dims = model.permuted_dims();
        let bonds = model.bond_dims();
        prop_assert_eq!(bonds.len(), dims.len() + 1);
        prop_assert_eq!(bonds[0], 1);
        prop_assert_eq!(bonds[dims.len()], 1);
        let total: usize = dims.iter().product();
        for j in 1..dims.len() {
            let left = prefix_product(dims, j);
            prop_assert!(bonds[j] >= 1);
            prop_assert!(bonds[j] <= left.min(total / left));
            // each sweep grows a bond by at most the extent it absorbs
            if j <= model.plan().sample_axis() {
                prop_assert!(bonds[j] <= bonds[j - 1] * dims[j - 1]);
            } else {
                prop_assert!(bonds[j] <= bonds[j + 1] * dims[j]);
            }
        }
    }

    #[test]
    fn full_fidelity_reconstructs(x in tensor_strategy(4, 4, 4)) {
        prop_assume!(has_signal(&x));
        let model = MpsModel::train(&x, &CompressionConfig::new(1.0)).unwrap();
        let err = model.reconstruct().unwrap().axpy(-1.0, &x).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * x.frobenius_norm());
        for (k, g) in model.cores().iter().enumerate() {
            let xk = x.trailing_slice(k).unwrap().frobenius_norm();
            prop_assert!((g.norm() - xk).abs() <= 1e-10 * (1.0 + xk));
        }
    }

    #[test]
    fn training_samples_project_onto_their_cores(x in tensor_strategy(4, 4, 4), eps in 0.3f64..=1.0) {
        prop_assume!(has_signal(&x));
        let model = MpsModel::train(&x, &CompressionConfig::new(eps)).unwrap();
        for (k, g) in model.cores().iter().enumerate() {
            let q = mps_compress_test(&model, &x.trailing_slice(k).unwrap()).unwrap();
            prop_assert!((&q - g).norm() <= 1e-8 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn projection_is_linear_and_contractive(
        x in tensor_strategy(3, 4, 4),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(has_signal(&x));
        let model = MpsModel::train(&x, &CompressionConfig::new(0.8)).unwrap();
        let shape = model.sample_shape();
        let mut state = seed | 1;
        let mut noise = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let y1 = DenseTensor::from_fn(shape.clone(), |_| noise()).unwrap();
        let y2 = DenseTensor::from_fn(shape, |_| noise()).unwrap();
        let mut a = y1.clone();
        a.scale(alpha);
        let comb = a.axpy(beta, &y2).unwrap();
        let q = model.compress(&comb).unwrap();
        let q1 = model.compress(&y1).unwrap();
        let q2 = model.compress(&y2).unwrap();
        let expect = &q1 * alpha + &q2 * beta;
        prop_assert!((&q - &expect).norm() <= 1e-10 * (1.0 + expect.norm()));
        prop_assert!(q1.norm() <= y1.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn bond_dims_monotone_in_epsilon(x in tensor_strategy(4, 4, 4), e1 in 0.2f64..=1.0, e2 in 0.2f64..=1.0) {
        prop_assume!(has_signal(&x));
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let mut cfg_lo = CompressionConfig::new(lo);
        let mut cfg_hi = CompressionConfig::new(hi);
        // fix the layout so both runs sweep the same chain
        let plan = mps_core::plan_permutation(&x.shape()[..x.order() - 1], x.shape()[x.order() - 1]);
        cfg_lo.permute = PermuteMode::Explicit(plan.clone());
        cfg_hi.permute = PermuteMode::Explicit(plan);
        let a = MpsModel::train(&x, &cfg_lo).unwrap();
        let b = MpsModel::train(&x, &cfg_hi).unwrap();
        prop_assert_eq!(a.plan(), b.plan());
        let ea = a.reconstruct().unwrap().axpy(-1.0, &x).unwrap().frobenius_norm();
        let eb = b.reconstruct().unwrap().axpy(-1.0, &x).unwrap().frobenius_norm();
        prop_assert!(eb <= ea + 1e-10 * x.frobenius_norm());
        let feats = |m: &MpsModel| { let (p, q) = m.core_shape(); p * q };
        prop_assert!(feats(&a) <= feats(&b));
    }

    #[test]
    fn threshold_rank_is_minimal(mut s in prop::collection::vec(0.0f64..10.0, 1..12), eps in 0.01f64..=1.0) {
        s.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(s[0] > 0.0);
        let d = threshold_rank(&s, eps, ThresholdMode::Mass);
        let total: f64 = s.iter().sum();
        let kept: f64 = s[..d].iter().sum();
        prop_assert!(d >= 1 && d <= s.len());
        prop_assert!(kept / total >= eps - 1e-12);
        if d > 1 {
            let less: f64 = s[..d - 1].iter().sum();
            prop_assert!(less / total < eps);
        }
    }

    #[test]
    fn every_core_position_round_trips(x in tensor_strategy(3, 3, 3), pos in 1usize..=4) {
        prop_assume!(has_signal(&x));
        let n = x.order() - 1;
        let mut cfg = CompressionConfig::new(1.0);
        cfg.core_position = CorePosition::Fixed(1 + (pos - 1) % (n + 1));
        let model = MpsModel::train(&x, &cfg).unwrap();
        let err = model.reconstruct().unwrap().axpy(-1.0, &x).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * x.frobenius_norm());
    }

    #[test]
    fn serialization_preserves_model(x in tensor_strategy(3, 4, 3), eps in 0.3f64..=1.0) {
        prop_assume!(has_signal(&x));
        let model = MpsModel::train(&x, &CompressionConfig::new(eps)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = MpsModel::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.bond_dims(), model.bond_dims());
        prop_assert_eq!(back.cores(), model.cores());
        prop_assert_eq!(back.plan(), model.plan());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hooi_residual_nonincreasing(x in tensor_strategy(3, 5, 4), r in 1usize..=3) {
        prop_assume!(has_signal(&x));
        let n = x.order() - 1;
        let ranks: Vec<usize> = x.shape()[..n].iter().map(|&d| d.min(r)).collect();
        let model = TuckerModel::train(&x, &HooiConfig::fixed(ranks)).unwrap();
        let norm2 = x.frobenius_norm().powi(2);
        for w in model.residual_history().windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * norm2);
        }
        for f in model.factors() {
            let gram = f.transpose() * f;
            let eye = mps_core::Matrix::identity(f.ncols(), f.ncols());
            prop_assert!((gram - eye).norm() <= 1e-10);
        }
        for b in model.mode_bounds() {
            prop_assert!(b.discarded_minus_one <= model.fit_residual() + 1e-9 * norm2);
        }
    }
}

fn labelled_rows(n: usize, f: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u32>)> {
    (
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, f), n),
        prop::collection::vec(0u32..3, n),
    )
}

fn random_orthogonal(n: usize, seed: u64) -> mps_core::Matrix {
    let mut state = seed | 1;
    let m = mps_core::Matrix::from_fn(n, n, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_invariant_under_orthogonal_maps((train, labels) in labelled_rows(12, 4), (test, _) in labelled_rows(6, 4), seed in any::<u64>()) {
        use mps_core::classify::knn1_classify;
        let q = random_orthogonal(4, seed);
        let tr = mps_core::FeatureMatrix::from_rows(&train, labels.clone()).unwrap();
        let te = mps_core::FeatureMatrix::from_rows(&test, vec![0; 6]).unwrap();
        let tr_q = mps_core::FeatureMatrix::new(tr.data() * &q, labels).unwrap();
        let te_q = mps_core::FeatureMatrix::new(te.data() * &q, vec![0; 6]).unwrap();
        // exact distance ties can be broken differently after rounding
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let unambiguous = test.iter().all(|t| {
            let mut ds: Vec<f64> = train.iter().map(|r| d(t, r)).collect();
            ds.sort_by(f64::total_cmp);
            ds[1] - ds[0] > 1e-9 * (1.0 + ds[0])
        });
        prop_assume!(unambiguous);
        prop_assert_eq!(knn1_classify(&tr, &te).unwrap(), knn1_classify(&tr_q, &te_q).unwrap());
    }

    #[test]
    fn lda_invariant_under_scaling((train, _) in labelled_rows(15, 3), (test, _) in labelled_rows(5, 3), scale in prop_oneof![0.01f64..0.5, 2.0f64..100.0]) {
        use mps_core::classify::{lda_classify, lda_fit};
        let labels: Vec<u32> = (0..15).map(|i| (i % 3) as u32).collect();
        let tr = mps_core::FeatureMatrix::from_rows(&train, labels.clone()).unwrap();
        let te = mps_core::FeatureMatrix::from_rows(&test, vec![0; 5]).unwrap();
        let tr_s = mps_core::FeatureMatrix::new(tr.data() * scale, labels).unwrap();
        let te_s = mps_core::FeatureMatrix::new(te.data() * scale, vec![0; 5]).unwrap();
        let a = lda_fit(&tr).unwrap();
        let b = lda_fit(&tr_s).unwrap();
        // skip near-ties between class distances
        let proj = te.data() * a.projection();
        let separated = proj.row_iter().all(|p| {
            let mut ds: Vec<f64> = a.class_means().row_iter().map(|m| (p - m).norm_squared()).collect();
            ds.sort_by(f64::total_cmp);
            ds[1] - ds[0] > 1e-6 * (1.0 + ds[0])
        });
        prop_assume!(separated);
        prop_assert_eq!(lda_classify(&a, &te).unwrap(), lda_classify(&b, &te_s).unwrap());
    }

    #[test]
    fn csr_of_identical_labels_is_one(labels in prop::collection::vec(any::<u32>(), 1..50)) {
        prop_assert_eq!(mps_core::csr(&labels, &labels).unwrap(), 1.0);
    }
}
