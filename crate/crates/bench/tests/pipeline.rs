// SPDX-License-Identifier: MIT OR Apache-2.0

use mps_bench::bench::{run_grid, timing_benchmark};
use mps_bench::{run_pipeline, synth_dataset, Classifier, Method, PipelineConfig};

#[test]
fn reports_are_deterministic_apart_from_timing() {
    let ds = synth_dataset(3, 8, &[4, 4, 2], 0.2, 5).unwrap();
    let mut cfg = PipelineConfig::new(Method::Mps, 0.8);
    cfg.iterations = 3;
    cfg.seed = 11;
    let a = run_pipeline(&ds, &cfg).unwrap();
    let b = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(a.to_json_without_timing().unwrap(), b.to_json_without_timing().unwrap());
    cfg.parallel = true;
    let c = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(a.to_json_without_timing().unwrap(), c.to_json_without_timing().unwrap());
}

#[test]
fn report_statistics_are_consistent() {
    let ds = synth_dataset(3, 8, &[4, 4, 2], 0.5, 6).unwrap();
    let mut cfg = PipelineConfig::new(Method::Hooi, 0.8);
    cfg.iterations = 4;
    let r = run_pipeline(&ds, &cfg).unwrap();
    let (m, s) = mps_bench::pipeline::mean_std(&r.csr);
    assert_eq!((r.csr_mean, r.csr_std), (m, s));
    assert_eq!(r.csr.len(), 4);
    for it in &r.iterations {
        match &it.model {
            mps_bench::pipeline::ModelSummary::Hooi { ranks, .. } => {
                assert_eq!(it.n_features, ranks.iter().product::<usize>())
            }
            other => panic!("unexpected model {other:?}"),
        }
    }
}

#[test]
fn lossless_mps_and_hooi_agree_on_noiseless_data() {
    let ds = synth_dataset(3, 6, &[3, 4, 2], 0.0, 8).unwrap();
    let mut mps = PipelineConfig::new(Method::Mps, 1.0);
    mps.iterations = 3;
    mps.seed = 2;
    let mut hooi = mps.clone();
    hooi.method = Method::Hooi;
    hooi.ranks = Some(vec![3, 4, 2]);
    let a = run_pipeline(&ds, &mps).unwrap();
    let b = run_pipeline(&ds, &hooi).unwrap();
    assert_eq!(a.csr, b.csr);
}

#[test]
fn truncation_sets_feature_count() {
    let ds = synth_dataset(3, 10, &[6, 6, 3], 0.1, 3).unwrap();
    let mut cfg = PipelineConfig::new(Method::Mps, 0.95);
    cfg.iterations = 2;
    cfg.truncate = Some(vec![2, 3]);
    let r = run_pipeline(&ds, &cfg).unwrap();
    assert!(r.n_features.iter().all(|&n| n == 6));
    let mut cfg = PipelineConfig::new(Method::Ttpca, 0.9);
    cfg.iterations = 2;
    cfg.classifier = Classifier::Lda;
    cfg.pca = Some(5);
    assert!(run_pipeline(&ds, &cfg).unwrap().csr_mean > 0.5);
}

#[test]
fn grid_reports_both_groupings() {
    let ds = synth_dataset(2, 6, &[3, 3], 0.3, 4).unwrap();
    let mut cfg = PipelineConfig::new(Method::Mps, 0.9);
    cfg.iterations = 2;
    let g = run_grid(&ds, &cfg, &[0.6, 0.9], &[]).unwrap();
    assert_eq!(g.runs.len(), 2);
    assert_eq!(g.by_parameter.len(), 2);
    let pooled: Vec<f64> = g.runs.iter().flat_map(|r| r.csr.clone()).collect();
    assert_eq!((g.pooled_mean, g.pooled_std), mps_bench::pipeline::mean_std(&pooled));
}

#[test]
fn timing_rows_cover_each_size() {
    let ds = synth_dataset(2, 20, &[4, 4], 0.1, 4).unwrap();
    let cfg = PipelineConfig::new(Method::Mps, 0.9);
    let rows = timing_benchmark(&ds, &[cfg], &[10, 20, 40], 2, 0).unwrap();
    assert_eq!(rows.iter().map(|r| r.n_train).collect::<Vec<_>>(), vec![10, 20, 40]);
    assert!(rows.iter().all(|r| r.runs_s.len() == 2 && r.median_s >= 0.0));
    assert!(timing_benchmark(&ds, &[PipelineConfig::new(Method::Mps, 0.9)], &[41], 1, 0).is_err());
}
