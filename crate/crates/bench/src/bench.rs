// SPDX-License-Identifier: MIT OR Apache-2.0

//! Parameter sweeps with CSR summaries, and training-time scaling runs.

use std::time::Instant;

use mps_core::{center_data, DenseTensor, MpsModel, TuckerModel};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{iteration_rng, Dataset};
use crate::error::{usage, Result};
use crate::pipeline::{mean_std, run_pipeline, Method, PipelineConfig, RunReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub epsilon: f64,
    pub truncate: Option<Vec<usize>>,
    pub n_features: Vec<usize>,
    /// Over the random splits at this setting.
    pub csr_mean: f64,
    pub csr_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub runs: Vec<RunReport>,
    pub by_parameter: Vec<ParameterSummary>,
    /// Mean and std of the per-setting means.
    pub over_parameters_mean: f64,
    pub over_parameters_std: f64,
    /// Mean and std over every (setting, split) CSR value.
    pub pooled_mean: f64,
    pub pooled_std: f64,
}

/// Runs the pipeline for every `epsilon × truncate` combination.
pub fn run_grid(ds: &Dataset, base: &PipelineConfig, epsilons: &[f64], truncations: &[Option<Vec<usize>>]) -> Result<GridReport> {
    if epsilons.is_empty() {
        return usage("empty epsilon grid");
    }
    let truncations: Vec<Option<Vec<usize>>> = if truncations.is_empty() { vec![None] } else { truncations.to_vec() };
    let mut runs = Vec::new();
    for &eps in epsilons {
        for t in &truncations {
            let mut cfg = base.clone();
            cfg.epsilon = eps;
            cfg.truncate = t.clone();
            runs.push(run_pipeline(ds, &cfg)?);
        }
    }
    let by_parameter: Vec<ParameterSummary> = runs
        .iter()
        .map(|r| ParameterSummary {
            epsilon: r.epsilon,
            truncate: r.truncate.clone(),
            n_features: r.n_features.clone(),
            csr_mean: r.csr_mean,
            csr_std: r.csr_std,
        })
        .collect();
    let means: Vec<f64> = by_parameter.iter().map(|p| p.csr_mean).collect();
    let (over_parameters_mean, over_parameters_std) = mean_std(&means);
    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.csr.iter().copied()).collect();
    let (pooled_mean, pooled_std) = mean_std(&pooled);
    Ok(GridReport {
        runs,
        by_parameter,
        over_parameters_mean,
        over_parameters_std,
        pooled_mean,
        pooled_std,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub n_train: usize,
    pub n_features: usize,
    pub median_s: f64,
    pub runs_s: Vec<f64>,
}

/// Trains on the first `n_train` samples (after a seeded shuffle) and
/// returns the feature count. Includes centring for centred methods.
pub fn train_once(samples: &[DenseTensor], cfg: &PipelineConfig) -> Result<usize> {
    let owned;
    let samples = if cfg.method == Method::Ttpca {
        samples
    } else {
        owned = center_data(samples)?.0;
        &owned[..]
    };
    let x = DenseTensor::concat_samples(samples)?;
    Ok(match cfg.method {
        Method::Mps | Method::Ttpca => MpsModel::train(&x, &cfg.mps_config())?.feature_count(),
        Method::Hooi => {
            let mut m = TuckerModel::train(&x, &cfg.hooi_config())?;
            if let Some(t) = &cfg.truncate {
                m = m.truncate_core(t)?;
            }
            m.feature_count()
        }
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Serial wall-clock training time for each configuration and training
/// size, median over `repeats` runs.
pub fn timing_benchmark(ds: &Dataset, configs: &[PipelineConfig], sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<TimingRow>> {
    if repeats == 0 {
        return usage("at least one repeat is required");
    }
    if let Some(&k) = sizes.iter().find(|&&k| k == 0 || k > ds.len()) {
        return usage(format!("training size {} outside 1..={}", k, ds.len()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut iteration_rng(seed, 0));
    let mut rows = Vec::new();
    for cfg in configs {
        cfg.validate()?;
        for &k in sizes {
            let samples: Vec<DenseTensor> = order[..k].iter().map(|&i| ds.samples[i].clone()).collect();
            let mut runs_s = Vec::with_capacity(repeats);
            let mut n_features = 0;
            for _ in 0..repeats {
                let t = Instant::now();
                n_features = train_once(&samples, cfg)?;
                runs_s.push(t.elapsed().as_secs_f64());
            }
            rows.push(TimingRow {
                method: cfg.method,
                n_train: k,
                n_features,
                median_s: median(&runs_s),
                runs_s,
            });
        }
    }
    Ok(rows)
}
