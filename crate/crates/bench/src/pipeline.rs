// SPDX-License-Identifier: MIT OR Apache-2.0

//! Split, compress, project and classify, repeated over seeded iterations.

use std::time::Instant;

use mps_core::classify::{self, FeatureMatrix, Pca};
use mps_core::linalg::ThresholdMode;
use mps_core::{
    center_data, CompressionConfig, CorePosition, DenseTensor, HooiConfig, MpsModel, PermuteMode,
    TuckerModel,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{holdout_split, iteration_rng, Dataset};
use crate::error::{usage, BenchError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Centre, then MPS.
    Mps,
    /// MPS on raw data, then PCA on the vectorised cores.
    Ttpca,
    /// Centre, then Tucker via HOOI.
    Hooi,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mps" => Ok(Method::Mps),
            "ttpca" => Ok(Method::Ttpca),
            "hooi" => Ok(Method::Hooi),
            _ => Err(format!("unknown method {s:?} (mps, ttpca, hooi)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    Knn1,
    Lda,
}

impl std::str::FromStr for Classifier {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "knn1" => Ok(Classifier::Knn1),
            "lda" => Ok(Classifier::Lda),
            _ => Err(format!("unknown classifier {s:?} (knn1, lda)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub method: Method,
    pub epsilon: f64,
    /// Fixed Tucker ranks; `None` derives them from `epsilon`.
    pub ranks: Option<Vec<usize>>,
    pub core_position: CorePosition,
    pub permute: PermuteMode,
    pub threshold_mode: ThresholdMode,
    /// `(a, b)` for MPS cores, one entry per mode for Tucker cores.
    pub truncate: Option<Vec<usize>>,
    pub classifier: Classifier,
    /// PCA components; TTPCA defaults to `min(train samples, N_f)`.
    pub pca: Option<usize>,
    pub holdout: f64,
    pub iterations: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl PipelineConfig {
    pub fn new(method: Method, epsilon: f64) -> Self {
        Self {
            method,
            epsilon,
            ranks: None,
            core_position: CorePosition::Auto,
            permute: PermuteMode::Auto,
            threshold_mode: ThresholdMode::Mass,
            truncate: None,
            classifier: Classifier::Knn1,
            pca: None,
            holdout: 0.5,
            iterations: 10,
            seed: 0,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return usage(format!("epsilon {} outside (0, 1]", self.epsilon));
        }
        if self.iterations == 0 {
            return usage("at least one iteration is required");
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return usage(format!("holdout ratio {} outside (0, 1)", self.holdout));
        }
        if self.method != Method::Hooi && self.ranks.is_some() {
            return usage("--ranks applies to hooi only");
        }
        if let Some(t) = &self.truncate {
            if self.method != Method::Hooi && t.len() != 2 {
                return usage("MPS truncation takes two dimensions");
            }
            if t.contains(&0) {
                return usage("truncation dimensions must be at least 1");
            }
        }
        if self.pca == Some(0) {
            return usage("--pca needs at least one component");
        }
        Ok(())
    }

    pub fn mps_config(&self) -> CompressionConfig {
        CompressionConfig {
            epsilon: self.epsilon,
            core_position: self.core_position,
            permute: self.permute.clone(),
            threshold_mode: self.threshold_mode,
            further_truncation: self.truncate.as_ref().map(|t| (t[0], t[1])),
        }
    }

    pub fn hooi_config(&self) -> HooiConfig {
        let mut cfg = match &self.ranks {
            Some(r) => HooiConfig::fixed(r.clone()),
            None => HooiConfig::threshold(self.epsilon),
        };
        cfg.threshold_mode = self.threshold_mode;
        cfg
    }
}

/// Shape information of one trained compression model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSummary {
    Mps {
        perm: Vec<usize>,
        core_position: usize,
        bond_dims: Vec<usize>,
        core_shape: (usize, usize),
    },
    Hooi {
        ranks: Vec<usize>,
        fit_residual: f64,
        iterations_run: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub csr: f64,
    pub model: ModelSummary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    /// Centring and compression of the training set.
    pub train_s: f64,
    /// Projection of the test samples.
    pub project_s: f64,
    /// Feature post-processing, classifier fit and prediction.
    pub classify_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub parallel: bool,
    pub per_iteration: Vec<PhaseTimes>,
    pub mean: PhaseTimes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset: String,
    pub method: Method,
    pub epsilon: f64,
    pub ranks: Option<Vec<usize>>,
    pub threshold: String,
    pub core_position: String,
    pub permute: String,
    pub truncate: Option<Vec<usize>>,
    pub classifier: Classifier,
    pub pca: Option<usize>,
    pub holdout: f64,
    pub seed: u64,
    pub rng: String,
    pub n_features: Vec<usize>,
    pub csr: Vec<f64>,
    pub csr_mean: f64,
    pub csr_std: f64,
    pub iterations: Vec<IterationReport>,
    /// Wall-clock fields; the only part of a report that varies between
    /// runs with the same inputs.
    pub timing: Option<TimingReport>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the `timing` block removed.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut r = self.clone();
        r.timing = None;
        r.to_json()
    }

    pub fn csv_header() -> &'static [&'static str] {
        &[
            "dataset", "method", "epsilon", "ranks", "truncate", "classifier", "pca", "holdout",
            "iterations", "seed", "n_features", "csr_mean", "csr_std", "train_s", "project_s",
            "classify_s",
        ]
    }

    pub fn csv_row(&self) -> Vec<String> {
        let list = |v: &Option<Vec<usize>>| {
            v.as_ref()
                .map(|v| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x"))
                .unwrap_or_default()
        };
        let lo = self.n_features.iter().min().copied().unwrap_or(0);
        let hi = self.n_features.iter().max().copied().unwrap_or(0);
        let nf = if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") };
        let t = self.timing.as_ref().map(|t| t.mean).unwrap_or_default();
        vec![
            self.dataset.clone(),
            serde_json::to_value(self.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            self.epsilon.to_string(),
            list(&self.ranks),
            list(&self.truncate),
            serde_json::to_value(self.classifier).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            self.pca.map(|p| p.to_string()).unwrap_or_default(),
            self.holdout.to_string(),
            self.csr.len().to_string(),
            self.seed.to_string(),
            nf,
            format!("{:.6}", self.csr_mean),
            format!("{:.6}", self.csr_std),
            format!("{:.6}", t.train_s),
            format!("{:.6}", t.project_s),
            format!("{:.6}", t.classify_s),
        ]
    }
}

/// Mean and sample standard deviation (`n − 1`; zero for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Training and test features from one fitted compression model.
pub struct Compressed {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub model: ModelSummary,
    pub n_features: usize,
}

enum Fitted {
    Mps(MpsModel),
    Hooi(TuckerModel),
}

/// Trains the configured compression on `train` and projects `test`.
/// Returns the features plus the train and projection times.
pub fn compress_split(train: &Dataset, test: &Dataset, cfg: &PipelineConfig) -> Result<(Compressed, f64, f64)> {
    let t0 = Instant::now();
    let centre = cfg.method != Method::Ttpca;
    let (train_samples, mean) = if centre {
        let (c, m) = center_data(&train.samples)?;
        (c, Some(m))
    } else {
        (train.samples.clone(), None)
    };
    let x = DenseTensor::concat_samples(&train_samples)?;
    let fitted = match cfg.method {
        Method::Mps | Method::Ttpca => Fitted::Mps(MpsModel::train(&x, &cfg.mps_config())?),
        Method::Hooi => {
            let mut m = TuckerModel::train(&x, &cfg.hooi_config())?;
            if let Some(t) = &cfg.truncate {
                m = m.truncate_core(t)?;
            }
            Fitted::Hooi(m)
        }
    };
    let train_features = match &fitted {
        Fitted::Mps(m) => classify::vectorize_cores(m.cores(), train.labels.clone())?,
        Fitted::Hooi(m) => classify::vectorize_tensors(&m.training_cores(), train.labels.clone())?,
    };
    let train_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let test_samples: Vec<DenseTensor> = match &mean {
        Some(m) => test.samples.iter().map(|s| s.axpy(-1.0, m)).collect::<mps_core::Result<_>>()?,
        None => test.samples.clone(),
    };
    let (test_features, model, n_features) = match &fitted {
        Fitted::Mps(m) => {
            let q = m.compress_batch(&test_samples)?;
            let summary = ModelSummary::Mps {
                perm: m.plan().perm().to_vec(),
                core_position: m.core_position(),
                bond_dims: m.bond_dims().to_vec(),
                core_shape: m.core_shape(),
            };
            (classify::vectorize_cores(&q, test.labels.clone())?, summary, m.feature_count())
        }
        Fitted::Hooi(m) => {
            let q = test_samples.iter().map(|s| m.compress(s)).collect::<mps_core::Result<Vec<_>>>()?;
            let summary = ModelSummary::Hooi {
                ranks: m.ranks(),
                fit_residual: m.fit_residual(),
                iterations_run: m.iterations_run(),
            };
            (classify::vectorize_tensors(&q, test.labels.clone())?, summary, m.feature_count())
        }
    };
    let project_s = t1.elapsed().as_secs_f64();
    Ok((
        Compressed {
            train: train_features,
            test: test_features,
            model,
            n_features,
        },
        train_s,
        project_s,
    ))
}

/// Optional PCA, then the classifier. Returns predicted labels.
pub fn classify_features(train: &FeatureMatrix, test: &FeatureMatrix, cfg: &PipelineConfig) -> Result<Vec<u32>> {
    let p = match (cfg.pca, cfg.method) {
        (Some(p), _) => Some(p),
        (None, Method::Ttpca) => Some(train.n_samples().min(train.n_features())),
        (None, _) => None,
    };
    let (train, test) = match p {
        Some(p) => {
            let pca = Pca::fit(train, p)?;
            (pca.transform(train)?, pca.transform(test)?)
        }
        None => (train.clone(), test.clone()),
    };
    Ok(match cfg.classifier {
        Classifier::Knn1 => classify::knn1_classify(&train, &test)?,
        Classifier::Lda => {
            let model = classify::lda_fit(&train)?;
            classify::lda_classify(&model, &test)?
        }
    })
}

fn run_iteration(ds: &Dataset, cfg: &PipelineConfig, iteration: usize) -> Result<(IterationReport, PhaseTimes)> {
    let mut rng = iteration_rng(cfg.seed, iteration);
    let split = holdout_split(ds, cfg.holdout, &mut rng)?;
    let train = ds.subset(&split.train, "train")?;
    let test = ds.subset(&split.test, "test")?;
    let (c, train_s, project_s) = compress_split(&train, &test, cfg)?;
    let t2 = Instant::now();
    let pred = classify_features(&c.train, &c.test, cfg)?;
    let csr = classify::csr(&pred, &test.labels)?;
    let classify_s = t2.elapsed().as_secs_f64();
    Ok((
        IterationReport {
            iteration,
            n_train: train.len(),
            n_test: test.len(),
            n_features: c.n_features,
            csr,
            model: c.model,
        },
        PhaseTimes {
            train_s,
            project_s,
            classify_s,
        },
    ))
}

pub fn run_pipeline(ds: &Dataset, cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let wrap = |i: usize| {
        move |e: BenchError| BenchError::Iteration {
            iteration: i,
            source: Box::new(e),
        }
    };
    let results: Vec<(IterationReport, PhaseTimes)> = if cfg.parallel {
        (0..cfg.iterations)
            .into_par_iter()
            .map(|i| run_iteration(ds, cfg, i).map_err(wrap(i)))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.iterations)
            .map(|i| run_iteration(ds, cfg, i).map_err(wrap(i)))
            .collect::<Result<_>>()?
    };
    let (iterations, times): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let csr: Vec<f64> = iterations.iter().map(|r| r.csr).collect();
    let (csr_mean, csr_std) = mean_std(&csr);
    let avg = |f: fn(&PhaseTimes) -> f64| times.iter().map(f).sum::<f64>() / times.len() as f64;
    let mean = PhaseTimes {
        train_s: avg(|t| t.train_s),
        project_s: avg(|t| t.project_s),
        classify_s: avg(|t| t.classify_s),
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        dataset: ds.name.clone(),
        method: cfg.method,
        epsilon: cfg.epsilon,
        ranks: cfg.ranks.clone(),
        threshold: match cfg.threshold_mode {
            ThresholdMode::Mass => "mass".into(),
            ThresholdMode::Energy => "energy".into(),
        },
        core_position: match cfg.core_position {
            CorePosition::Auto => "auto".into(),
            CorePosition::Fixed(n) => n.to_string(),
        },
        permute: match &cfg.permute {
            PermuteMode::Auto => "auto".into(),
            PermuteMode::None => "none".into(),
            PermuteMode::Explicit(p) => p.perm().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
        },
        truncate: cfg.truncate.clone(),
        classifier: cfg.classifier,
        pca: cfg.pca,
        holdout: cfg.holdout,
        seed: cfg.seed,
        rng: "chacha8; key from seed, stream = iteration".into(),
        n_features: iterations.iter().map(|r| r.n_features).collect(),
        csr,
        csr_mean,
        csr_std,
        iterations,
        timing: Some(TimingReport {
            parallel: cfg.parallel,
            per_iteration: times,
            mean,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::new(Method::Mps, 0.9);
        assert!(cfg.validate().is_ok());
        cfg.truncate = Some(vec![2, 2, 2]);
        assert!(cfg.validate().is_err());
        cfg.truncate = None;
        cfg.ranks = Some(vec![2]);
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::new(Method::Hooi, 1.5);
        assert!(cfg.validate().is_err());
        cfg.epsilon = 0.9;
        cfg.holdout = 1.0;
        assert!(cfg.validate().is_err());
    }
}
