// SPDX-License-Identifier: MIT OR Apache-2.0

//! Datasets, the evaluation pipeline and the `mps-bench` command line.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod pipeline;

pub use dataset::{holdout_split, load_dataset, save_dataset, synth_dataset, Dataset, Split};
pub use error::{BenchError, Result};
pub use pipeline::{run_pipeline, Classifier, Method, PipelineConfig, RunReport};
