// SPDX-License-Identifier: MIT OR Apache-2.0

//! Tensor-train (MPS) compression of labelled tensor collections, a Tucker
//! (HOOI) baseline, and the classifiers used to evaluate the compressed
//! features.
//!
//! Tensors are stored column-major: the first index varies fastest.
//! Mode indices in the API are 0-based.

pub mod classify;
pub mod container;
pub mod error;
pub mod linalg;
pub mod mps;
pub mod tensor;
pub mod tucker;

pub use classify::{
    center_data, csr, knn1_classify, lda_classify, lda_fit, pca_fit_transform, vectorize_cores,
    vectorize_tensors, FeatureMatrix, LdaModel, Pca,
};
pub use error::{Error, Result};
pub use linalg::{
    threshold_rank, truncated_svd, truncated_svd_rank, truncated_svd_with, ThresholdMode,
    TruncatedSvd,
};
pub use mps::{
    mps_compress_test, mps_train, plan_permutation, plan_permutation_at, truncate_cores,
    CompressionConfig, CorePosition, MpsModel, PermuteMode, SweepStep,
};
pub use tensor::{
    frobenius_norm, matricize, matricize_prefix, mode_n_product, permute_modes, refold,
    DenseTensor, Matrix, PermutationPlan,
};
pub use tucker::{
    hooi_train, tucker_compress_test, tucker_compress_train, HooiConfig, TuckerModel, TuckerRanks,
};
