// SPDX-License-Identifier: MIT OR Apache-2.0

//! Feature post-processing and classifiers applied to compressed cores.

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Samples × features matrix with one class label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Matrix,
    labels: Vec<u32>,
}

impl FeatureMatrix {
    pub fn new(data: Matrix, labels: Vec<u32>) -> Result<Self> {
        if data.nrows() != labels.len() {
            return invalid(format!(
                "{} rows but {} labels",
                data.nrows(),
                labels.len()
            ));
        }
        Ok(Self { data, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u32>) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return invalid("ragged feature rows");
        }
        let data = Matrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
        Self::new(data, labels)
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }
}

/// One row per core, entries in column-major (row index fastest) order.
pub fn vectorize_cores(cores: &[Matrix], labels: Vec<u32>) -> Result<FeatureMatrix> {
    let (r, c) = match cores.first() {
        Some(g) => g.shape(),
        None => return FeatureMatrix::new(Matrix::zeros(0, 0), labels),
    };
    if cores.iter().any(|g| g.shape() != (r, c)) {
        return invalid("cores have differing shapes");
    }
    let nf = r * c;
    let data = Matrix::from_fn(cores.len(), nf, |i, j| cores[i].as_slice()[j]);
    FeatureMatrix::new(data, labels)
}

/// Vectorises tensor-valued cores (e.g. Tucker blocks) in storage order.
pub fn vectorize_tensors(cores: &[DenseTensor], labels: Vec<u32>) -> Result<FeatureMatrix> {
    let shape = match cores.first() {
        Some(g) => g.shape().to_vec(),
        None => return FeatureMatrix::new(Matrix::zeros(0, 0), labels),
    };
    if cores.iter().any(|g| g.shape() != shape.as_slice()) {
        return invalid("cores have differing shapes");
    }
    let nf = cores[0].len();
    let data = Matrix::from_fn(cores.len(), nf, |i, j| cores[i].data()[j]);
    FeatureMatrix::new(data, labels)
}

/// Subtracts the sample mean; returns the centred samples and the mean.
pub fn center_data(train: &[DenseTensor]) -> Result<(Vec<DenseTensor>, DenseTensor)> {
    let first = match train.first() {
        Some(t) => t,
        None => return invalid("cannot centre an empty sample set"),
    };
    let mut mean = DenseTensor::zeros(first.shape().to_vec())?;
    for t in train {
        if t.shape() != first.shape() {
            return invalid("samples have differing shapes");
        }
        for (m, v) in mean.data_mut().iter_mut().zip(t.data()) {
            *m += v;
        }
    }
    mean.scale(1.0 / train.len() as f64);
    let centred = train
        .iter()
        .map(|t| t.axpy(-1.0, &mean))
        .collect::<Result<Vec<_>>>()?;
    Ok((centred, mean))
}

/// Principal axes fitted on training features.
#[derive(Clone, Debug)]
pub struct Pca {
    mean: DVector<f64>,
    /// `N_f × p`, orthonormal columns.
    axes: Matrix,
    explained_variance: Vec<f64>,
}

impl Pca {
    pub fn fit(f: &FeatureMatrix, p: usize) -> Result<Pca> {
        let (m, nf) = (f.n_samples(), f.n_features());
        if p == 0 || p > m.min(nf) {
            return invalid(format!("{} components outside 1..={}", p, m.min(nf)));
        }
        let mean = f.data.row_mean().transpose();
        let mut centred = f.data.clone();
        for mut row in centred.row_iter_mut() {
            row -= mean.transpose();
        }
        if centred.iter().all(|&v| v == 0.0) {
            return Err(crate::Error::DegenerateInput("all training features are identical".into()));
        }
        let svd = crate::linalg::try_svd(&centred, true)?;
        let vt = svd.v_t.expect("requested right singular vectors");
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let mut axes = Matrix::from_fn(nf, p, |i, j| vt[(order[j], i)]);
        for mut col in axes.column_iter_mut() {
            let lead = col.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        let denom = (m.max(2) - 1) as f64;
        let explained_variance = order[..p].iter().map(|&i| s[i] * s[i] / denom).collect();
        Ok(Pca {
            mean,
            axes,
            explained_variance,
        })
    }

    pub fn transform(&self, f: &FeatureMatrix) -> Result<FeatureMatrix> {
        if f.n_features() != self.axes.nrows() {
            return invalid(format!(
                "PCA fitted on {} features, got {}",
                self.axes.nrows(),
                f.n_features()
            ));
        }
        let mut centred = f.data.clone();
        for mut row in centred.row_iter_mut() {
            row -= self.mean.transpose();
        }
        FeatureMatrix::new(centred * &self.axes, f.labels.clone())
    }

    /// Maps projected rows back to feature space.
    pub fn inverse_transform(&self, f: &FeatureMatrix) -> Matrix {
        let mut back = &f.data * self.axes.transpose();
        for mut row in back.row_iter_mut() {
            row += self.mean.transpose();
        }
        back
    }

    pub fn axes(&self) -> &Matrix {
        &self.axes
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }
}

pub fn pca_fit_transform(f: &FeatureMatrix, p: usize) -> Result<(Pca, FeatureMatrix)> {
    let pca = Pca::fit(f, p)?;
    let out = pca.transform(f)?;
    Ok((pca, out))
}

/// Label of the Euclidean-nearest training row; ties go to the lower index.
pub fn knn1_classify(train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Vec<u32>> {
    if train.n_features() != test.n_features() {
        return invalid(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        ));
    }
    if train.n_samples() == 0 {
        return invalid("empty training set");
    }
    // rows as contiguous slices for the inner loop
    let tr = train.data.transpose();
    let te = test.data.transpose();
    let nf = train.n_features();
    let preds = te
        .as_slice()
        .chunks_exact(nf.max(1))
        .take(test.n_samples())
        .map(|q| {
            let mut best = (f64::INFINITY, 0usize);
            for (i, r) in tr.as_slice().chunks_exact(nf.max(1)).take(train.n_samples()).enumerate() {
                let d: f64 = q.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, i);
                }
            }
            train.labels[best.1]
        })
        .collect();
    Ok(preds)
}

/// Fisher discriminant projection with nearest-class-mean classification.
#[derive(Clone, Debug)]
pub struct LdaModel {
    /// `N_f × d`, `d ≤ C − 1`.
    projection: Matrix,
    /// Projected class centroids, one row per class.
    class_means: Matrix,
    classes: Vec<u32>,
}

impl LdaModel {
    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    pub fn class_means(&self) -> &Matrix {
        &self.class_means
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }
}

/// Relative ridge added to the within-class scatter: `λ = RIDGE · tr(S_w) / N_f`.
pub const LDA_RIDGE: f64 = 1e-6;

pub fn lda_fit(train: &FeatureMatrix) -> Result<LdaModel> {
    let nf = train.n_features();
    let mut classes: Vec<u32> = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return invalid("LDA needs at least two classes");
    }
    let x = &train.data;
    let mut counts = vec![0usize; classes.len()];
    let mut means = Matrix::zeros(classes.len(), nf);
    let class_of: Vec<usize> = train
        .labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    for (i, &c) in class_of.iter().enumerate() {
        counts[c] += 1;
        let mut row = means.row_mut(c);
        row += x.row(i);
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return invalid(format!("class {} has fewer than two samples", classes[c]));
    }
    for (c, &n) in counts.iter().enumerate() {
        means.row_mut(c).scale_mut(1.0 / n as f64);
    }
    let total_mean = x.row_mean();

    // within-class deviations (rows) and weighted between-class columns
    let mut hw = x.clone();
    for (i, &c) in class_of.iter().enumerate() {
        let mut row = hw.row_mut(i);
        row -= means.row(c);
    }
    let mut hb = Matrix::zeros(nf, classes.len());
    for c in 0..classes.len() {
        let d = (means.row(c) - &total_mean).transpose() * (counts[c] as f64).sqrt();
        hb.set_column(c, &d);
    }
    let trace: f64 = hw.iter().map(|v| v * v).sum();
    let lambda = if trace > 0.0 {
        LDA_RIDGE * trace / nf as f64
    } else {
        LDA_RIDGE
    };
    let z = solve_within(&hw, lambda, &hb)?; // S_w⁻¹ H_b
    let m = hb.transpose() * &z;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut cols = Vec::new();
    for &i in order.iter().take(classes.len() - 1) {
        let mu = eig.eigenvalues[i];
        if !(mu > 1e-12 * top) {
            break;
        }
        let q = eig.eigenvectors.column(i);
        // wᵀ S_w w = μ, so dividing by √μ normalises the within-class spread
        let mut w = &z * q / mu.sqrt();
        let lead = w.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            w.neg_mut();
        }
        cols.push(w);
    }
    if cols.is_empty() {
        return invalid("class means coincide; no discriminant direction");
    }
    let projection = Matrix::from_columns(&cols);
    let class_means = &means * &projection;
    Ok(LdaModel {
        projection,
        class_means,
        classes,
    })
}

pub fn lda_classify(model: &LdaModel, test: &FeatureMatrix) -> Result<Vec<u32>> {
    if test.n_features() != model.projection.nrows() {
        return invalid(format!(
            "LDA fitted on {} features, got {}",
            model.projection.nrows(),
            test.n_features()
        ));
    }
    let proj = &test.data * &model.projection;
    Ok(proj
        .row_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0usize);
            for (c, m) in model.class_means.row_iter().enumerate() {
                let d = (p - m).norm_squared();
                if d < best.0 {
                    best = (d, c);
                }
            }
            model.classes[best.1]
        })
        .collect())
}

/// Solves `(H_wᵀH_w + λI) Z = B` where the rows of `hw` are the within-class
/// deviations, switching to the Woodbury form when samples < features.
fn solve_within(hw: &Matrix, lambda: f64, b: &Matrix) -> Result<Matrix> {
    let (m, nf) = hw.shape();
    if nf <= m {
        let mut sw = hw.transpose() * hw;
        for i in 0..nf {
            sw[(i, i)] += lambda;
        }
        let chol = sw
            .cholesky()
            .ok_or_else(|| crate::Error::Numerical("within-class scatter not positive definite".into()))?;
        Ok(chol.solve(b))
    } else {
        // (λI + HᵀH)⁻¹ = (I − Hᵀ(λI + HHᵀ)⁻¹H) / λ
        let mut small = hw * hw.transpose();
        for i in 0..m {
            small[(i, i)] += lambda;
        }
        let chol = small
            .cholesky()
            .ok_or_else(|| crate::Error::Numerical("regularised Gram matrix not positive definite".into()))?;
        let hb = hw * b;
        let inner = chol.solve(&hb);
        Ok((b - hw.transpose() * inner) / lambda)
    }
}

/// Fraction of exact label matches.
pub fn csr(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return invalid(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        ));
    }
    if truth.is_empty() {
        return invalid("no labels to score");
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}
