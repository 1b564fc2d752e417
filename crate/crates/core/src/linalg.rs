// SPDX-License-Identifier: MIT OR Apache-2.0

//! Truncated SVD with singular-value-mass thresholding and entropy
//! diagnostics for the information a truncation throws away.
//!
//! The bond rule keeps the smallest `Δ` such that
//!
//! ```text
//! (s_1 + … + s_Δ) / (s_1 + … + s_r) ≥ ε
//! ```
//!
//! where `r` is the numerical rank. The sum runs over singular values, not
//! their squares; [`ThresholdMode::Energy`] switches to squared values.

use nalgebra::SVD;

use crate::error::{invalid, Error, Result};
use crate::tensor::Matrix;

/// Quantity accumulated by the bond threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Sum of singular values.
    #[default]
    Mass,
    /// Sum of squared singular values.
    Energy,
}

#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// Left factor, `rows × Δ`, orthonormal columns.
    pub u: Matrix,
    /// Retained singular values, descending.
    pub s: Vec<f64>,
    /// Right factor, `Δ × cols`, orthonormal rows.
    pub v: Matrix,
    pub delta: usize,
    /// Numerical rank of the input.
    pub full_rank: usize,
    /// Sum of the discarded singular values.
    pub discarded_mass: f64,
    /// All `full_rank` nonzero singular values, retained ones first.
    pub spectrum: Vec<f64>,
}

impl TruncatedSvd {
    /// `u · diag(s) · v`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * &self.v
    }

    /// Sum of squared discarded singular values; equals the squared
    /// Frobenius error of the truncation.
    pub fn discarded_energy(&self) -> f64 {
        self.spectrum[self.delta..].iter().map(|s| s * s).sum()
    }

    /// `u · diag(s)`, the part carried forward by a right-to-left sweep.
    pub fn us(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us
    }

    /// `diag(s) · v`, the part carried forward by a left-to-right sweep.
    pub fn sv(&self) -> Matrix {
        let mut sv = self.v.clone();
        for (i, &s) in self.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(s);
        }
        sv
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdDiagnostics {
    /// Entropy (bits) of the normalised singular-value distribution.
    pub entropy: f64,
    /// Entropy contribution of the discarded singular values.
    pub truncation_loss: f64,
}

/// Truncated SVD keeping the smallest rank whose singular-value mass ratio
/// reaches `epsilon`.
pub fn truncated_svd(w: &Matrix, epsilon: f64) -> Result<TruncatedSvd> {
    truncated_svd_with(w, epsilon, ThresholdMode::Mass)
}

pub fn truncated_svd_with(w: &Matrix, epsilon: f64, mode: ThresholdMode) -> Result<TruncatedSvd> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return invalid(format!("threshold {} outside (0, 1]", epsilon));
    }
    let full = full_svd(w)?;
    let delta = threshold_rank(&full.spectrum, epsilon, mode);
    Ok(full.truncate(delta))
}

/// Truncated SVD with a fixed target rank (clamped to the numerical rank).
pub fn truncated_svd_rank(w: &Matrix, rank: usize) -> Result<TruncatedSvd> {
    if rank == 0 {
        return invalid("target rank must be at least 1");
    }
    let full = full_svd(w)?;
    let delta = rank.min(full.spectrum.len());
    Ok(full.truncate(delta))
}

/// Smallest `Δ` whose cumulative (mass or energy) ratio reaches `epsilon`.
/// `spectrum` must be the descending nonzero singular values.
pub fn threshold_rank(spectrum: &[f64], epsilon: f64, mode: ThresholdMode) -> usize {
    let weight = |s: f64| match mode {
        ThresholdMode::Mass => s,
        ThresholdMode::Energy => s * s,
    };
    let mut prefix = Vec::with_capacity(spectrum.len());
    let mut acc = 0.0;
    for &s in spectrum {
        acc += weight(s);
        prefix.push(acc);
    }
    let total = acc;
    prefix
        .iter()
        .position(|&p| p / total >= epsilon)
        .map_or(spectrum.len(), |i| i + 1)
}

pub fn svd_diagnostics(svd: &TruncatedSvd) -> SvdDiagnostics {
    let total: f64 = svd.spectrum.iter().sum();
    let h = |s: &f64| {
        let p = s / total;
        if p > 0.0 {
            -p * p.log2()
        } else {
            0.0
        }
    };
    SvdDiagnostics {
        entropy: svd.spectrum.iter().map(h).sum(),
        truncation_loss: svd.spectrum[svd.delta..].iter().map(h).sum(),
    }
}

/// Descending singular values above the numerical-rank tolerance.
pub fn singular_values(w: &Matrix) -> Result<Vec<f64>> {
    check_input(w)?;
    let svd = try_svd(w, false)?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let tol = rank_tolerance(w, s.first().copied().unwrap_or(0.0));
    s.retain(|&x| x > tol);
    Ok(s)
}

/// First `k` left singular vectors of `w` (`rows × k`), completed with an
/// orthonormal complement when `k` exceeds the numerical rank.
pub fn leading_left_singular_vectors(w: &Matrix, k: usize) -> Result<Matrix> {
    if k == 0 || k > w.nrows() {
        return invalid(format!(
            "cannot take {} left singular vectors of a {}-row matrix",
            k,
            w.nrows()
        ));
    }
    let basis = match truncated_svd_rank(w, k) {
        Ok(svd) => svd.u,
        Err(Error::DegenerateInput(_)) => Matrix::zeros(w.nrows(), 0),
        Err(e) => return Err(e),
    };
    Ok(complete_orthonormal(basis, k))
}

/// Extends the orthonormal columns of `q` to `k` columns.
pub(crate) fn complete_orthonormal(q: Matrix, k: usize) -> Matrix {
    let n = q.nrows();
    if q.ncols() >= k {
        return q;
    }
    let mut cols: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() == k {
            break;
        }
        let mut v = nalgebra::DVector::<f64>::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 0.5 {
            cols.push(v / norm);
        }
    }
    Matrix::from_columns(&cols)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() || m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    match try_svd(m, false) {
        Ok(svd) => svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b)),
        Err(_) => f64::NAN,
    }
}

/// `‖qᵀq − I‖₂` for a matrix with (intended) orthonormal columns.
pub fn column_orthogonality_defect(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    spectral_norm(&(g - Matrix::identity(q.ncols(), q.ncols())))
}

/// `‖qqᵀ − I‖₂` for a matrix with (intended) orthonormal rows.
pub fn row_orthogonality_defect(q: &Matrix) -> f64 {
    let g = q * q.transpose();
    spectral_norm(&(g - Matrix::identity(q.nrows(), q.nrows())))
}

struct FullSvd {
    u: Matrix,
    v: Matrix,
    spectrum: Vec<f64>,
}

impl FullSvd {
    fn truncate(self, delta: usize) -> TruncatedSvd {
        let mut u = self.u.columns(0, delta).into_owned();
        let mut v = self.v.rows(0, delta).into_owned();
        // Sign convention: the largest-magnitude entry of each u column is
        // nonnegative (first index wins ties).
        for j in 0..delta {
            let col = u.column(j);
            let (mut best, mut best_abs) = (0, -1.0);
            for (i, x) in col.iter().enumerate() {
                if x.abs() > best_abs {
                    best = i;
                    best_abs = x.abs();
                }
            }
            if col[best] < 0.0 {
                u.column_mut(j).neg_mut();
                v.row_mut(j).neg_mut();
            }
        }
        let discarded_mass = self.spectrum[delta..].iter().sum();
        TruncatedSvd {
            u,
            s: self.spectrum[..delta].to_vec(),
            v,
            delta,
            full_rank: self.spectrum.len(),
            discarded_mass,
            spectrum: self.spectrum,
        }
    }
}

fn check_input(w: &Matrix) -> Result<()> {
    if w.is_empty() {
        return invalid("empty matrix");
    }
    if w.iter().any(|x| !x.is_finite()) {
        return invalid("matrix contains non-finite entries");
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateInput("all-zero matrix".into()));
    }
    Ok(())
}

fn rank_tolerance(w: &Matrix, s_max: f64) -> f64 {
    w.nrows().max(w.ncols()) as f64 * f64::EPSILON * s_max
}

/// Convergence tolerances tried in order. The bidiagonal iteration can stop
/// on a wrong factorization, so each result is checked against the input
/// before it is accepted.
const SVD_TOLERANCES: [f64; 2] = [5.0 * f64::EPSILON, 64.0 * f64::EPSILON];

type Svd = SVD<f64, nalgebra::Dyn, nalgebra::Dyn>;

pub(crate) fn try_svd(w: &Matrix, vectors: bool) -> Result<Svd> {
    let slack = 1e3 * w.nrows().max(w.ncols()) as f64 * f64::EPSILON * w.norm();
    let accept = |svd: &Svd, target: &Matrix| match svd.clone().recompose() {
        Ok(r) => (r - target).norm() <= slack,
        Err(_) => false,
    };
    let max_iter = 1000 * w.nrows().min(w.ncols()).max(1);
    let mut found = None;
    'search: for transpose in [false, true] {
        let target = if transpose { w.transpose() } else { w.clone() };
        for &tol in &SVD_TOLERANCES {
            if let Some(svd) = SVD::try_new(target.clone(), true, true, tol, max_iter) {
                if accept(&svd, &target) {
                    found = Some(if transpose { transpose_svd(svd) } else { svd });
                    break 'search;
                }
            }
        }
    }
    let svd = match found {
        Some(svd) => svd,
        None => {
            let svd = jacobi_svd(w);
            if !accept(&svd, w) {
                return Err(Error::Numerical(format!(
                    "SVD of {}x{} matrix did not converge",
                    w.nrows(),
                    w.ncols()
                )));
            }
            svd
        }
    };
    if vectors {
        Ok(svd)
    } else {
        Ok(SVD {
            u: None,
            v_t: None,
            singular_values: svd.singular_values,
        })
    }
}

fn transpose_svd(svd: Svd) -> Svd {
    SVD {
        u: svd.v_t.map(|vt| vt.transpose()),
        v_t: svd.u.map(|u| u.transpose()),
        singular_values: svd.singular_values,
    }
}

/// One-sided Jacobi SVD (thin), used when the bidiagonal solver fails.
fn jacobi_svd(w: &Matrix) -> Svd {
    if w.nrows() < w.ncols() {
        return transpose_svd(jacobi_svd(&w.transpose()));
    }
    let n = w.ncols();
    let mut a = w.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for m in [&mut a, &mut v] {
                    for i in 0..m.nrows() {
                        let (xp, xq) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * xp - sn * xq;
                        m[(i, q)] = sn * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut u = a;
    for (j, &sj) in s.iter().enumerate() {
        if sj > 0.0 {
            u.column_mut(j).scale_mut(1.0 / sj);
        }
    }
    SVD {
        u: Some(u),
        v_t: Some(v.transpose()),
        singular_values: nalgebra::DVector::from_vec(s),
    }
}

fn full_svd(w: &Matrix) -> Result<FullSvd> {
    check_input(w)?;
    let svd = try_svd(w, true)?;
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numerical("SVD factors missing".into())),
    };
    let s = svd.singular_values;
    // try_new sorts descending; keep an explicit order for safety against
    // ties produced in different positions.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let s_max = s[order[0]];
    let tol = rank_tolerance(w, s_max);
    let rank = order.iter().take_while(|&&i| s[i] > tol).count();
    if rank == 0 {
        return Err(Error::DegenerateInput("matrix is numerically zero".into()));
    }
    let idx = &order[..rank];
    let u = Matrix::from_fn(u.nrows(), rank, |i, j| u[(i, idx[j])]);
    let v = Matrix::from_fn(rank, vt.ncols(), |i, j| vt[(idx[i], j)]);
    Ok(FullSvd {
        u,
        v,
        spectrum: idx.iter().map(|&i| s[i]).collect(),
    })
}
