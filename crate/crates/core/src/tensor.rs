// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense N-dimensional tensors and the multilinear primitives used by the
//! decompositions.
//!
//! Storage is a single contiguous `f64` buffer with the *first* index varying
//! fastest (column-major generalised to N modes). Under this convention the
//! mode-1 unfolding and every leading-modes unfolding `(I_1⋯I_j) × (I_{j+1}⋯I_N)`
//! are plain reinterpretations of the buffer, which is what the sweeps in
//! [`crate::mps`] exploit.
//!
//! Mode indices in this API are zero-based.

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{invalid, Result};

/// Column-major dense matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_shape(&shape)?;
        let len: usize = shape.iter().product();
        if data.len() != len {
            return invalid(format!(
                "buffer length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                len
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        validate_shape(&shape)?;
        let len = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, visiting
    /// indices in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_shape(&shape)?;
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            advance(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    /// Second-order tensor holding the entries of `m`.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: vec![m.nrows().max(1), m.ncols().max(1)],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.shape) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    /// Same buffer, new shape. Element count must be preserved.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// Elementwise `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return invalid(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Mode-`mode` unfolding `I_mode × ∏_{i≠mode} I_i`. Columns enumerate the
    /// remaining modes in their original order, earliest mode fastest.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        check_mode(mode, self.order())?;
        let (left, n, right) = split_at_mode(&self.shape, mode);
        if left == 1 {
            return Ok(Matrix::from_column_slice(n, right, &self.data));
        }
        let mut out = Matrix::zeros(n, left * right);
        for r in 0..right {
            for i in 0..n {
                let src = &self.data[(r * n + i) * left..(r * n + i + 1) * left];
                for (l, &v) in src.iter().enumerate() {
                    out[(i, r * left + l)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::matricize`] for a target `shape`.
    pub fn refold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
        validate_shape(shape)?;
        check_mode(mode, shape.len())?;
        let (left, n, right) = split_at_mode(shape, mode);
        if m.nrows() != n || m.ncols() != left * right {
            return invalid(format!(
                "matrix {}x{} cannot be refolded along mode {} into {:?}",
                m.nrows(),
                m.ncols(),
                mode,
                shape
            ));
        }
        let mut data = vec![0.0; n * left * right];
        for r in 0..right {
            for i in 0..n {
                let dst = &mut data[(r * n + i) * left..(r * n + i + 1) * left];
                for (l, v) in dst.iter_mut().enumerate() {
                    *v = m[(i, r * left + l)];
                }
            }
        }
        DenseTensor::new(shape.to_vec(), data)
    }

    /// Unfolding with the first `j` modes as rows and the rest as columns,
    /// `1 ≤ j ≤ N−1`. This never reorders the buffer.
    pub fn matricize_prefix(&self, j: usize) -> Result<Matrix> {
        let n = self.order();
        if j == 0 || j >= n {
            return invalid(format!("prefix length {} outside 1..={}", j, n.saturating_sub(1)));
        }
        let rows: usize = self.shape[..j].iter().product();
        let cols: usize = self.shape[j..].iter().product();
        Ok(Matrix::from_column_slice(rows, cols, &self.data))
    }

    /// Mode-`mode` product with `a` (`J × I_mode`): the mode extent becomes `J`.
    pub fn mode_product(&self, a: &Matrix, mode: usize) -> Result<DenseTensor> {
        check_mode(mode, self.order())?;
        let (left, n, right) = split_at_mode(&self.shape, mode);
        if a.ncols() != n {
            return invalid(format!(
                "matrix has {} columns but mode {} has extent {}",
                a.ncols(),
                mode,
                n
            ));
        }
        let j = a.nrows();
        let mut shape = self.shape.clone();
        shape[mode] = j;
        if j == 0 {
            return invalid("mode product with an empty matrix");
        }
        let mut data = vec![0.0; left * j * right];
        if left == 1 {
            let x = DMatrixView::from_slice(&self.data, n, right);
            let y = a * x;
            data.copy_from_slice(y.as_slice());
        } else {
            // Each block r is a left×n column-major matrix; out block = block · aᵀ.
            for r in 0..right {
                let x = DMatrixView::from_slice(&self.data[r * left * n..(r + 1) * left * n], left, n);
                let y = x * a.transpose();
                data[r * left * j..(r + 1) * left * j].copy_from_slice(y.as_slice());
            }
        }
        DenseTensor::new(shape, data)
    }

    /// Reorders modes so that output mode `i` is input mode `perm[i]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<DenseTensor> {
        validate_perm(perm, self.order())?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let in_strides = self.strides();
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; out_shape.len()];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            // odometer step tracking the source offset incrementally
            for (d, i) in idx.iter_mut().enumerate() {
                *i += 1;
                src += src_strides[d];
                if *i < out_shape[d] {
                    break;
                }
                src -= src_strides[d] * out_shape[d];
                *i = 0;
            }
        }
        DenseTensor::new(out_shape, data)
    }

    /// Stacks equally shaped samples along a new trailing mode.
    pub fn concat_samples(samples: &[DenseTensor]) -> Result<DenseTensor> {
        let first = match samples.first() {
            Some(s) => s,
            None => return invalid("cannot concatenate an empty sample list"),
        };
        let mut data = Vec::with_capacity(first.len() * samples.len());
        for s in samples {
            if s.shape != first.shape {
                return invalid(format!(
                    "sample shape {:?} differs from {:?}",
                    s.shape, first.shape
                ));
            }
            data.extend_from_slice(&s.data);
        }
        let mut shape = first.shape.clone();
        shape.push(samples.len());
        DenseTensor::new(shape, data)
    }

    /// Slice `k` along the trailing mode, dropping that mode.
    pub fn trailing_slice(&self, k: usize) -> Result<DenseTensor> {
        let n = self.order();
        if n < 2 {
            return invalid("trailing slice needs a tensor of order at least 2");
        }
        let count = self.shape[n - 1];
        if k >= count {
            return invalid(format!("slice {} out of range 0..{}", k, count));
        }
        let block: usize = self.shape[..n - 1].iter().product();
        DenseTensor::new(
            self.shape[..n - 1].to_vec(),
            self.data[k * block..(k + 1) * block].to_vec(),
        )
    }
}

/// Mode reordering used to place the sample mode inside the MPS chain.
///
/// `perm[i]` is the source mode of output mode `i`; `sample_axis` is the
/// zero-based output position of the sample mode, so the one-based core
/// position is `sample_axis + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationPlan {
    perm: Vec<usize>,
    sample_axis: usize,
}

impl PermutationPlan {
    pub fn new(perm: Vec<usize>, sample_axis: usize) -> Result<Self> {
        validate_perm(&perm, perm.len())?;
        if sample_axis >= perm.len() {
            return invalid(format!(
                "sample axis {} outside 0..{}",
                sample_axis,
                perm.len()
            ));
        }
        Ok(Self { perm, sample_axis })
    }

    pub fn identity(n_axes: usize, sample_axis: usize) -> Result<Self> {
        Self::new((0..n_axes).collect(), sample_axis)
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn sample_axis(&self) -> usize {
        self.sample_axis
    }

    /// One-based position `n` of the sample mode in the permuted chain.
    pub fn core_position(&self) -> usize {
        self.sample_axis + 1
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// The plan that undoes this one.
    pub fn inverse(&self) -> PermutationPlan {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        let sample_axis = self.perm[self.sample_axis];
        PermutationPlan {
            perm: inv,
            sample_axis,
        }
    }

    /// Ordering of the non-sample modes, expressed against a sample tensor
    /// that lacks the sample mode.
    pub fn sample_mode_order(&self) -> Vec<usize> {
        let src = self.perm[self.sample_axis];
        self.perm
            .iter()
            .filter(|&&p| p != src)
            .map(|&p| if p > src { p - 1 } else { p })
            .collect()
    }
}

pub fn matricize(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    t.matricize(mode)
}

pub fn refold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    DenseTensor::refold(m, mode, shape)
}

pub fn matricize_prefix(t: &DenseTensor, j: usize) -> Result<Matrix> {
    t.matricize_prefix(j)
}

pub fn mode_n_product(t: &DenseTensor, a: &Matrix, mode: usize) -> Result<DenseTensor> {
    t.mode_product(a, mode)
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.frobenius_norm()
}

pub fn permute_modes(t: &DenseTensor, plan: &PermutationPlan) -> Result<DenseTensor> {
    if plan.len() != t.order() {
        return invalid(format!(
            "plan covers {} modes but tensor has order {}",
            plan.len(),
            t.order()
        ));
    }
    t.permute_axes(plan.perm())
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(shape.len());
    let mut s = 1;
    for &n in shape {
        strides.push(s);
        s *= n;
    }
    strides
}

fn advance(idx: &mut [usize], shape: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}

fn split_at_mode(shape: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = shape[..mode].iter().product();
    let right = shape[mode + 1..].iter().product();
    (left, shape[mode], right)
}

fn check_mode(mode: usize, order: usize) -> Result<()> {
    if mode >= order {
        return invalid(format!("mode {} out of range for order {}", mode, order));
    }
    Ok(())
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return invalid("tensor order must be at least 1");
    }
    if shape.contains(&0) {
        return invalid(format!("zero extent in shape {:?}", shape));
    }
    Ok(())
}

fn validate_perm(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return invalid(format!(
            "permutation has length {} but tensor has order {}",
            perm.len(),
            n
        ));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return invalid(format!("{:?} is not a permutation of 0..{}", perm, n));
        }
        seen[p] = true;
    }
    Ok(())
}
