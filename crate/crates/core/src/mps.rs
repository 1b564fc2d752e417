// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mixed-canonical MPS (tensor-train) compression of a sample collection.
//!
//! The training tensor stacks `K` samples of shape `I_1 × … × I_N` along a
//! trailing mode. Its modes are reordered so the sample mode sits at chain
//! position `n`, then two sweeps of truncated SVDs produce
//!
//! ```text
//! x[i_1 … k … i_N] ≈ B¹[i_1] ⋯ Bⁿ⁻¹[i_{n-1}] · G_k · Cⁿ⁺¹[i_n] ⋯ Cᴺ⁺¹[i_N]
//! ```
//!
//! with left-orthogonal `B` blocks, right-orthogonal `C` blocks and one
//! `Δ_{n-1} × Δ_n` core matrix per sample. Test samples are projected
//! through the same `B` and `C` blocks.
//!
//! Internally each left block is kept as its `(Δ_{j-1}·I_j) × Δ_j` matrix
//! `U` (so `Σ_i B[i]ᵀB[i] = UᵀU`) and each right block as its
//! `Δ_{j-1} × (I·Δ_j)` matrix `V` (so `Σ_i C[i]C[i]ᵀ = VVᵀ`).

use std::io::{Read, Write};

use crate::container::{ByteReader, ByteWriter};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, svd_diagnostics, ThresholdMode};
use crate::tensor::{permute_modes, DenseTensor, Matrix, PermutationPlan};

const MAGIC: &[u8; 4] = b"MPS1";
const VERSION: u8 = 1;

/// Where the sample mode goes in the chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorePosition {
    /// Split that best balances the products on either side.
    #[default]
    Auto,
    /// One-based chain position `n` (`1 ≤ n ≤ N+1`).
    Fixed(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum PermuteMode {
    /// Reorder modes by the balancing heuristic.
    #[default]
    Auto,
    /// Keep the sample modes in their original order.
    None,
    /// Use this plan over all `N+1` modes (sample mode = last input mode).
    Explicit(PermutationPlan),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionConfig {
    pub epsilon: f64,
    pub core_position: CorePosition,
    pub permute: PermuteMode,
    pub threshold_mode: ThresholdMode,
    /// Leading core dimensions kept after training.
    pub further_truncation: Option<(usize, usize)>,
}

impl CompressionConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            core_position: CorePosition::Auto,
            permute: PermuteMode::Auto,
            threshold_mode: ThresholdMode::Mass,
            further_truncation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return invalid(format!("epsilon {} outside (0, 1]", self.epsilon));
        }
        if let Some((a, b)) = self.further_truncation {
            if a == 0 || b == 0 {
                return invalid("further truncation dimensions must be at least 1");
            }
        }
        Ok(())
    }
}

/// One truncated SVD of the training sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepStep {
    /// One-based bond index `j` of the `Δ_j` this step determined.
    pub bond: usize,
    pub rows: usize,
    pub cols: usize,
    pub full_rank: usize,
    pub delta: usize,
    pub discarded_mass: f64,
    pub discarded_energy: f64,
    pub entropy: f64,
    pub truncation_loss: f64,
}

#[derive(Clone, Debug)]
pub struct MpsModel {
    plan: PermutationPlan,
    /// Extents of the permuted training tensor, sample mode included.
    dims: Vec<usize>,
    left: Vec<Matrix>,
    right: Vec<Matrix>,
    cores: Vec<Matrix>,
    bond_dims: Vec<usize>,
    epsilon: f64,
    steps: Vec<SweepStep>,
}

/// Orders the modes of an `N`-mode sample shape and places the sample mode.
///
/// Every split of the modes into a prefix and a suffix is scored by
/// `min(P, S) / max(P, S)` with `P`, `S` the extent products of each side;
/// prefix modes are sorted by decreasing extent and suffix modes by
/// increasing extent, and the sample mode goes between them. Ties prefer the
/// core position nearest the middle of the chain, then the lexicographically
/// smallest mode order, then the earlier core position.
/// The returned plan acts on the `N+1`-mode training tensor whose sample mode
/// is the trailing mode `N`.
pub fn plan_permutation(shape: &[usize], k_samples: usize) -> PermutationPlan {
    best_plan(shape, k_samples, None, true)
}

/// Same as [`plan_permutation`] but with exactly `prefix_len` modes in front
/// of the sample mode.
pub fn plan_permutation_at(shape: &[usize], k_samples: usize, prefix_len: usize) -> Result<PermutationPlan> {
    if prefix_len > shape.len() {
        return invalid(format!(
            "core position {} outside 1..={}",
            prefix_len + 1,
            shape.len() + 1
        ));
    }
    Ok(best_plan(shape, k_samples, Some(prefix_len), true))
}

fn best_plan(shape: &[usize], _k_samples: usize, prefix_len: Option<usize>, reorder: bool) -> PermutationPlan {
    let n = shape.len();
    let mut best: Option<(u128, u128, Vec<usize>, usize)> = None;
    let mut consider = |order: Vec<usize>, split: usize| {
        let p: u128 = order[..split].iter().map(|&m| shape[m] as u128).product();
        let s: u128 = order[split..].iter().map(|&m| shape[m] as u128).product();
        let (lo, hi) = (p.min(s), p.max(s));
        let better = match &best {
            None => true,
            Some((blo, bhi, border, bsplit)) => {
                // compare lo/hi against blo/bhi without division
                let lhs = lo * bhi;
                let rhs = blo * hi;
                let centre = |k: usize| (2 * k).abs_diff(n);
                lhs > rhs
                    || (lhs == rhs
                        && (centre(split), &order, split) < (centre(*bsplit), border, *bsplit))
            }
        };
        if better {
            best = Some((lo, hi, order, split));
        }
    };
    if reorder {
        for mask in 0u64..(1u64 << n) {
            let count = mask.count_ones() as usize;
            if prefix_len.is_some_and(|l| l != count) {
                continue;
            }
            let mut prefix: Vec<usize> = (0..n).filter(|m| mask >> m & 1 == 1).collect();
            let mut suffix: Vec<usize> = (0..n).filter(|m| mask >> m & 1 == 0).collect();
            prefix.sort_by(|a, b| shape[*b].cmp(&shape[*a]));
            suffix.sort_by(|a, b| shape[*a].cmp(&shape[*b]));
            prefix.extend_from_slice(&suffix);
            consider(prefix, count);
        }
    } else {
        let splits: Vec<usize> = match prefix_len {
            Some(l) => vec![l],
            None => (0..=n).collect(),
        };
        for split in splits {
            consider((0..n).collect(), split);
        }
    }
    let (_, _, order, split) = best.expect("at least one candidate split");
    let mut perm = order[..split].to_vec();
    perm.push(n);
    perm.extend_from_slice(&order[split..]);
    PermutationPlan::new(perm, split).expect("constructed permutation is valid")
}

fn resolve_plan(sample_shape: &[usize], k: usize, cfg: &CompressionConfig) -> Result<PermutationPlan> {
    let n = sample_shape.len();
    let fixed = match cfg.core_position {
        CorePosition::Auto => None,
        CorePosition::Fixed(pos) => {
            if pos == 0 || pos > n + 1 {
                return invalid(format!("core position {} outside 1..={}", pos, n + 1));
            }
            Some(pos - 1)
        }
    };
    match &cfg.permute {
        PermuteMode::Auto => Ok(best_plan(sample_shape, k, fixed, true)),
        PermuteMode::None => Ok(best_plan(sample_shape, k, fixed, false)),
        PermuteMode::Explicit(plan) => {
            if plan.len() != n + 1 {
                return invalid(format!(
                    "explicit plan covers {} modes, training tensor has {}",
                    plan.len(),
                    n + 1
                ));
            }
            if plan.perm()[plan.sample_axis()] != n {
                return invalid("explicit plan must place the trailing (sample) mode at its sample axis");
            }
            if let Some(s) = fixed {
                if s != plan.sample_axis() {
                    return invalid("core position disagrees with the explicit plan");
                }
            }
            Ok(plan.clone())
        }
    }
}

/// Trains on a training tensor `I_1 × … × I_N × K` (samples stacked along
/// the trailing mode).
pub fn mps_train(x: &DenseTensor, cfg: &CompressionConfig) -> Result<MpsModel> {
    MpsModel::train(x, cfg)
}

/// Projects a test sample `I_1 × … × I_N` to its `Δ_{n-1} × Δ_n` core.
pub fn mps_compress_test(model: &MpsModel, y: &DenseTensor) -> Result<Matrix> {
    model.compress(y)
}

pub fn truncate_cores(model: &MpsModel, dims: (usize, usize)) -> Result<MpsModel> {
    model.truncate_cores(dims)
}

impl MpsModel {
    pub fn train(x: &DenseTensor, cfg: &CompressionConfig) -> Result<MpsModel> {
        cfg.validate()?;
        if x.order() < 2 {
            return invalid("training tensor needs at least one sample mode plus the sample axis");
        }
        let n = x.order() - 1;
        let k = x.shape()[n];
        let plan = resolve_plan(&x.shape()[..n], k, cfg)?;
        if x.data().iter().any(|v| !v.is_finite()) {
            return invalid("training tensor contains non-finite entries");
        }
        if x.data().iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateInput("training tensor is zero".into()));
        }
        let xp = permute_modes(x, &plan)?;
        let dims = xp.shape().to_vec();
        let s = plan.sample_axis();

        let mut bond_dims = vec![1usize; n + 2];
        let mut steps = Vec::with_capacity(n);
        let mut left = Vec::with_capacity(s);
        let mut right = Vec::with_capacity(n - s);
        let mut rem = xp.into_data();

        // left-to-right: W = (Δ_{j-1}·I_j) × rest, keep U, carry S·V
        let mut bond = 1;
        for (j, &d) in dims.iter().enumerate().take(s) {
            let rows = bond * d;
            let cols = rem.len() / rows;
            let w = Matrix::from_vec(rows, cols, rem);
            let svd = linalg::truncated_svd_with(&w, cfg.epsilon, cfg.threshold_mode)?;
            steps.push(step_report(j + 1, rows, cols, &svd));
            rem = svd.sv().data.into();
            bond = svd.delta;
            bond_dims[j + 1] = bond;
            left.push(svd.u);
        }

        // right-to-left: W = rest × (I_j·Δ_{j+1}), keep V, carry U·S
        let mut rbond = 1;
        for j in (s + 1..=n).rev() {
            let cols = dims[j] * rbond;
            let rows = rem.len() / cols;
            let w = Matrix::from_vec(rows, cols, rem);
            let svd = linalg::truncated_svd_with(&w, cfg.epsilon, cfg.threshold_mode)?;
            steps.push(step_report(j, rows, cols, &svd));
            rem = svd.us().data.into();
            rbond = svd.delta;
            bond_dims[j] = rbond;
            right.push(svd.v);
        }
        right.reverse();

        // remaining buffer is (Δ_{n-1}, K, Δ_n)
        let cores = split_cores(&rem, bond, k, rbond);
        let mut model = MpsModel {
            plan,
            dims,
            left,
            right,
            cores,
            bond_dims,
            epsilon: cfg.epsilon,
            steps,
        };
        if let Some(t) = cfg.further_truncation {
            model = model.truncate_cores(t)?;
        }
        Ok(model)
    }

    /// Convenience wrapper stacking `samples` before training.
    pub fn train_samples(samples: &[DenseTensor], cfg: &CompressionConfig) -> Result<MpsModel> {
        let x = DenseTensor::concat_samples(samples)?;
        Self::train(&x, cfg)
    }

    pub fn plan(&self) -> &PermutationPlan {
        &self.plan
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `Δ_0 … Δ_{N+1}` with `Δ_0 = Δ_{N+1} = 1`.
    pub fn bond_dims(&self) -> &[usize] {
        &self.bond_dims
    }

    /// Extents of the permuted training tensor, sample mode included.
    pub fn permuted_dims(&self) -> &[usize] {
        &self.dims
    }

    /// One-based position `n` of the core in the chain.
    pub fn core_position(&self) -> usize {
        self.plan.core_position()
    }

    /// `(Δ_{n-1}, Δ_n)`.
    pub fn core_shape(&self) -> (usize, usize) {
        let s = self.plan.sample_axis();
        (self.bond_dims[s], self.bond_dims[s + 1])
    }

    pub fn feature_count(&self) -> usize {
        let (a, b) = self.core_shape();
        a * b
    }

    pub fn n_samples(&self) -> usize {
        self.cores.len()
    }

    /// Shape of a single (unpermuted) sample.
    pub fn sample_shape(&self) -> Vec<usize> {
        let inv = self.plan.inverse();
        let full: Vec<usize> = inv.perm().iter().map(|&p| self.dims[p]).collect();
        full[..full.len() - 1].to_vec()
    }

    pub fn cores(&self) -> &[Matrix] {
        &self.cores
    }

    pub fn steps(&self) -> &[SweepStep] {
        &self.steps
    }

    /// Left blocks as `(Δ_{j-1}·I_j) × Δ_j` matrices, chain order.
    pub fn left_factors(&self) -> &[Matrix] {
        &self.left
    }

    /// Right blocks as `Δ_{j-1} × (I·Δ_j)` matrices, chain order.
    pub fn right_factors(&self) -> &[Matrix] {
        &self.right
    }

    /// `B^{(j+1)}[i]`, the `Δ_j × Δ_{j+1}` slice of left block `j` (zero-based).
    pub fn left_slice(&self, j: usize, i: usize) -> Matrix {
        let u = &self.left[j];
        let db = self.bond_dims[j];
        Matrix::from_fn(db, u.ncols(), |a, b| u[(a + db * i, b)])
    }

    /// Slice `i` of the `t`-th right block (zero-based, chain order), shape
    /// `Δ_{j-1} × Δ_j`.
    pub fn right_slice(&self, t: usize, i: usize) -> Matrix {
        let v = &self.right[t];
        let axis = self.plan.sample_axis() + 1 + t;
        let d = self.dims[axis];
        let next = self.bond_dims[axis + 1];
        Matrix::from_fn(v.nrows(), next, |a, b| v[(a, i + d * b)])
    }

    /// Projects one sample through the common factors.
    pub fn compress(&self, y: &DenseTensor) -> Result<Matrix> {
        let order = self.plan.sample_mode_order();
        let expected = self.sample_shape();
        if y.shape() != expected.as_slice() {
            return invalid(format!(
                "sample shape {:?} does not match training shape {:?}",
                y.shape(),
                expected
            ));
        }
        let yp = y.permute_axes(&order)?;
        let s = self.plan.sample_axis();
        let mut rem = Matrix::from_vec(1, yp.len(), yp.into_data());
        let mut bond = 1;
        for (u, &d) in self.left.iter().zip(&self.dims) {
            let rows = bond * d;
            let cols = rem.len() / rows;
            let w = rem.reshape_generic(nalgebra::Dyn(rows), nalgebra::Dyn(cols));
            rem = u.tr_mul(&w);
            bond = u.ncols();
        }
        let mut rbond = 1;
        for (t, v) in self.right.iter().enumerate().rev() {
            let cols = self.dims[s + 1 + t] * rbond;
            let rows = rem.len() / cols;
            let w = rem.reshape_generic(nalgebra::Dyn(rows), nalgebra::Dyn(cols));
            rem = w * v.transpose();
            rbond = v.nrows();
        }
        Ok(rem.reshape_generic(nalgebra::Dyn(bond), nalgebra::Dyn(rbond)))
    }

    pub fn compress_batch(&self, ys: &[DenseTensor]) -> Result<Vec<Matrix>> {
        ys.iter().map(|y| self.compress(y)).collect()
    }

    /// Keeps the leading `dims.0` rows and `dims.1` columns of every core and
    /// slices the neighbouring factor blocks to match.
    pub fn truncate_cores(&self, dims: (usize, usize)) -> Result<MpsModel> {
        let (a, b) = dims;
        let (da, db) = self.core_shape();
        if a == 0 || b == 0 || a > da || b > db {
            return invalid(format!(
                "truncation {:?} must lie within 1..={} × 1..={}",
                dims, da, db
            ));
        }
        let s = self.plan.sample_axis();
        let mut out = self.clone();
        out.cores = self
            .cores
            .iter()
            .map(|g| g.view((0, 0), (a, b)).into_owned())
            .collect();
        if let Some(u) = out.left.last_mut() {
            *u = u.columns(0, a).into_owned();
        }
        if let Some(v) = out.right.first_mut() {
            *v = v.rows(0, b).into_owned();
        }
        out.bond_dims[s] = a;
        out.bond_dims[s + 1] = b;
        Ok(out)
    }

    /// Contracts the chain back to the full `I_1 × … × I_N × K` tensor.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let s = self.plan.sample_axis();
        let (da, db) = self.core_shape();
        let k = self.cores.len();
        let mut buf = vec![0.0; da * k * db];
        for (kk, g) in self.cores.iter().enumerate() {
            for b in 0..db {
                for a in 0..da {
                    buf[a + da * (kk + k * b)] = g[(a, b)];
                }
            }
        }
        let mut rem = Matrix::from_vec(buf.len(), 1, buf);
        let mut rbond = db;
        for (t, v) in self.right.iter().enumerate() {
            let rows = rem.len() / rbond;
            let w = rem.reshape_generic(nalgebra::Dyn(rows), nalgebra::Dyn(rbond));
            rem = w * v;
            rbond = self.bond_dims[s + 2 + t];
        }
        let mut bond = da;
        for (j, u) in self.left.iter().enumerate().rev() {
            let cols = rem.len() / bond;
            let w = rem.reshape_generic(nalgebra::Dyn(bond), nalgebra::Dyn(cols));
            rem = u * w;
            bond = self.bond_dims[j];
        }
        let permuted = DenseTensor::new(self.dims.clone(), rem.data.into())?;
        permute_modes(&permuted, &self.plan.inverse())
    }

    /// `‖Σ_i B[i]ᵀB[i] − I‖₂` for every left block.
    pub fn left_canonical_defects(&self) -> Vec<f64> {
        self.left.iter().map(linalg::column_orthogonality_defect).collect()
    }

    /// `‖Σ_i C[i]C[i]ᵀ − I‖₂` for every right block.
    pub fn right_canonical_defects(&self) -> Vec<f64> {
        self.right.iter().map(linalg::row_orthogonality_defect).collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = ByteWriter::new(w);
        w.bytes(MAGIC)?;
        w.u8(VERSION)?;
        w.f64(self.epsilon)?;
        w.usize(self.dims.len())?;
        for &d in &self.dims {
            w.usize(d)?;
        }
        for &p in self.plan.perm() {
            w.usize(p)?;
        }
        w.usize(self.plan.sample_axis())?;
        w.usize(self.bond_dims.len())?;
        for &b in &self.bond_dims {
            w.usize(b)?;
        }
        for m in self.left.iter().chain(&self.right).chain(&self.cores) {
            w.f64_slice(m.as_slice())?;
        }
        w.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<MpsModel> {
        const LIMIT: u64 = 1 << 40;
        let mut r = ByteReader::new(r);
        r.magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(r.format_error(format!("unsupported version {}", version)));
        }
        let epsilon = r.f64()?;
        let n_axes = r.usize_max(64, "axis count")?;
        if n_axes < 2 {
            return Err(r.format_error("model needs at least two axes"));
        }
        let mut dims = Vec::with_capacity(n_axes);
        for _ in 0..n_axes {
            dims.push(r.usize_max(LIMIT, "extent")?);
        }
        let mut perm = Vec::with_capacity(n_axes);
        for _ in 0..n_axes {
            perm.push(r.usize_max(LIMIT, "permutation entry")?);
        }
        let sample_axis = r.usize_max(LIMIT, "sample axis")?;
        let plan = PermutationPlan::new(perm, sample_axis).map_err(|e| r.format_error(e.to_string()))?;
        if plan.perm()[sample_axis] != n_axes - 1 || dims.contains(&0) {
            return Err(r.format_error("inconsistent plan"));
        }
        let n_bonds = r.usize_max(65, "bond count")?;
        if n_bonds != n_axes + 1 {
            return Err(r.format_error(format!("expected {} bond dimensions, found {}", n_axes + 1, n_bonds)));
        }
        let mut bond_dims = Vec::with_capacity(n_bonds);
        for _ in 0..n_bonds {
            bond_dims.push(r.usize_max(LIMIT, "bond dimension")?);
        }
        if bond_dims[0] != 1 || bond_dims[n_bonds - 1] != 1 || bond_dims.contains(&0) {
            return Err(r.format_error("bond dimensions must be positive with unit boundaries"));
        }
        let mut left = Vec::with_capacity(sample_axis);
        for j in 0..sample_axis {
            let (rows, cols) = (bond_dims[j] * dims[j], bond_dims[j + 1]);
            left.push(Matrix::from_vec(rows, cols, r.f64_vec(rows * cols)?));
        }
        let mut right = Vec::new();
        for j in sample_axis + 1..n_axes {
            let (rows, cols) = (bond_dims[j], dims[j] * bond_dims[j + 1]);
            right.push(Matrix::from_vec(rows, cols, r.f64_vec(rows * cols)?));
        }
        let (da, db) = (bond_dims[sample_axis], bond_dims[sample_axis + 1]);
        let mut cores = Vec::with_capacity(dims[sample_axis]);
        for _ in 0..dims[sample_axis] {
            cores.push(Matrix::from_vec(da, db, r.f64_vec(da * db)?));
        }
        r.expect_end()?;
        Ok(MpsModel {
            plan,
            dims,
            left,
            right,
            cores,
            bond_dims,
            epsilon,
            steps: Vec::new(),
        })
    }
}

fn step_report(bond: usize, rows: usize, cols: usize, svd: &linalg::TruncatedSvd) -> SweepStep {
    let diag = svd_diagnostics(svd);
    SweepStep {
        bond,
        rows,
        cols,
        full_rank: svd.full_rank,
        delta: svd.delta,
        discarded_mass: svd.discarded_mass,
        discarded_energy: svd.discarded_energy(),
        entropy: diag.entropy,
        truncation_loss: diag.truncation_loss,
    }
}

fn split_cores(buf: &[f64], da: usize, k: usize, db: usize) -> Vec<Matrix> {
    (0..k)
        .map(|kk| Matrix::from_fn(da, db, |a, b| buf[a + da * (kk + k * b)]))
        .collect()
}
