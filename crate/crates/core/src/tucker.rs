// SPDX-License-Identifier: MIT OR Apache-2.0

//! Tucker compression baseline: HOSVD initialisation followed by HOOI
//! (alternating updates of one orthogonal factor at a time).
//!
//! Only the `N` sample modes get factors; the trailing sample mode is left
//! uncompressed so the core `𝓡` holds one `Δ_1 × … × Δ_N` block per sample.

use std::io::{Read, Write};

use crate::container::{ByteReader, ByteWriter};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, ThresholdMode};
use crate::tensor::{DenseTensor, Matrix};

const MAGIC: &[u8; 4] = b"TUK1";
const VERSION: u8 = 1;

/// Relative change in the fit residual below which the iteration stops.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum TuckerRanks {
    Fixed(Vec<usize>),
    /// Per-mode rank from the singular-value mass rule on each unfolding.
    Threshold(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HooiConfig {
    pub ranks: TuckerRanks,
    pub max_iters: usize,
    pub tolerance: f64,
    pub threshold_mode: ThresholdMode,
}

impl HooiConfig {
    pub fn fixed(ranks: Vec<usize>) -> Self {
        Self {
            ranks: TuckerRanks::Fixed(ranks),
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            threshold_mode: ThresholdMode::Mass,
        }
    }

    pub fn threshold(epsilon: f64) -> Self {
        Self {
            ranks: TuckerRanks::Threshold(epsilon),
            ..Self::fixed(Vec::new())
        }
    }
}

/// Lower bounds on the per-mode residual from the spectrum of each
/// unfolding, under two readings of how many trailing eigenvalues to sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeBound {
    pub mode: usize,
    pub rank: usize,
    pub delta: usize,
    /// Sum of the `r − Δ` smallest eigenvalues of `X₍ⱼ₎X₍ⱼ₎ᵀ`.
    pub discarded: f64,
    /// Sum of the `r − Δ − 1` smallest eigenvalues.
    pub discarded_minus_one: f64,
}

#[derive(Clone, Debug)]
pub struct TuckerModel {
    factors: Vec<Matrix>,
    core: DenseTensor,
    fit_residual: f64,
    residual_history: Vec<f64>,
    iterations_run: usize,
    epsilon: Option<f64>,
    bounds: Vec<ModeBound>,
}

pub fn hooi_train(x: &DenseTensor, cfg: &HooiConfig) -> Result<TuckerModel> {
    TuckerModel::train(x, cfg)
}

pub fn tucker_compress_train(model: &TuckerModel) -> Vec<DenseTensor> {
    model.training_cores()
}

pub fn tucker_compress_test(model: &TuckerModel, y: &DenseTensor) -> Result<DenseTensor> {
    model.compress(y)
}

impl TuckerModel {
    /// Trains on `I_1 × … × I_N × K`, samples stacked along the trailing mode.
    pub fn train(x: &DenseTensor, cfg: &HooiConfig) -> Result<TuckerModel> {
        if x.order() < 2 {
            return invalid("training tensor needs at least one sample mode plus the sample axis");
        }
        if cfg.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        let n = x.order() - 1;
        let shape = x.shape().to_vec();
        if let TuckerRanks::Fixed(r) = &cfg.ranks {
            if r.len() != n {
                return invalid(format!("{} ranks given for {} modes", r.len(), n));
            }
            for (j, (&d, &i)) in r.iter().zip(&shape).enumerate() {
                if d == 0 || d > i {
                    return invalid(format!("rank {} for mode {} outside 1..={}", d, j, i));
                }
            }
        }
        if let TuckerRanks::Threshold(eps) = cfg.ranks {
            if !(eps > 0.0 && eps <= 1.0) {
                return invalid(format!("epsilon {} outside (0, 1]", eps));
            }
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return invalid("training tensor contains non-finite entries");
        }
        let norm_sq = x.frobenius_norm().powi(2);
        if norm_sq == 0.0 {
            return Err(Error::DegenerateInput("training tensor is zero".into()));
        }

        // HOSVD initialisation
        let mut factors = Vec::with_capacity(n);
        let mut bounds = Vec::with_capacity(n);
        for j in 0..n {
            let unfolding = x.matricize(j)?;
            let spectrum = linalg::singular_values(&unfolding)?;
            let delta = match &cfg.ranks {
                TuckerRanks::Fixed(r) => r[j],
                TuckerRanks::Threshold(eps) => linalg::threshold_rank(&spectrum, *eps, cfg.threshold_mode),
            };
            bounds.push(mode_bound(j, &spectrum, delta));
            factors.push(linalg::leading_left_singular_vectors(&unfolding, delta)?);
        }

        let mut core = project_all(x, &factors, None)?;
        let mut residual = residual_of(x, &core, &factors)?;
        let mut history = vec![residual];
        let mut iterations = 0;
        for _ in 0..cfg.max_iters {
            for j in 0..n {
                let partial = project_all(x, &factors, Some(j))?;
                let unfolding = partial.matricize(j)?;
                let delta = factors[j].ncols();
                factors[j] = linalg::leading_left_singular_vectors(&unfolding, delta)?;
            }
            core = project_all(x, &factors, None)?;
            let next = residual_of(x, &core, &factors)?;
            iterations += 1;
            history.push(next);
            let prev = residual;
            residual = next;
            if prev <= 0.0 || (prev - next) / prev < cfg.tolerance {
                break;
            }
        }

        Ok(TuckerModel {
            factors,
            core,
            fit_residual: residual,
            residual_history: history,
            iterations_run: iterations,
            epsilon: match cfg.ranks {
                TuckerRanks::Threshold(e) => Some(e),
                TuckerRanks::Fixed(_) => None,
            },
            bounds,
        })
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// `Δ_1 × … × Δ_N × K`.
    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.ncols()).collect()
    }

    pub fn sample_shape(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    pub fn feature_count(&self) -> usize {
        self.ranks().iter().product()
    }

    pub fn n_samples(&self) -> usize {
        *self.core.shape().last().unwrap()
    }

    /// `‖𝒳 − 𝓡 ×₁ U¹ ⋯ ×_N Uᴺ‖²` after the last iteration.
    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    /// Residual after initialisation followed by one entry per iteration.
    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    /// Threshold used to pick the ranks, if they were not fixed.
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn mode_bounds(&self) -> &[ModeBound] {
        &self.bounds
    }

    /// Per-sample cores, the slices of `𝓡` along the sample mode.
    pub fn training_cores(&self) -> Vec<DenseTensor> {
        (0..self.n_samples())
            .map(|k| self.core.trailing_slice(k).expect("slice index in range"))
            .collect()
    }

    /// `y ×₁ U¹ᵀ ⋯ ×_N Uᴺᵀ`.
    pub fn compress(&self, y: &DenseTensor) -> Result<DenseTensor> {
        if y.shape() != self.sample_shape().as_slice() {
            return invalid(format!(
                "sample shape {:?} does not match training shape {:?}",
                y.shape(),
                self.sample_shape()
            ));
        }
        let mut t = y.clone();
        for (j, u) in self.factors.iter().enumerate() {
            t = t.mode_product(&u.transpose(), j)?;
        }
        Ok(t)
    }

    /// `𝓡 ×₁ U¹ ⋯ ×_N Uᴺ`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        expand(&self.core, &self.factors)
    }

    /// Keeps the leading `dims[j]` components of each mode.
    pub fn truncate_core(&self, dims: &[usize]) -> Result<TuckerModel> {
        let ranks = self.ranks();
        if dims.len() != ranks.len() {
            return invalid(format!("{} dimensions given for {} modes", dims.len(), ranks.len()));
        }
        if dims.iter().zip(&ranks).any(|(&d, &r)| d == 0 || d > r) {
            return invalid(format!("truncation {:?} must lie within {:?}", dims, ranks));
        }
        let mut core = self.core.clone();
        for (j, &d) in dims.iter().enumerate() {
            let select = Matrix::identity(d, ranks[j]);
            core = core.mode_product(&select, j)?;
        }
        let factors = self
            .factors
            .iter()
            .zip(dims)
            .map(|(u, &d)| u.columns(0, d).into_owned())
            .collect();
        Ok(TuckerModel {
            factors,
            core,
            ..self.clone()
        })
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = ByteWriter::new(w);
        w.bytes(MAGIC)?;
        w.u8(VERSION)?;
        w.f64(self.epsilon.unwrap_or(f64::NAN))?;
        w.usize(self.factors.len())?;
        for u in &self.factors {
            w.usize(u.nrows())?;
        }
        w.usize(self.n_samples())?;
        for u in &self.factors {
            w.usize(u.ncols())?;
        }
        w.f64(self.fit_residual)?;
        w.usize(self.iterations_run)?;
        for u in &self.factors {
            w.f64_slice(u.as_slice())?;
        }
        w.f64_slice(self.core.data())?;
        w.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<TuckerModel> {
        const LIMIT: u64 = 1 << 40;
        let mut r = ByteReader::new(r);
        r.magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(r.format_error(format!("unsupported version {}", version)));
        }
        let eps = r.f64()?;
        let n = r.usize_max(64, "mode count")?;
        if n == 0 {
            return Err(r.format_error("model has no modes"));
        }
        let mut extents = Vec::with_capacity(n);
        for _ in 0..n {
            extents.push(r.usize_max(LIMIT, "extent")?);
        }
        let k = r.usize_max(LIMIT, "sample count")?;
        let mut ranks = Vec::with_capacity(n);
        for j in 0..n {
            let d = r.usize_max(LIMIT, "rank")?;
            if d == 0 || d > extents[j] {
                return Err(r.format_error(format!("rank {} invalid for extent {}", d, extents[j])));
            }
            ranks.push(d);
        }
        if k == 0 {
            return Err(r.format_error("model has no samples"));
        }
        let fit_residual = r.f64()?;
        let iterations_run = r.usize_max(LIMIT, "iteration count")?;
        let mut factors = Vec::with_capacity(n);
        for j in 0..n {
            factors.push(Matrix::from_vec(extents[j], ranks[j], r.f64_vec(extents[j] * ranks[j])?));
        }
        let mut core_shape = ranks.clone();
        core_shape.push(k);
        let len = core_shape.iter().product();
        let core = DenseTensor::new(core_shape, r.f64_vec(len)?)?;
        r.expect_end()?;
        Ok(TuckerModel {
            factors,
            core,
            fit_residual,
            residual_history: vec![fit_residual],
            iterations_run,
            epsilon: if eps.is_nan() { None } else { Some(eps) },
            bounds: Vec::new(),
        })
    }
}

fn mode_bound(mode: usize, spectrum: &[f64], delta: usize) -> ModeBound {
    let r = spectrum.len();
    // spectrum is descending, so the smallest values are at the tail
    let tail = |count: usize| -> f64 { spectrum[r - count.min(r)..].iter().map(|s| s * s).sum() };
    let discarded_count = r.saturating_sub(delta);
    ModeBound {
        mode,
        rank: r,
        delta,
        discarded: tail(discarded_count),
        discarded_minus_one: tail(discarded_count.saturating_sub(1)),
    }
}

/// `x ×_i U^(i)ᵀ` for every factor except `skip`.
fn project_all(x: &DenseTensor, factors: &[Matrix], skip: Option<usize>) -> Result<DenseTensor> {
    // shrink the largest reductions first
    let mut order: Vec<usize> = (0..factors.len()).filter(|&j| Some(j) != skip).collect();
    order.sort_by(|&a, &b| {
        let ra = factors[a].ncols() as f64 / factors[a].nrows() as f64;
        let rb = factors[b].ncols() as f64 / factors[b].nrows() as f64;
        ra.total_cmp(&rb).then(a.cmp(&b))
    });
    let mut t = x.clone();
    for j in order {
        t = t.mode_product(&factors[j].transpose(), j)?;
    }
    Ok(t)
}

fn expand(core: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    let mut t = core.clone();
    for (j, u) in factors.iter().enumerate() {
        t = t.mode_product(u, j)?;
    }
    Ok(t)
}

fn residual_of(x: &DenseTensor, core: &DenseTensor, factors: &[Matrix]) -> Result<f64> {
    let approx = expand(core, factors)?;
    Ok(x.data()
        .iter()
        .zip(approx.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}
