// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labelled tensor collections, the `TDS1` container, synthetic data and
//! seeded holdout splits.
//!
//! Randomness comes from `ChaCha8Rng` (rand_chacha) seeded with
//! `seed_from_u64`, so generated data and splits are identical across
//! platforms for a given seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use mps_core::container::{ByteReader, ByteWriter};
use mps_core::DenseTensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{usage, Result};

const MAGIC: &[u8; 4] = b"TDS1";
const MAX_ELEMENTS: u64 = 1 << 36;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<DenseTensor>,
    pub labels: Vec<u32>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<DenseTensor>, labels: Vec<u32>) -> Result<Self> {
        if samples.is_empty() {
            return usage("dataset has no samples");
        }
        if samples.len() != labels.len() {
            return usage(format!("{} samples but {} labels", samples.len(), labels.len()));
        }
        let shape = samples[0].shape();
        if samples.iter().any(|s| s.shape() != shape) {
            return usage("samples have differing shapes");
        }
        Ok(Self {
            name: name.into(),
            samples,
            labels,
        })
    }

    pub fn sample_shape(&self) -> &[usize] {
        self.samples[0].shape()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample indices per class, in dataset order.
    pub fn class_indices(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            out.entry(l).or_default().push(i);
        }
        out
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<Dataset> {
        Dataset::new(
            name,
            indices.iter().map(|&i| self.samples[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = ByteWriter::new(w);
        let shape = self.sample_shape();
        if shape.len() > u8::MAX as usize {
            return usage(format!("order {} does not fit the container", shape.len()));
        }
        w.bytes(MAGIC)?;
        w.u8(shape.len() as u8)?;
        for &d in shape {
            w.usize(d)?;
        }
        w.usize(self.len())?;
        for &l in &self.labels {
            w.u32(l)?;
        }
        for s in &self.samples {
            w.f64_slice(s.data())?;
        }
        w.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R, name: impl Into<String>) -> Result<Dataset> {
        let mut r = ByteReader::new(r);
        r.magic(MAGIC)?;
        let order = r.u8()? as usize;
        if order == 0 {
            return Err(r.format_error("sample order is zero").into());
        }
        let mut shape = Vec::with_capacity(order);
        for _ in 0..order {
            let at = r.offset();
            let d = r.usize_max(MAX_ELEMENTS, "extent")?;
            if d == 0 {
                return Err(mps_core::Error::Format {
                    offset: at,
                    message: "zero extent".into(),
                }
                .into());
            }
            shape.push(d);
        }
        let per: u64 = shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64)).unwrap_or(u64::MAX);
        if per > MAX_ELEMENTS {
            return Err(r.format_error(format!("sample of {} elements exceeds limit", per)).into());
        }
        let count = r.usize_max(MAX_ELEMENTS / per, "sample count")?;
        if count == 0 {
            return Err(r.format_error("dataset has no samples").into());
        }
        let mut labels = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            labels.push(r.u32()?);
        }
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let data = r.f64_vec(per as usize)?;
            samples.push(DenseTensor::new(shape.clone(), data)?);
        }
        r.expect_end()?;
        Dataset::new(name, samples, labels)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    ds.write_to(BufWriter::new(file))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    Dataset::read_from(BufReader::new(file), stem(path))
}

/// Writes one CSV record per sample: label, shape as `AxBxC`, then the
/// entries in storage order (first index fastest).
pub fn write_csv<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).has_headers(false).from_writer(w);
    let shape = ds
        .sample_shape()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    for (s, l) in ds.samples.iter().zip(&ds.labels) {
        let mut rec = vec![l.to_string(), shape.clone()];
        rec.extend(s.data().iter().map(|v| format!("{:?}", v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R, name: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(r);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| usage::<()>(format!("csv record {}: {}", line + 1, what)).unwrap_err();
        let label: u32 = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad label"))?;
        let shape: Vec<usize> = rec
            .get(1)
            .ok_or_else(|| bad("missing shape"))?
            .split('x')
            .map(|d| d.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad shape"))?;
        let data: Vec<f64> = rec
            .iter()
            .skip(2)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad value"))?;
        samples.push(DenseTensor::new(shape, data).map_err(|e| bad(&e.to_string()))?);
        labels.push(label);
    }
    Dataset::new(name, samples, labels)
}

/// `classes` rank-1 templates of unit norm, each sample a template plus
/// i.i.d. `N(0, sigma²)` noise. Samples are ordered class by class.
pub fn synth_dataset(classes: usize, per_class: usize, shape: &[usize], sigma: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return usage("synthetic data needs at least two classes");
    }
    if per_class == 0 {
        return usage("synthetic data needs at least one sample per class");
    }
    if shape.is_empty() || shape.contains(&0) {
        return usage(format!("invalid sample shape {:?}", shape));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return usage(format!("invalid noise sigma {}", sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<DenseTensor> = (0..classes).map(|_| rank_one_template(shape, &mut rng)).collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, t) in templates.iter().enumerate() {
        for _ in 0..per_class {
            let mut s = t.clone();
            for v in s.data_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
            samples.push(s);
            labels.push(c as u32);
        }
    }
    Dataset::new(format!("synth-c{}-m{}-s{}", classes, per_class, seed), samples, labels)
}

/// Unit-norm outer product of Gaussian mode vectors, drawn from `rng`.
pub fn rank_one_template(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    let vectors: Vec<Vec<f64>> = shape
        .iter()
        .map(|&d| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    Ok(DenseTensor::from_fn(shape.to_vec(), |idx| {
        idx.iter().zip(&vectors).map(|(&i, v)| v[i]).product()
    })?)
}

/// Training and test index sets of one split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class training count for holdout ratio `r = L/K` (test over train).
pub fn train_count(class_size: usize, ratio: f64) -> usize {
    let k = (class_size as f64 / (1.0 + ratio)).round() as usize;
    k.clamp(1, class_size - 1)
}

/// Per-class random partition with test/train ratio `ratio`; indices come
/// back sorted.
pub fn holdout_split(ds: &Dataset, ratio: f64, rng: &mut ChaCha8Rng) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return usage(format!("holdout ratio {} outside (0, 1)", ratio));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut idx) in ds.class_indices() {
        if idx.len() < 2 {
            return usage(format!("class {} has fewer than two samples", label));
        }
        idx.shuffle(rng);
        let k = train_count(idx.len(), ratio);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Generator for iteration `iteration` of a run seeded with `seed`: the
/// seed selects the key, the iteration the ChaCha stream.
pub fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_counts_follow_ratio() {
        assert_eq!(train_count(72, 0.5), 48);
        assert_eq!(train_count(2, 0.5), 1);
        assert_eq!(train_count(30, 0.5), 20);
        assert_eq!(train_count(3, 0.01), 2);
    }

    #[test]
    fn templates_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = rank_one_template(&[4, 3, 2], &mut rng).unwrap();
        assert!((t.frobenius_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_classes_are_constant() {
        let ds = synth_dataset(3, 4, &[3, 3], 0.0, 1).unwrap();
        for (c, idx) in ds.class_indices() {
            assert!(idx.iter().all(|&i| ds.samples[i] == ds.samples[idx[0]]), "class {c}");
        }
    }

    #[test]
    fn synth_rejects_bad_arguments() {
        assert!(synth_dataset(1, 4, &[3], 0.1, 0).is_err());
        assert!(synth_dataset(2, 0, &[3], 0.1, 0).is_err());
        assert!(synth_dataset(2, 2, &[3, 0], 0.1, 0).is_err());
    }
}
