// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mps_core::linalg::ThresholdMode;
use mps_core::{CorePosition, MpsModel, PermutationPlan, PermuteMode, TuckerModel};
use serde_json::json;

use crate::bench::{run_grid, timing_benchmark};
use crate::dataset::{load_dataset, read_csv, save_dataset, synth_dataset, write_csv, Dataset};
use crate::error::{usage, BenchError, Result};
use crate::pipeline::{run_pipeline, Classifier, Method, PipelineConfig, RunReport};

#[derive(Debug, Parser)]
#[command(name = "mps-bench", version, about = "Tensor-train compression and classification benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic rank-1-template dataset.
    Synth(SynthArgs),
    /// Convert between TDS1 and CSV (direction chosen by the .csv extension).
    Convert(ConvertArgs),
    /// Train a compression model on a whole dataset.
    Compress(CompressArgs),
    /// Project a dataset through a trained model.
    Project(ProjectArgs),
    /// Run the split/compress/classify pipeline.
    Classify(ClassifyArgs),
    /// Parameter sweeps or training-time scaling runs.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Threshold {
    #[default]
    Mass,
    Energy,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 30)]
    pub per_class: usize,
    /// Sample shape, e.g. `8,8,3`.
    #[arg(long, value_delimiter = ',', default_value = "8,8,3")]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "mps")]
    pub method: Method,
    #[arg(long, default_value_t = 0.9)]
    pub epsilon: f64,
    /// Fixed Tucker ranks, e.g. `4,4,2`.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// One-based chain position of the sample mode, or `auto`.
    #[arg(long, default_value = "auto")]
    pub core_pos: String,
    /// `auto`, `none`, or a permutation of `0..=N` where `N` is the sample mode.
    #[arg(long, default_value = "auto")]
    pub permute: String,
    /// Further core truncation: `a,b` for MPS, one value per mode for HOOI.
    #[arg(long, value_delimiter = ',')]
    pub truncate: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = Threshold::Mass)]
    pub threshold: Threshold,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model file (MPS1 or TUK1).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Clone)]
pub struct EvalArgs {
    #[arg(long, default_value = "knn1")]
    pub classifier: Classifier,
    #[arg(long)]
    pub pca: Option<usize>,
    /// Test/train count ratio per class.
    #[arg(long, default_value_t = 0.5)]
    pub holdout: f64,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run iterations on a thread pool (timing fields become unreliable).
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Methods to run, e.g. `mps,hooi`.
    #[arg(long, value_delimiter = ',', default_value = "mps")]
    pub methods: Vec<Method>,
    /// Epsilon grid, e.g. `0.7,0.8,0.9`.
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    pub epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, default_value = "auto")]
    pub core_pos: String,
    #[arg(long, default_value = "auto")]
    pub permute: String,
    #[arg(long, value_delimiter = ',')]
    pub truncate: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = Threshold::Mass)]
    pub threshold: Threshold,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Measure training time over `--sizes` instead of sweeping CSR.
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

pub fn parse_core_position(s: &str) -> Result<CorePosition> {
    if s == "auto" {
        return Ok(CorePosition::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(CorePosition::Fixed(n)),
        _ => usage(format!("--core-pos expects a positive integer or auto, got {s:?}")),
    }
}

/// `auto`, `none`, or a comma list over `0..=N`; the position of `N` (the
/// sample mode) becomes the sample axis.
pub fn parse_permute(s: &str) -> Result<PermuteMode> {
    match s {
        "auto" => Ok(PermuteMode::Auto),
        "none" => Ok(PermuteMode::None),
        _ => {
            let perm: Vec<usize> = s
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| BenchError::Usage(format!("--permute expects auto, none or a list, got {s:?}")))?;
            let n = perm.len().saturating_sub(1);
            let axis = match perm.iter().position(|&p| p == n) {
                Some(a) => a,
                None => return usage(format!("--permute list must contain the sample mode {n}")),
            };
            Ok(PermuteMode::Explicit(PermutationPlan::new(perm, axis)?))
        }
    }
}

fn threshold_mode(t: Threshold) -> ThresholdMode {
    match t {
        Threshold::Mass => ThresholdMode::Mass,
        Threshold::Energy => ThresholdMode::Energy,
    }
}

fn pipeline_config(m: &ModelArgs, e: &EvalArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::new(m.method, m.epsilon);
    cfg.ranks = m.ranks.clone();
    cfg.core_position = parse_core_position(&m.core_pos)?;
    cfg.permute = parse_permute(&m.permute)?;
    cfg.threshold_mode = threshold_mode(m.threshold);
    cfg.truncate = m.truncate.clone();
    cfg.classifier = e.classifier;
    cfg.pca = e.pca;
    cfg.holdout = e.holdout;
    cfg.iterations = e.iters;
    cfg.seed = e.seed;
    cfg.parallel = e.parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_reports(reports: &[RunReport], format: Format, w: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => {
            if let [one] = reports {
                writeln!(w, "{}", one.to_json()?)?;
            } else {
                writeln!(w, "{}", serde_json::to_string_pretty(reports)?)?;
            }
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(RunReport::csv_header())?;
            for r in reports {
                out.write_record(r.csv_row())?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let ds = synth_dataset(a.classes, a.per_class, &a.shape, a.sigma, a.seed)?;
            save_dataset(&ds, &a.out)
        }
        Command::Convert(a) => {
            let ds = if is_csv(&a.input) {
                read_csv(BufReader::new(File::open(&a.input)?), stem(&a.input))?
            } else {
                load_dataset(&a.input)?
            };
            if is_csv(&a.out) {
                write_csv(&ds, BufWriter::new(File::create(&a.out)?))
            } else {
                save_dataset(&ds, &a.out)
            }
        }
        Command::Compress(a) => compress(a),
        Command::Project(a) => project(a),
        Command::Classify(a) => {
            let ds = load_dataset(&a.data)?;
            let cfg = pipeline_config(&a.model, &a.eval)?;
            let report = run_pipeline(&ds, &cfg)?;
            let mut w = open_out(&a.out)?;
            write_reports(&[report], a.format, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Bench(a) => bench(a),
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn compress(a: CompressArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let eval = EvalArgs {
        classifier: Classifier::Knn1,
        pca: None,
        holdout: 0.5,
        iters: 1,
        seed: 0,
        parallel: false,
    };
    let cfg = pipeline_config(&a.model, &eval)?;
    let x = mps_core::DenseTensor::concat_samples(&ds.samples)?;
    let file = BufWriter::new(File::create(&a.out)?);
    let summary = match cfg.method {
        Method::Mps | Method::Ttpca => {
            let m = MpsModel::train(&x, &cfg.mps_config())?;
            m.write_to(file)?;
            json!({
                "model": "mps",
                "perm": m.plan().perm(),
                "core_position": m.core_position(),
                "bond_dims": m.bond_dims(),
                "n_features": m.feature_count(),
            })
        }
        Method::Hooi => {
            let mut m = TuckerModel::train(&x, &cfg.hooi_config())?;
            if let Some(t) = &cfg.truncate {
                m = m.truncate_core(t)?;
            }
            m.write_to(file)?;
            json!({
                "model": "hooi",
                "ranks": m.ranks(),
                "fit_residual": m.fit_residual(),
                "iterations_run": m.iterations_run(),
                "n_features": m.feature_count(),
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

enum AnyModel {
    Mps(MpsModel),
    Hooi(TuckerModel),
}

fn read_model(path: &Path) -> Result<AnyModel> {
    let mut magic = [0u8; 4];
    File::open(path)?.read_exact(&mut magic).map_err(|_| {
        BenchError::Core(mps_core::Error::Format {
            offset: 0,
            message: "file too short for a model header".into(),
        })
    })?;
    let r = BufReader::new(File::open(path)?);
    match &magic {
        b"MPS1" => Ok(AnyModel::Mps(MpsModel::read_from(r)?)),
        b"TUK1" => Ok(AnyModel::Hooi(TuckerModel::read_from(r)?)),
        _ => Err(BenchError::Core(mps_core::Error::Format {
            offset: 0,
            message: format!("unknown model magic {:?}", String::from_utf8_lossy(&magic)),
        })),
    }
}

fn project(a: ProjectArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let ds: Dataset = load_dataset(&a.data)?;
    let rows: Vec<Vec<f64>> = match &model {
        AnyModel::Mps(m) => ds
            .samples
            .iter()
            .map(|s| m.compress(s).map(|q| q.as_slice().to_vec()))
            .collect::<mps_core::Result<_>>()?,
        AnyModel::Hooi(m) => ds
            .samples
            .iter()
            .map(|s| m.compress(s).map(|q| q.data().to_vec()))
            .collect::<mps_core::Result<_>>()?,
    };
    let mut w = open_out(&a.out)?;
    match a.format {
        Format::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(&mut w);
            for (row, label) in rows.iter().zip(&ds.labels) {
                let mut rec = vec![label.to_string()];
                rec.extend(row.iter().map(|v| format!("{:?}", v)));
                out.write_record(&rec)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .zip(&ds.labels)
                .map(|(r, l)| json!({"label": l, "features": r}))
                .collect();
            writeln!(w, "{}", serde_json::to_string_pretty(&items)?)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let mut configs = Vec::new();
    for &method in &a.methods {
        let m = ModelArgs {
            method,
            epsilon: a.epsilon[0],
            ranks: if method == Method::Hooi { a.ranks.clone() } else { None },
            core_pos: a.core_pos.clone(),
            permute: a.permute.clone(),
            truncate: match (&a.truncate, method) {
                (Some(t), Method::Hooi) if t.len() != 2 => Some(t.clone()),
                (Some(t), Method::Mps | Method::Ttpca) if t.len() == 2 => Some(t.clone()),
                _ => None,
            },
            threshold: a.threshold,
        };
        configs.push(pipeline_config(&m, &a.eval)?);
    }
    let mut w = open_out(&a.out)?;
    if a.timing {
        if a.sizes.is_empty() {
            return usage("--timing needs --sizes");
        }
        let rows = timing_benchmark(&ds, &configs, &a.sizes, a.repeats, a.eval.seed)?;
        match a.format {
            Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?,
            Format::Csv => {
                let mut out = csv::Writer::from_writer(&mut w);
                out.write_record(["method", "n_train", "n_features", "median_s"])?;
                for r in &rows {
                    out.write_record([
                        serde_json::to_value(r.method)?.as_str().unwrap_or_default().to_string(),
                        r.n_train.to_string(),
                        r.n_features.to_string(),
                        format!("{:.6}", r.median_s),
                    ])?;
                }
                out.flush()?;
            }
        }
    } else {
        let mut grids = Vec::new();
        for cfg in &configs {
            let truncations = vec![cfg.truncate.clone()];
            grids.push(run_grid(&ds, cfg, &a.epsilon, &truncations)?);
        }
        match a.format {
            Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&grids)?)?,
            Format::Csv => {
                let runs: Vec<RunReport> = grids.into_iter().flat_map(|g| g.runs).collect();
                write_reports(&runs, Format::Csv, &mut w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
