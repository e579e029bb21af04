//! Command-line front end. Every subcommand prints a JSON summary on
//! success; failures print one `error: ...` line. Exit codes: 0 success,
//! 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::distortion::{apply_distortion, DistortionKind, DistortionSpec};
use crate::image::ImageBuf;
use crate::metrics::Mapping;
use crate::net::{count_params, Checkpoint, CheckpointMeta, ModelConfig, Preset, TrainHyper, Variant};
use crate::pipeline::{
    ablation_run, analyze, correlate_external, eval, generate, split, table1_csv, table4_csv, train_from_manifest, GenerateOptions, Manifest,
    RecordSet, Scorer, Subset,
};
use crate::sim::Task;
use crate::tensor::OptimizerKind;

#[derive(Parser, Debug)]
#[command(name = "epdkit", version, about = "Embodied preference dataset toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply one distortion to a PNG.
    Distort {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        kind: DistortionKind,
        #[arg(long)]
        level: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run episodes and write the images and manifest.
    Generate {
        #[arg(long, default_value_t = 5)]
        scenes: usize,
        #[arg(long, value_delimiter = ',', default_value = "push,pick")]
        tasks: Vec<Task>,
        /// Comma-separated kind names, or `all`.
        #[arg(long, default_value = "all")]
        kinds: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        levels: Vec<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-step traces.
        #[arg(long)]
        traces: bool,
    },
    /// Re-split a manifest 8:2 with a new seed.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model on the train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV path.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Correlate a scorer with dmos on the val split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// checkpoint | psnr | ssim | dmos | permutation
        #[arg(long)]
        scorer: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "all,push,pick")]
        subset: Vec<Subset>,
        #[arg(long, default_value = "val")]
        records: RecordSet,
        #[arg(long, default_value = "none")]
        mapping: Mapping,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add the permutation sanity band for every subset.
        #[arg(long)]
        band: bool,
        /// Table-I-shaped CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Per-record `id,score,dmos` CSV output.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Train and evaluate the four ablation variants.
    Ablate {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "none")]
        mapping: Mapping,
        /// Table-IV-shaped CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Distribution tables and the inter-task SRCC matrix.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate external `id,score` scores with dmos.
    Correlate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        external: PathBuf,
        /// Scatter CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the trainable parameter count.
    Params {
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value = "toy")]
    preset: Preset,
    /// Baseline | Baseline+MS | Baseline+EA | MA-EIQA
    #[arg(long, default_value = "MA-EIQA")]
    variant: String,
    #[arg(long)]
    input_size: Option<usize>,
    #[arg(long)]
    fc_hidden: Option<usize>,
    #[arg(long)]
    fuse_level: Option<usize>,
}

impl ModelArgs {
    fn config(&self) -> Result<ModelConfig> {
        let v = Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(self.variant.trim()))
            .with_context(|| format!("unknown variant `{}`", self.variant))?;
        let mut cfg = ModelConfig::preset(self.preset).with_variant(v);
        if let Some(s) = self.input_size {
            cfg.input_size = s;
        }
        if let Some(h) = self.fc_hidden {
            cfg.fc_hidden = h;
        }
        if let Some(l) = self.fuse_level {
            cfg.fuse_level = l;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct HyperArgs {
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// adam | sgd
    #[arg(long, default_value = "adam")]
    optimizer: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl HyperArgs {
    fn hyper(&self) -> Result<TrainHyper> {
        let optimizer = match self.optimizer.to_ascii_lowercase().as_str() {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            o => bail!("unknown optimizer `{o}` (adam|sgd)"),
        };
        Ok(TrainHyper {
            optimizer,
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        })
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn parse_kinds(s: &str) -> Result<Vec<DistortionKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(DistortionKind::ALL.to_vec());
    }
    s.split(',').map(|k| k.parse::<DistortionKind>().map_err(anyhow::Error::from)).collect()
}

fn execute(cmd: Command) -> Result<serde_json::Value> {
    Ok(match cmd {
        Command::Distort {
            input,
            kind,
            level,
            seed,
            out,
        } => {
            let img = ImageBuf::read_png(&input)?;
            let d = apply_distortion(&img, &DistortionSpec::new(kind, level, seed)?)?;
            d.write_png(&out)?;
            json!({"out": out, "kind": kind, "level": level, "seed": seed})
        }
        Command::Generate {
            scenes,
            tasks,
            kinds,
            levels,
            seed,
            out,
            traces,
        } => {
            let opts = GenerateOptions {
                scenes,
                tasks,
                kinds: parse_kinds(&kinds)?,
                levels,
                seed,
                write_traces: traces,
                ..Default::default()
            };
            let m = generate(&opts, &out)?;
            json!({"records": m.records.len(), "split": m.split, "out": out})
        }
        Command::Split { manifest, seed } => {
            let (mut m, dir) = Manifest::load(&manifest)?;
            let info = split(&mut m, seed)?;
            m.save(&dir)?;
            serde_json::to_value(info)?
        }
        Command::Train {
            manifest,
            model,
            hyper,
            out,
            curve,
        } => {
            let (m, dir) = Manifest::load(&manifest)?;
            let cfg = model.config()?;
            let h = hyper.hyper()?;
            let (trained, outcome) = train_from_manifest(&m, &dir, &cfg, &h, |_| {})?;
            let meta = CheckpointMeta {
                epochs: h.epochs,
                seed: h.seed,
                hyper: Some(h),
            };
            Checkpoint::from_model(&trained, meta, Some(&outcome.optimizer)).save(&out)?;
            if let Some(c) = &curve {
                write(c, &outcome.curve_csv())?;
            }
            json!({"checkpoint": out, "params": trained.param_count(), "curve": outcome.curve})
        }
        Command::Eval {
            manifest,
            scorer,
            checkpoint,
            subset,
            records,
            mapping,
            seed,
            band,
            csv,
            scores,
        } => {
            let scorer = match scorer.to_ascii_lowercase().as_str() {
                "checkpoint" => Scorer::Checkpoint(checkpoint.context("--checkpoint is required for the checkpoint scorer")?),
                "psnr" => Scorer::Psnr,
                "ssim" => Scorer::Ssim,
                "dmos" => Scorer::Dmos,
                "permutation" => Scorer::Permutation { seed },
                s => bail!("unknown scorer `{s}` (checkpoint|psnr|ssim|dmos|permutation)"),
            };
            let (m, dir) = Manifest::load(&manifest)?;
            let report = eval(&m, &dir, &scorer, records, &subset, mapping, band.then_some(seed))?;
            if let Some(p) = &csv {
                write(p, &table1_csv(std::slice::from_ref(&report)))?;
            }
            if let Some(p) = &scores {
                write(p, &report.scores_csv())?;
            }
            serde_json::to_value(report)?
        }
        Command::Ablate {
            manifest,
            model,
            hyper,
            seeds,
            mapping,
            csv,
        } => {
            let (m, dir) = Manifest::load(&manifest)?;
            let report = ablation_run(&m, &dir, &model.config()?, &hyper.hyper()?, &seeds, mapping)?;
            if let Some(p) = &csv {
                write(p, &table4_csv(&report))?;
            }
            serde_json::to_value(report)?
        }
        Command::Analyze { manifest, out } => {
            let (m, _) = Manifest::load(&manifest)?;
            let a = analyze(&m)?;
            a.write(&out)?;
            json!({"out": out, "srcc_labels": a.srcc_labels, "srcc_matrix": a.srcc_matrix, "warnings": a.warnings})
        }
        Command::Correlate { manifest, external, out } => {
            let (m, _) = Manifest::load(&manifest)?;
            let r = correlate_external(&m, &external)?;
            if let Some(p) = &out {
                write(p, &r.scatter_csv())?;
            }
            serde_json::to_value(r)?
        }
        Command::Params { model } => {
            let cfg = model.config()?;
            json!({"params": count_params(&cfg), "config": cfg})
        }
    })
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EPDKIT_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("EPDKIT_THREADS=`{v}` is not a number"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
    }
    Ok(())
}

/// Run the CLI on `args` (including the program name) and return the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
            0
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            1
        }
    }
}
