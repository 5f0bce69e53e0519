//! `flowaug` command-line interface.
//!
//! Settings resolve as: command-line flag, then the `--config` TOML file
//! (top-level `seed` plus one table per subcommand), then built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use flowaug::augment::{self, AugmentationSpec};
use flowaug::bench::{self, BenchPlan, Method, RunManifest, RunOptions};
use flowaug::dataio::{self, SplitFractions, SynthConfig};
use flowaug::flow::Dataset;
use flowaug::model::TrainConfig;
use flowaug::stats::{self, ChartOptions, RunResult};
use flowaug::RngStream;

const AUG_STREAM: u64 = 0xa0;
const PAIR_STREAM: u64 = 0xa1;

#[derive(Parser, Debug)]
#[command(name = "flowaug", about = "Data augmentation and benchmarking for network-flow time series")]
#[command(disable_version_flag = true, arg_required_else_help = true)]
struct Cli {
    /// Seed for every randomized step of this invocation [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with default settings (flags take precedence)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Only report errors
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Print human-readable summaries on standard error
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Print toolkit and format versions as JSON
    #[arg(short = 'V', long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply one augmentation to every flow of a dataset
    Augment(AugmentArgs),
    /// Generate a synthetic labelled dataset
    Synth(SynthArgs),
    /// Train and evaluate one (method, seed) cell
    Train(TrainArgs),
    /// Run a methods x seeds benchmark plan
    Bench(BenchArgs),
    /// Build the rank statistics report and critical-difference chart
    Cdchart(CdchartArgs),
}

macro_rules! overlay {
    ($cli:expr, $file:expr; $($f:ident),+) => {
        $( if $cli.$f.is_none() { $cli.$f = $file.$f.take(); } )+
    };
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required setting {flag}"))
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AugmentArgs {
    /// Input dataset (JSON lines)
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output dataset (JSON lines)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Augmentation: a name, optionally followed by key=value parameters,
    /// e.g. "gaussian_noise sigma_rel=0.2 p_size=1"
    #[arg(short, long)]
    aug: Option<String>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthArgs {
    /// Output dataset (JSON lines)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Number of classes [default: 10]
    #[arg(long)]
    classes: Option<usize>,
    /// Total number of flows [default: 5000]
    #[arg(long)]
    total: Option<usize>,
    /// Zipf exponent of the class sizes (0 = balanced) [default: 1]
    #[arg(long)]
    zipf: Option<f64>,
    /// Series length N [default: 20]
    #[arg(long)]
    series_len: Option<usize>,
    /// Distance between class size profiles, log scale [default: 0.25]
    #[arg(long)]
    separation: Option<f64>,
    /// Per-packet log-size noise [default: 0.5]
    #[arg(long)]
    size_spread: Option<f64>,
    /// Per-packet log-IAT noise [default: 1]
    #[arg(long)]
    iat_spread: Option<f64>,
    /// Largest random start offset into the class profile [default: 3]
    #[arg(long)]
    max_offset: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainArgs {
    /// Dataset (JSON lines)
    #[arg(short, long)]
    data: Option<PathBuf>,
    /// noaug, noaug_nosampler, or an augmentation [default: noaug]
    #[arg(short, long)]
    method: Option<String>,
    /// [default: 30]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden layer widths [default: 64 32]
    #[arg(long, num_args = 2, value_names = ["H1", "H2"])]
    hidden: Option<Vec<usize>>,
    /// Train/validation/test fractions [default: 0.7 0.15 0.15]
    #[arg(long, num_args = 3, value_names = ["TRAIN", "VAL", "TEST"])]
    split: Option<Vec<f64>>,
    /// Abort when training exceeds this many seconds
    #[arg(long)]
    time_budget: Option<f64>,
    /// Write the selected model to this file
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchArgs {
    /// Benchmark plan (TOML)
    #[arg(short, long)]
    plan: Option<PathBuf>,
    /// Results CSV (method,seed,weighted_f1)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads [default: available cores]
    #[arg(short = 'j', long)]
    parallelism: Option<usize>,
    /// Per-cell training time limit in seconds; slower cells are marked failed
    #[arg(long)]
    cell_time_budget: Option<f64>,
    /// Append-only record of finished cells [default: <output>.<grid key>.partial]
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Run manifest [default: <output>.manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Stop after this many newly computed cells
    #[arg(long)]
    max_new_cells: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CdchartArgs {
    /// Results CSV (method,seed,weighted_f1)
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Significance level, 0.05 or 0.10 [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Chart output [default: input with .svg extension]
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Report output [default: input with .json extension]
    #[arg(long)]
    json: Option<PathBuf>,
    /// Method the labels compare against [default: noaug when present]
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    title: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    augment: AugmentArgs,
    synth: SynthArgs,
    train: TrainArgs,
    bench: BenchArgs,
    cdchart: CdchartArgs,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Verbosity {
    Quiet,
    Normal,
    Verbose,
}

struct Ctx {
    seed: u64,
    verbosity: Verbosity,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if self.verbosity >= Verbosity::Verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn warn(&self, msg: impl AsRef<str>) {
        if self.verbosity >= Verbosity::Normal {
            eprintln!("warning: {}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.version {
        println!(
            "{}",
            json!({ "toolkit": flowaug::VERSION, "formats": bench::format_versions() })
        );
        return Ok(());
    }
    let mut file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        verbosity: if cli.quiet {
            Verbosity::Quiet
        } else if cli.verbose {
            Verbosity::Verbose
        } else {
            Verbosity::Normal
        },
    };
    match cli.command {
        None => bail!("no subcommand given; see --help"),
        Some(Command::Augment(mut a)) => {
            overlay!(a, file.augment; input, output, aug);
            cmd_augment(&ctx, a)
        }
        Some(Command::Synth(mut a)) => {
            overlay!(a, file.synth; output, classes, total, zipf, series_len, separation, size_spread, iat_spread, max_offset);
            cmd_synth(&ctx, a)
        }
        Some(Command::Train(mut a)) => {
            overlay!(a, file.train; data, method, epochs, batch_size, lr, hidden, split, time_budget, save_model);
            cmd_train(&ctx, a)
        }
        Some(Command::Bench(mut a)) => {
            overlay!(a, file.bench; plan, output, parallelism, cell_time_budget, checkpoint, manifest, max_new_cells);
            cmd_bench(&ctx, a)
        }
        Some(Command::Cdchart(mut a)) => {
            overlay!(a, file.cdchart; input, alpha, svg, json, baseline, title);
            cmd_cdchart(&ctx, a)
        }
    }
}

/// Augments every sample once. CutMix partners come from a seeded
/// shuffle within each class: each sample is paired with its successor.
fn augment_dataset(data: &Dataset, spec: &AugmentationSpec, seed: u64) -> Result<Dataset> {
    let root = RngStream::new(seed);
    let mut partner: Vec<usize> = (0..data.len()).collect();
    if matches!(spec, AugmentationSpec::CutMix { .. }) {
        let pairing = root.child(PAIR_STREAM);
        for (c, mut members) in data.class_indices().into_iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            pairing.child(c as u64).shuffle(&mut members);
            for (j, &i) in members.iter().enumerate() {
                partner[i] = members[(j + 1) % members.len()];
            }
        }
    }
    let aug_root = root.child(AUG_STREAM);
    let samples = data
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = aug_root.child(i as u64);
            augment::apply(spec, s, &mut rng, Some(&data.samples()[partner[i]]))
                .with_context(|| format!("sample {}", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(samples, data.labels().to_vec())?)
}

fn cmd_augment(ctx: &Ctx, a: AugmentArgs) -> Result<()> {
    let input = need(a.input, "--input")?;
    let output = need(a.output, "--output")?;
    let text = need(a.aug, "--aug")?;
    let spec: AugmentationSpec = text.parse().map_err(|e| {
        anyhow!("{e}; valid augmentations: {}", augment::AugKind::all_names().join(", "))
    })?;
    let data = dataio::load(&input)?;
    let out = augment_dataset(&data, &spec, ctx.seed)?;
    dataio::save(&out, &output)?;
    ctx.info(format!("augmented {} flows with `{spec}`", out.len()));
    println!(
        "{}",
        json!({ "output": output, "aug": spec.to_string(), "seed": ctx.seed, "samples": out.len() })
    );
    Ok(())
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let output = need(a.output, "--output")?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        classes: a.classes.unwrap_or(d.classes),
        total: a.total.unwrap_or(d.total),
        zipf: a.zipf.unwrap_or(d.zipf),
        series_len: a.series_len.unwrap_or(d.series_len),
        separation: a.separation.unwrap_or(d.separation),
        size_spread: a.size_spread.unwrap_or(d.size_spread),
        iat_spread: a.iat_spread.unwrap_or(d.iat_spread),
        max_offset: a.max_offset.unwrap_or(d.max_offset),
        seed: ctx.seed,
    };
    let data = dataio::synthesize(&cfg)?;
    dataio::save(&data, &output)?;
    let counts: serde_json::Map<String, serde_json::Value> = data
        .labels()
        .iter()
        .zip(data.class_counts())
        .map(|(l, n)| (l.clone(), json!(n)))
        .collect();
    ctx.info(format!("wrote {} flows to {}", data.len(), output.display()));
    println!(
        "{}",
        json!({ "output": output, "config": cfg, "class_counts": counts })
    );
    Ok(())
}

fn parse_method(text: &str) -> Result<Method> {
    Method::parse(text).map_err(|e| anyhow!("{e}\nvalid methods: {}", Method::valid_names().join(", ")))
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let data_path = need(a.data, "--data")?;
    let method = parse_method(a.method.as_deref().unwrap_or(bench::NOAUG))?;
    let d = TrainConfig::default();
    let hidden = match a.hidden.as_deref() {
        Some(&[h1, h2]) => [h1, h2],
        Some(_) => bail!("--hidden takes two widths"),
        None => d.hidden,
    };
    let split = match a.split.as_deref() {
        Some(&[train, val, test]) => SplitFractions { train, val, test },
        Some(_) => bail!("--split takes three fractions"),
        None => SplitFractions::default(),
    };
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        lr: a.lr.unwrap_or(d.lr),
        hidden,
        seed: ctx.seed,
        time_budget_secs: a.time_budget,
        ..d
    };
    cfg.check()?;
    split.check()?;
    let data = dataio::load(&data_path)?;
    let (outcome, report) = bench::train_cell(&data, split, &cfg, &method, ctx.seed)?;
    for r in &outcome.history {
        ctx.info(format!(
            "epoch {:3}  loss {:.4}  val weighted-F1 {:.4}",
            r.epoch, r.mean_train_loss, r.val_weighted_f1
        ));
    }
    if let Some(path) = &a.save_model {
        fs::write(path, outcome.model.to_checkpoint())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_bench(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    let started = bench::unix_now();
    let plan_path = need(a.plan, "--plan")?;
    let output = need(a.output, "--output")?;
    let text = fs::read_to_string(&plan_path).with_context(|| format!("reading plan {}", plan_path.display()))?;
    let base = plan_path.parent().unwrap_or(Path::new("."));
    let mut plan = BenchPlan::from_toml(&text, base).with_context(|| format!("plan {}", plan_path.display()))?;
    if a.cell_time_budget.is_some() {
        plan.train.time_budget_secs = a.cell_time_budget;
        plan.check()?;
    }
    let hash = plan.hash();
    let data = plan.data.load()?;
    let key = bench::grid_key(&plan, &data);
    let parallelism = a
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let checkpoint = a
        .checkpoint
        .unwrap_or_else(|| with_suffix(&output, &format!(".{}.partial", &key[..12])));
    let manifest_path = a.manifest.unwrap_or_else(|| with_suffix(&output, ".manifest.json"));
    let opts = RunOptions {
        parallelism,
        checkpoint: Some(checkpoint.clone()),
        max_new_cells: a.max_new_cells,
    };
    ctx.info(format!(
        "{} methods x {} seeds on {} flows, {parallelism} worker(s)",
        plan.methods.len(),
        plan.seeds.len(),
        data.len()
    ));
    let outcome = bench::run(&plan, &data, &opts)?;
    let effective = json!({
        "plan_path": plan_path,
        "plan": plan.to_json(),
        "output": output,
        "checkpoint": checkpoint,
        "parallelism": parallelism,
        "max_new_cells": a.max_new_cells,
    });
    let manifest = RunManifest::new(&plan, key.clone(), effective, parallelism, started, &outcome);
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    let failures = outcome.failures();
    if !failures.is_empty() {
        return Err(bench::BenchError::FailedCells(failures).into());
    }
    let complete = outcome.is_complete();
    if complete {
        outcome.to_run_result()?;
        fs::write(&output, outcome.to_csv()).with_context(|| format!("writing {}", output.display()))?;
    } else {
        ctx.warn(format!(
            "{} cell(s) pending; rerun to resume from {}",
            outcome.pending(),
            checkpoint.display()
        ));
    }
    println!(
        "{}",
        json!({
            "output": if complete { json!(output) } else { json!(null) },
            "manifest": manifest_path,
            "plan_hash": hash,
            "grid_key": key,
            "cells": outcome.cells.len(),
            "resumed": outcome.resumed(),
            "pending": outcome.pending(),
            "complete": complete,
        })
    );
    Ok(())
}

fn cmd_cdchart(ctx: &Ctx, a: CdchartArgs) -> Result<()> {
    let input = need(a.input, "--input")?;
    let alpha = a.alpha.unwrap_or(0.05);
    let file = fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let result = RunResult::from_csv(file).with_context(|| format!("reading {}", input.display()))?;
    let report = stats::build_report(&result, alpha)?;
    let baseline = match a.baseline {
        Some(b) if !result.methods().contains(&b) => bail!("baseline `{b}` is not a method in {}", input.display()),
        Some(b) => Some(b),
        None => result
            .methods()
            .iter()
            .find(|m| m.as_str() == bench::NOAUG)
            .cloned(),
    };
    let opts = ChartOptions {
        baseline,
        title: a.title,
        ..ChartOptions::default()
    };
    let svg = a.svg.unwrap_or_else(|| input.with_extension("svg"));
    let json_path = a.json.unwrap_or_else(|| input.with_extension("json"));
    stats::write_cd_chart(&report, &opts, &svg)?;
    let text = report.to_json();
    fs::write(&json_path, &text).with_context(|| format!("writing {}", json_path.display()))?;
    ctx.info(format!(
        "Friedman chi2 {:.4}, p {:.4}, CD {:.4}, {} group(s)",
        report.friedman_chi2,
        report.p_value,
        report.cd,
        report.groups.len()
    ));
    println!("{text}");
    Ok(())
}
