//! Methods x seeds benchmark grids.
//!
//! Every cell `(method, seed)` splits the dataset with `seed`, initializes
//! the model from a seed-level stream (shared by all methods, so methods are
//! compared on identical splits and initial weights), and draws batches and
//! augmentations from a stream keyed by `(seed, method name)`. A cell's
//! score therefore depends only on the dataset, the training config, the
//! method and the seed, never on scheduling.
//!
//! Finished cells can be appended to a checkpoint file (same CSV format as
//! [`RunResult`]); a rerun with the same checkpoint skips them.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::AugmentationSpec;
use crate::dataio::{self, DataError, SplitFractions, SynthConfig};
use crate::flow::Dataset;
use crate::model::{self, EvalReport, ModelError, TrainConfig, TrainOutcome, TrainStreams};
use crate::rng::{name_tag, stream_id, RngStream};
use crate::sampling::{SamplerConfig, SamplerMode};
use crate::stats::{RunResult, StatsError};

pub const NOAUG: &str = "noaug";
pub const NOAUG_NOSAMPLER: &str = "noaug_nosampler";

const INIT_TAG: u64 = 0x1417;
const METHOD_DOMAIN: u64 = 0x4d45_5448;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },
    #[error("{} cell(s) failed: {}", .0.len(), .0.iter().map(|(m, s, e)| format!("({m}, {s}): {e}")).collect::<Vec<_>>().join("; "))]
    FailedCells(Vec<(String, u64, String)>),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A named training recipe: sampler mode plus augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub name: String,
    pub sampler: SamplerMode,
    pub aug: AugmentationSpec,
}

impl Method {
    /// Weighted sampler, no augmentation, `2B` originals per batch.
    pub fn noaug() -> Self {
        Self {
            name: NOAUG.into(),
            sampler: SamplerMode::Weighted,
            aug: AugmentationSpec::Identity,
        }
    }

    /// Uniform sampler, no augmentation, `2B` originals per batch.
    pub fn noaug_nosampler() -> Self {
        Self {
            name: NOAUG_NOSAMPLER.into(),
            sampler: SamplerMode::Uniform,
            aug: AugmentationSpec::Identity,
        }
    }

    /// Resolves a preset name or an augmentation record (weighted sampler).
    /// The method is named after the text as given.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let text = text.trim();
        match text {
            NOAUG => Ok(Self::noaug()),
            NOAUG_NOSAMPLER => Ok(Self::noaug_nosampler()),
            _ => {
                let aug: AugmentationSpec = text.parse().map_err(|e| {
                    BenchError::Plan(format!(
                        "unknown method `{text}`: {e}; presets are {NOAUG}, {NOAUG_NOSAMPLER}"
                    ))
                })?;
                Ok(Self {
                    name: text.to_string(),
                    sampler: SamplerMode::Weighted,
                    aug,
                })
            }
        }
    }

    /// Every accepted bare method name.
    pub fn valid_names() -> Vec<&'static str> {
        let mut v = vec![NOAUG, NOAUG_NOSAMPLER];
        v.extend(crate::augment::AugKind::TRANSFORMS.iter().map(|k| k.name()));
        v
    }

    fn stream(&self, seed: u64) -> RngStream {
        RngStream::with_stream(seed, stream_id(METHOD_DOMAIN, name_tag(&self.name)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Path(PathBuf),
    Synth(SynthConfig),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset, DataError> {
        match self {
            DataSource::Path(p) => dataio::load(p),
            DataSource::Synth(cfg) => dataio::synthesize(cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub data: DataSource,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub split: SplitFractions,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MethodEntry {
    Text(String),
    Table {
        name: Option<String>,
        aug: Option<String>,
        sampler: Option<SamplerMode>,
    },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DataEntry {
    path: Option<PathBuf>,
    synth: Option<SynthConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    methods: Vec<MethodEntry>,
    seeds: Option<Vec<u64>>,
    seed_count: Option<u64>,
    #[serde(default)]
    data: DataEntry,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    split: SplitFractions,
}

#[derive(Serialize)]
struct MethodCanonical<'a> {
    name: &'a str,
    sampler: SamplerMode,
    aug: String,
}

#[derive(Serialize)]
struct PlanCanonical<'a> {
    data: serde_json::Value,
    methods: Vec<MethodCanonical<'a>>,
    seeds: &'a [u64],
    train: &'a TrainConfig,
    split: &'a SplitFractions,
}

impl BenchPlan {
    /// Parses a TOML plan. Relative data paths resolve against `base_dir`.
    ///
    /// ```toml
    /// methods = ["noaug", "noaug_nosampler", "translation", "gaussian_noise sigma_rel=0.2"]
    /// seed_count = 10          # or: seeds = [0, 1, 2]
    /// [data.synth]             # or: [data] path = "flows.jsonl"
    /// classes = 10
    /// [train]
    /// epochs = 30
    /// ```
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, BenchError> {
        let f: PlanFile = toml::from_str(text).map_err(|e| BenchError::Plan(e.to_string()))?;
        let seeds = match (f.seeds, f.seed_count) {
            (Some(s), None) => s,
            (None, Some(n)) => (0..n).collect(),
            (None, None) => return Err(BenchError::Plan("give `seeds` or `seed_count`".into())),
            (Some(_), Some(_)) => {
                return Err(BenchError::Plan("give only one of `seeds`, `seed_count`".into()))
            }
        };
        let data = match (f.data.path, f.data.synth) {
            (Some(p), None) => DataSource::Path(if p.is_absolute() { p } else { base_dir.join(p) }),
            (None, Some(s)) => DataSource::Synth(s),
            (None, None) => DataSource::Synth(SynthConfig::default()),
            (Some(_), Some(_)) => {
                return Err(BenchError::Plan("give only one of data.path, data.synth".into()))
            }
        };
        let methods = f
            .methods
            .into_iter()
            .map(|m| match m {
                MethodEntry::Text(t) => Method::parse(&t),
                MethodEntry::Table { name, aug, sampler } => {
                    let base = match aug.as_deref() {
                        Some(a) => Method::parse(a)?,
                        None => Method::noaug(),
                    };
                    Ok(Method {
                        name: name.unwrap_or(base.name),
                        sampler: sampler.unwrap_or(base.sampler),
                        aug: base.aug,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let plan = Self {
            data,
            methods,
            seeds,
            train: f.train,
            split: f.split,
        };
        plan.check()?;
        Ok(plan)
    }

    pub fn check(&self) -> Result<(), BenchError> {
        if self.methods.len() < 2 {
            return Err(BenchError::Plan("a plan needs at least 2 methods".into()));
        }
        if self.seeds.len() < 2 {
            return Err(BenchError::Plan("a plan needs at least 2 seeds".into()));
        }
        let mut tags = HashMap::new();
        for m in &self.methods {
            if m.name.is_empty() || m.name.contains(['\n', '\r']) {
                return Err(BenchError::Plan(format!("invalid method name {:?}", m.name)));
            }
            if let Some(prev) = tags.insert(name_tag(&m.name), &m.name) {
                return Err(BenchError::Plan(if *prev == m.name {
                    format!("duplicate method name `{}`", m.name)
                } else {
                    format!("methods `{prev}` and `{}` map to the same stream", m.name)
                }));
            }
            m.aug.check().map_err(|e| BenchError::Plan(e.to_string()))?;
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(BenchError::Plan(format!("duplicate seed {s}")));
            }
        }
        self.train.check()?;
        self.split.check()?;
        if let DataSource::Synth(s) = &self.data {
            s.check()?;
        }
        Ok(())
    }

    /// Canonical JSON rendering of the plan.
    pub fn to_json(&self) -> serde_json::Value {
        let canon = PlanCanonical {
            data: match &self.data {
                DataSource::Path(p) => serde_json::json!({ "path": p.display().to_string() }),
                DataSource::Synth(s) => serde_json::json!({ "synth": s }),
            },
            methods: self
                .methods
                .iter()
                .map(|m| MethodCanonical {
                    name: &m.name,
                    sampler: m.sampler,
                    aug: m.aug.to_string(),
                })
                .collect(),
            seeds: &self.seeds,
            train: &self.train,
            split: &self.split,
        };
        serde_json::to_value(canon).expect("plan serializes")
    }

    /// SHA-256 of [`BenchPlan::to_json`].
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_json()).expect("json");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// SHA-256 over the plan and the canonical text of the dataset it runs on.
/// Cells recorded under one key are valid for any run with the same key.
pub fn grid_key(plan: &BenchPlan, dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&plan.to_json()).expect("json"));
    h.update(b"\n");
    h.update(dataio::to_string(dataset).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Streams for one cell: initialization shared by all methods of a seed,
/// batches and augmentations keyed by `(seed, method name)`.
pub fn cell_streams(method: &Method, seed: u64) -> TrainStreams {
    TrainStreams {
        init: RngStream::new(seed).child(INIT_TAG),
        batches: method.stream(seed),
    }
}

/// Splits with `seed`, trains `method`, and evaluates the best-validation
/// model on the test partition.
pub fn train_cell(
    dataset: &Dataset,
    fractions: SplitFractions,
    config: &TrainConfig,
    method: &Method,
    seed: u64,
) -> Result<(TrainOutcome, EvalReport), BenchError> {
    let (train, val, test) = dataio::split(dataset, fractions, seed)?;
    let sampler = SamplerConfig {
        mode: method.sampler,
        batch_size: config.batch_size,
    };
    let outcome = model::train_with_streams(
        &train,
        &val,
        sampler,
        &method.aug,
        config,
        cell_streams(method, seed),
    )?;
    let report = model::evaluate(&outcome.model, &test, &config.norm)?;
    Ok((outcome, report))
}

/// Test weighted-F1 of one grid cell.
pub fn run_cell(plan: &BenchPlan, dataset: &Dataset, method: &Method, seed: u64) -> Result<f64, BenchError> {
    let (_, report) = train_cell(dataset, plan.split, &plan.train, method, seed)?;
    Ok(report.weighted_f1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub method: String,
    pub seed: u64,
    /// `None` when the cell was not attempted (run stopped early).
    pub score: Option<Result<f64, String>>,
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    /// Method-major, seeds inner.
    pub cells: Vec<CellOutcome>,
}

impl GridOutcome {
    pub fn failures(&self) -> Vec<(String, u64, String)> {
        self.cells
            .iter()
            .filter_map(|c| match &c.score {
                Some(Err(e)) => Some((c.method.clone(), c.seed, e.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn pending(&self) -> usize {
        self.cells.iter().filter(|c| c.score.is_none()).count()
    }

    pub fn resumed(&self) -> usize {
        self.cells.iter().filter(|c| c.resumed).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| matches!(c.score, Some(Ok(_))))
    }

    /// Successful cells as `method,seed,weighted_f1` CSV (complete or not).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,seed,weighted_f1\n");
        for c in &self.cells {
            if let Some(Ok(v)) = c.score {
                out.push_str(&csv_row(&c.method, c.seed, v));
            }
        }
        out
    }

    /// The full score grid; fails while any cell is failed or pending.
    pub fn to_run_result(&self) -> Result<RunResult, BenchError> {
        let failures = self.failures();
        if !failures.is_empty() {
            return Err(BenchError::FailedCells(failures));
        }
        let cells = self.cells.iter().map(|c| match c.score {
            Some(Ok(v)) => Ok((c.method.clone(), c.seed, v)),
            _ => Err(StatsError::MissingCell {
                method: c.method.clone(),
                seed: c.seed,
            }),
        });
        Ok(RunResult::from_cells(cells.collect::<Result<Vec<_>, _>>()?)?)
    }
}

fn csv_row(method: &str, seed: u64, v: f64) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record([method, &seed.to_string(), &format!("{v}")])
        .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub parallelism: usize,
    pub checkpoint: Option<PathBuf>,
    /// Stop after computing this many new cells (the rest stay pending).
    pub max_new_cells: Option<usize>,
}

/// Finished cells recorded in a checkpoint. A torn final line (from an
/// interrupted write) is ignored.
fn read_checkpoint(path: &Path) -> Result<HashMap<(String, u64), f64>, BenchError> {
    let mut done = HashMap::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(complete.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| BenchError::Checkpoint {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let bad = || BenchError::Checkpoint {
            path: path.display().to_string(),
            msg: format!("malformed row {:?}", rec),
        };
        if rec.len() != 3 {
            return Err(bad());
        }
        let seed: u64 = rec[1].parse().map_err(|_| bad())?;
        let v: f64 = rec[2].parse().map_err(|_| bad())?;
        done.insert((rec[0].to_string(), seed), v);
    }
    Ok(done)
}

/// Runs the grid. Cells already in the checkpoint are reused; new results
/// are appended to it as they finish.
pub fn run(plan: &BenchPlan, dataset: &Dataset, opts: &RunOptions) -> Result<GridOutcome, BenchError> {
    plan.check()?;
    let mut cells: Vec<CellOutcome> = Vec::new();
    for m in &plan.methods {
        for &s in &plan.seeds {
            cells.push(CellOutcome {
                method: m.name.clone(),
                seed: s,
                score: None,
                resumed: false,
            });
        }
    }
    let writer = match &opts.checkpoint {
        Some(path) => {
            let done = read_checkpoint(path)?;
            for c in &mut cells {
                if let Some(&v) = done.get(&(c.method.clone(), c.seed)) {
                    c.score = Some(Ok(v));
                    c.resumed = true;
                }
            }
            let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                f.write_all(b"method,seed,weighted_f1\n")?;
            } else if !fs::read(path)?.ends_with(b"\n") {
                // Terminate a torn row so appended rows start on a new line.
                f.write_all(b"\n")?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };
    let mut todo: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].score.is_none()).collect();
    if let Some(max) = opts.max_new_cells {
        todo.truncate(max);
    }
    let methods: HashMap<&str, &Method> = plan.methods.iter().map(|m| (m.name.as_str(), m)).collect();
    let results: Mutex<Vec<(usize, Result<f64, String>)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.max(1).min(todo.len().max(1));
    let io_error: Mutex<Option<std::io::Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = todo.get(k) else { break };
                let cell = &cells[i];
                let method = methods[cell.method.as_str()];
                let r = run_cell(plan, dataset, method, cell.seed).map_err(|e| e.to_string());
                if let (Ok(v), Some(w)) = (&r, &writer) {
                    let mut f = w.lock().expect("checkpoint lock");
                    let row = csv_row(&cell.method, cell.seed, *v);
                    if let Err(e) = f.write_all(row.as_bytes()).and_then(|_| f.flush()) {
                        io_error.lock().expect("lock").get_or_insert(e);
                    }
                }
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    if let Some(e) = io_error.into_inner().expect("lock") {
        return Err(e.into());
    }
    for (i, r) in results.into_inner().expect("results lock") {
        cells[i].score = Some(r);
    }
    Ok(GridOutcome {
        methods: plan.methods.iter().map(|m| m.name.clone()).collect(),
        seeds: plan.seeds.clone(),
        cells,
    })
}

/// Provenance record written next to a benchmark's results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub formats: BTreeMap<String, u32>,
    pub plan_hash: String,
    pub grid_key: String,
    pub effective_config: serde_json::Value,
    pub parallelism: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub cells_total: usize,
    pub cells_resumed: usize,
    pub failures: Vec<(String, u64, String)>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Format versions reported by the CLI and manifests.
pub fn format_versions() -> BTreeMap<String, u32> {
    BTreeMap::from([
        ("flow_record".to_string(), 1),
        ("run_result_csv".to_string(), 1),
        ("cd_report_json".to_string(), 1),
        ("model_checkpoint".to_string(), model::CHECKPOINT_VERSION),
    ])
}

impl RunManifest {
    pub fn new(
        plan: &BenchPlan,
        grid_key: String,
        effective_config: serde_json::Value,
        parallelism: usize,
        started_unix: u64,
        outcome: &GridOutcome,
    ) -> Self {
        Self {
            toolkit_version: crate::VERSION.to_string(),
            formats: format_versions(),
            plan_hash: plan.hash(),
            grid_key,
            effective_config,
            parallelism,
            started_unix,
            finished_unix: unix_now(),
            cells_total: outcome.cells.len(),
            cells_resumed: outcome.resumed(),
            failures: outcome.failures(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan() -> BenchPlan {
        BenchPlan {
            data: DataSource::Synth(SynthConfig {
                classes: 3,
                total: 90,
                series_len: 6,
                ..SynthConfig::default()
            }),
            methods: vec![Method::noaug(), Method::parse("flip").unwrap()],
            seeds: vec![0, 1],
            train: TrainConfig {
                epochs: 2,
                batch_size: 8,
                hidden: [8, 4],
                ..TrainConfig::default()
            },
            split: SplitFractions::default(),
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!(Method::parse("noaug").unwrap(), Method::noaug());
        let m = Method::parse("noaug_nosampler").unwrap();
        assert_eq!(m.sampler, SamplerMode::Uniform);
        let m = Method::parse(" translation k_max=2 ").unwrap();
        assert_eq!(m.name, "translation k_max=2");
        assert_eq!(m.aug, AugmentationSpec::Translation { k_max: 2 });
        assert!(Method::parse("mixup").is_err());
    }

    #[test]
    fn plan_toml() {
        let text = r#"
            methods = ["noaug", { name = "gn", aug = "gaussian_noise sigma_rel=0.2" }, { name = "plain", sampler = "uniform" }]
            seed_count = 3
            [data]
            path = "flows.jsonl"
            [train]
            epochs = 4
        "#;
        let p = BenchPlan::from_toml(text, Path::new("/tmp/x")).unwrap();
        assert_eq!(p.seeds, vec![0, 1, 2]);
        assert_eq!(p.methods[1].name, "gn");
        assert_eq!(p.methods[2].sampler, SamplerMode::Uniform);
        assert_eq!(p.data, DataSource::Path(PathBuf::from("/tmp/x/flows.jsonl")));
        assert_eq!(p.train.epochs, 4);
        assert_eq!(p.train.batch_size, 32);
    }

    #[test]
    fn plan_validation() {
        let mut p = tiny_plan();
        p.methods.push(Method::noaug());
        assert!(matches!(p.check(), Err(BenchError::Plan(_))));
        let mut p = tiny_plan();
        p.seeds = vec![3];
        assert!(p.check().is_err());
        let mut p = tiny_plan();
        p.methods.truncate(1);
        assert!(p.check().is_err());
        assert!(BenchPlan::from_toml("methods = [\"noaug\", \"flip\"]", Path::new(".")).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = tiny_plan();
        assert_eq!(a.hash(), tiny_plan().hash());
        let mut b = tiny_plan();
        b.seeds = vec![0, 2];
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn grid_key_tracks_data() {
        let plan = tiny_plan();
        let data = plan.data.load().unwrap();
        let key = grid_key(&plan, &data);
        assert_eq!(key, grid_key(&plan, &data));
        let fewer = data.subset(&(1..data.len()).collect::<Vec<_>>());
        assert_ne!(key, grid_key(&plan, &fewer));
    }

    #[test]
    fn grid_runs_and_is_parallelism_invariant() {
        let plan = tiny_plan();
        let data = plan.data.load().unwrap();
        let one = run(&plan, &data, &RunOptions { parallelism: 1, ..Default::default() }).unwrap();
        let four = run(&plan, &data, &RunOptions { parallelism: 4, ..Default::default() }).unwrap();
        assert!(one.is_complete());
        assert_eq!(one, four);
        assert_eq!(one.to_csv().lines().count(), 5);
        let rr = one.to_run_result().unwrap();
        assert_eq!(rr.methods().len(), 2);
    }

    #[test]
    fn partial_runs_resume_from_checkpoint() {
        let plan = tiny_plan();
        let data = plan.data.load().unwrap();
        let full = run(&plan, &data, &RunOptions { parallelism: 1, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("ck.csv");
        let opts = |max| RunOptions {
            parallelism: 2,
            checkpoint: Some(ck.clone()),
            max_new_cells: max,
        };
        let first = run(&plan, &data, &opts(Some(1))).unwrap();
        assert_eq!(first.pending(), 3);
        assert!(first.to_run_result().is_err());
        // Simulate a torn write at kill time.
        let mut f = OpenOptions::new().append(true).open(&ck).unwrap();
        f.write_all(b"flip,1,0.12").unwrap();
        drop(f);
        let second = run(&plan, &data, &opts(None)).unwrap();
        assert_eq!(second.resumed(), 1);
        assert_eq!(second.to_csv(), full.to_csv());
        let third = run(&plan, &data, &opts(None)).unwrap();
        assert_eq!(third.resumed(), 4);
        assert_eq!(third.to_csv(), full.to_csv());
    }

    #[test]
    fn failed_cells_are_reported() {
        let mut plan = tiny_plan();
        plan.train.time_budget_secs = Some(1e-9);
        let data = plan.data.load().unwrap();
        let out = run(&plan, &data, &RunOptions::default()).unwrap();
        assert_eq!(out.failures().len(), 4);
        assert!(matches!(out.to_run_result(), Err(BenchError::FailedCells(_))));
    }
}
