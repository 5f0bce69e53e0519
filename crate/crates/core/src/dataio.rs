//! Flow record files, stratified splits and a synthetic flow generator.
//!
//! A flow record file holds one JSON object per line, fields in the order
//! `label`, `sizes`, `dirs`, `iats`, `valid_len`:
//!
//! ```text
//! {"label":"app01","sizes":[60,1500,0],"dirs":[1,-1,0],"iats":[0.0,0.012,0.0],"valid_len":2}
//! ```
//!
//! All records in a file share the same series length. Reals are written in
//! shortest round-trip form, so `save` is byte-deterministic and `load`
//! recovers bit-identical values.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{validate_relaxed, Dataset, FlowError, FlowSample, DEFAULT_SERIES_LEN};
use crate::rng::RngStream;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("no records found")]
    Empty,
    #[error("invalid split: {0}")]
    Split(String),
    #[error("class `{class}` has {count} samples; splitting needs at least 3")]
    ClassTooSmall { class: String, count: usize },
    #[error("invalid synthesis config: {0}")]
    Synth(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    label: String,
    sizes: Vec<u32>,
    dirs: Vec<i8>,
    iats: Vec<f64>,
    valid_len: usize,
}

/// Parses flow records from a reader; labels get indices in order of first
/// appearance.
pub fn read_records<R: BufRead>(reader: R) -> Result<Dataset, DataError> {
    let mut labels: Vec<String> = Vec::new();
    let mut samples = Vec::new();
    let mut series_len: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DataError::Line {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| DataError::Line { line: line_no, msg };
        let rec: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let n = rec.sizes.len();
        if let Some(expected) = series_len {
            if n != expected {
                return Err(bad(format!(
                    "series length {n} differs from the file's {expected}"
                )));
            }
        }
        series_len = Some(n);
        let label = match labels.iter().position(|l| *l == rec.label) {
            Some(i) => i,
            None => {
                labels.push(rec.label);
                labels.len() - 1
            }
        };
        let sample = FlowSample {
            sizes: rec.sizes,
            dirs: rec.dirs,
            iats: rec.iats,
            valid_len: rec.valid_len,
            label,
        };
        let violations = validate_relaxed(&sample);
        if let Some(v) = violations.first() {
            return Err(bad(v.to_string()));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(Dataset::new(samples, labels)?)
}

pub fn load(path: &Path) -> Result<Dataset, DataError> {
    let f = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_records(BufReader::new(f))
}

/// One canonical record line per sample (without trailing newline).
pub fn record_line(sample: &FlowSample, labels: &[String]) -> String {
    let rec = Record {
        label: labels[sample.label].clone(),
        sizes: sample.sizes.clone(),
        dirs: sample.dirs.clone(),
        iats: sample.iats.clone(),
        valid_len: sample.valid_len,
    };
    serde_json::to_string(&rec).expect("record serializes")
}

pub fn write_records<W: Write>(dataset: &Dataset, mut w: W) -> io::Result<()> {
    for s in dataset.samples() {
        writeln!(w, "{}", record_line(s, dataset.labels()))?;
    }
    w.flush()
}

/// Serialized dataset as a string.
pub fn to_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_records(dataset, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

pub fn save(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    fs::write(path, to_string(dataset)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Hamilton apportionment of `total` over `weights`: floors of the exact
/// quotas, then one extra unit to the largest remainders (lower index wins
/// ties).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn check(&self) -> Result<(), DataError> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(DataError::Split(format!(
                "fractions must all be positive, got {f:?}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::Split(format!("fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Stratified train/val/test split. Each class is shuffled with a stream
/// derived from `seed` and cut by [`largest_remainder`]; partitions keep the
/// original sample order.
pub fn split(
    dataset: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), DataError> {
    fractions.check()?;
    let root = RngStream::new(seed);
    let weights = [fractions.train, fractions.val, fractions.test];
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (c, members) in dataset.class_indices().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            return Err(DataError::ClassTooSmall {
                class: dataset.labels()[c].clone(),
                count: members.len(),
            });
        }
        let mut members = members;
        root.child(c as u64).shuffle(&mut members);
        let counts = largest_remainder(members.len(), &weights);
        let mut start = 0;
        for (part, n) in parts.iter_mut().zip(counts) {
            part.extend_from_slice(&members[start..start + n]);
            start += n;
        }
    }
    let [mut tr, mut va, mut te] = parts;
    tr.sort_unstable();
    va.sort_unstable();
    te.sort_unstable();
    Ok((dataset.subset(&tr), dataset.subset(&va), dataset.subset(&te)))
}

/// Parameters of the synthetic imbalanced flow generator.
///
/// Class `c` gets a share of `total` proportional to `(c + 1)^-zipf`. Each
/// class owns a per-position size template (a longer-than-`N` sequence, so
/// flows can start at a random `offset` into it), a two-state direction
/// chain and an IAT scale. Class templates deviate from a shared template
/// by `separation` (log scale); `size_spread` and `iat_spread` add per-flow
/// log-normal noise, so overlap grows as separation shrinks or spread grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub total: usize,
    pub zipf: f64,
    pub series_len: usize,
    pub separation: f64,
    pub size_spread: f64,
    pub iat_spread: f64,
    pub max_offset: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            total: 5000,
            zipf: 1.0,
            series_len: DEFAULT_SERIES_LEN,
            separation: 0.25,
            size_spread: 0.5,
            iat_spread: 1.0,
            max_offset: 3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Synth(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.total < 10 * self.classes {
            return bad(format!(
                "total must be at least 10 per class ({}), got {}",
                10 * self.classes,
                self.total
            ));
        }
        if !(self.zipf >= 0.0 && self.zipf.is_finite()) {
            return bad(format!("zipf exponent must be >= 0, got {}", self.zipf));
        }
        if self.series_len < 2 {
            return bad(format!("series_len must be >= 2, got {}", self.series_len));
        }
        for (name, v) in [
            ("separation", self.separation),
            ("size_spread", self.size_spread),
            ("iat_spread", self.iat_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if let Some(c) = self.class_counts().iter().position(|&n| n == 0) {
            return bad(format!("class {c} would receive no flows"));
        }
        Ok(())
    }

    /// Flows per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let w: Vec<f64> = (0..self.classes)
            .map(|c| ((c + 1) as f64).powf(-self.zipf))
            .collect();
        largest_remainder(self.total, &w)
    }
}

struct ClassModel {
    log_sizes: Vec<f64>,
    p_up_first: f64,
    p_stay: f64,
    log_iat: f64,
}

const MIN_LOG_SIZE: f64 = 3.6; // ~40 bytes
const MAX_LOG_SIZE: f64 = 7.3; // ~1500 bytes

fn class_model(cfg: &SynthConfig, shared: &[f64], rng: &mut RngStream) -> ClassModel {
    let sep = cfg.separation;
    let log_sizes = shared
        .iter()
        .map(|&b| (b + 4.0 * sep * rng.standard_normal()).clamp(MIN_LOG_SIZE, MAX_LOG_SIZE))
        .collect();
    ClassModel {
        log_sizes,
        p_up_first: (0.5 + sep * rng.standard_normal()).clamp(0.05, 0.95),
        p_stay: (0.6 + sep * rng.standard_normal()).clamp(0.05, 0.95),
        log_iat: -4.0 + 4.0 * sep * rng.standard_normal(),
    }
}

pub fn synthesize(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    cfg.check()?;
    let n = cfg.series_len;
    let root = RngStream::new(cfg.seed);
    let mut shared_rng = root.child(u64::MAX);
    let shared: Vec<f64> = (0..n + cfg.max_offset)
        .map(|_| shared_rng.uniform_in(4.0, 7.0))
        .collect();
    let labels: Vec<String> = (0..cfg.classes).map(|c| format!("app{c:02}")).collect();
    let mut samples = Vec::with_capacity(cfg.total);
    for (c, count) in cfg.class_counts().into_iter().enumerate() {
        let model = class_model(cfg, &shared, &mut root.child(2 * c as u64));
        let mut rng = root.child(2 * c as u64 + 1);
        for _ in 0..count {
            samples.push(synth_flow(cfg, &model, c, &mut rng));
        }
    }
    Ok(Dataset::new(samples, labels)?)
}

fn synth_flow(cfg: &SynthConfig, m: &ClassModel, label: usize, rng: &mut RngStream) -> FlowSample {
    let n = cfg.series_len;
    let l = rng.int_inclusive((n / 2).max(2).min(n), n);
    let offset = rng.int_inclusive(0, cfg.max_offset);
    let mut s = FlowSample::padding(n, label);
    s.valid_len = l;
    let mut dir: i8 = if rng.bernoulli(m.p_up_first) { 1 } else { -1 };
    for t in 0..l {
        let log_size = m.log_sizes[offset + t] + cfg.size_spread * rng.standard_normal();
        s.sizes[t] = log_size.exp().round().clamp(1.0, 65_535.0) as u32;
        if t > 0 && !rng.bernoulli(m.p_stay) {
            dir = -dir;
        }
        s.dirs[t] = dir;
        let iat = (m.log_iat + cfg.iat_spread * rng.standard_normal()).exp();
        s.iats[t] = if t == 0 { 0.0 } else { iat };
    }
    s
}
