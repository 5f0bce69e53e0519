//! Flow samples, datasets and feature preprocessing.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of packets kept per flow.
pub const DEFAULT_SERIES_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("malformed sample: {0}")]
    Malformed(String),
    #[error("invalid sample: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("label {label} out of range for a vocabulary of {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("inconsistent series length: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid normalization config: {0}")]
    Norm(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// First `N` packets of a flow: sizes, directions and inter-arrival times.
///
/// Positions `>= valid_len` are padding and hold zeros in all three series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    /// Bytes per packet.
    pub sizes: Vec<u32>,
    /// +1 upstream, -1 downstream, 0 padding (or a masked packet).
    pub dirs: Vec<i8>,
    /// Seconds since the previous packet; `iats[0]` is 0 by convention.
    pub iats: Vec<f64>,
    pub valid_len: usize,
    pub label: usize,
}

impl FlowSample {
    /// Builds a sample and checks the strict invariants.
    pub fn new(
        sizes: Vec<u32>,
        dirs: Vec<i8>,
        iats: Vec<f64>,
        valid_len: usize,
        label: usize,
    ) -> Result<Self, FlowError> {
        let s = Self {
            sizes,
            dirs,
            iats,
            valid_len,
            label,
        };
        let v = validate(&s);
        if v.is_empty() {
            Ok(s)
        } else {
            Err(FlowError::Invalid(v))
        }
    }

    /// Builds a sample from its valid prefix, zero-padding to `n`.
    pub fn from_prefix(
        sizes: &[u32],
        dirs: &[i8],
        iats: &[f64],
        n: usize,
        label: usize,
    ) -> Result<Self, FlowError> {
        let l = sizes.len();
        if dirs.len() != l || iats.len() != l {
            return Err(FlowError::Malformed(format!(
                "prefix lengths differ: sizes {}, dirs {}, iats {}",
                l,
                dirs.len(),
                iats.len()
            )));
        }
        if l > n {
            return Err(FlowError::LengthMismatch {
                expected: n,
                found: l,
            });
        }
        let mut s = Self::padding(n, label);
        s.sizes[..l].copy_from_slice(sizes);
        s.dirs[..l].copy_from_slice(dirs);
        s.iats[..l].copy_from_slice(iats);
        s.valid_len = l;
        let v = validate(&s);
        if v.is_empty() {
            Ok(s)
        } else {
            Err(FlowError::Invalid(v))
        }
    }

    /// All-zero sample of length `n` with `valid_len = 0` (not valid on its own).
    pub(crate) fn padding(n: usize, label: usize) -> Self {
        Self {
            sizes: vec![0; n],
            dirs: vec![0; n],
            iats: vec![0.0; n],
            valid_len: 0,
            label,
        }
    }

    /// Series length `N`.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// True when position `t` carries no packet data in any feature.
    pub fn is_blank(&self, t: usize) -> bool {
        self.sizes[t] == 0 && self.dirs[t] == 0 && self.iats[t] == 0.0
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0` and NaN payloads.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes
            && self.dirs == other.dirs
            && self.valid_len == other.valid_len
            && self.label == other.label
            && self.iats.len() == other.iats.len()
            && self
                .iats
                .iter()
                .zip(&other.iats)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Sizes,
    Dirs,
    Iats,
    ValidLen,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Sizes => "sizes",
            Field::Dirs => "dirs",
            Field::Iats => "iats",
            Field::ValidLen => "valid_len",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Series length differs from `sizes.len()`.
    SeriesLength,
    /// `valid_len` outside `1..=N`.
    ValidLenRange,
    /// Direction before `valid_len` is not +1 or -1.
    DirectionSign,
    /// Direction outside {-1, 0, +1}.
    DirectionDomain,
    /// Size before `valid_len` is zero.
    SizeZero,
    /// Padding position holds a non-zero value.
    PaddingNonZero,
    NegativeIat,
    NonFiniteIat,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::SeriesLength => "series lengths must match",
            Rule::ValidLenRange => "valid_len must lie in 1..=N",
            Rule::DirectionSign => "direction of a real packet must be +1 or -1",
            Rule::DirectionDomain => "direction must be -1, 0 or +1",
            Rule::SizeZero => "size of a real packet must be >= 1",
            Rule::PaddingNonZero => "padding must be zero",
            Rule::NegativeIat => "iat must be >= 0",
            Rule::NonFiniteIat => "iat must be finite",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: Field,
    pub position: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{}[{}]: {}", self.field, p, self.rule),
            None => write!(f, "{}: {}", self.field, self.rule),
        }
    }
}

impl Violation {
    fn at(field: Field, position: usize, rule: Rule) -> Self {
        Self {
            field,
            position: Some(position),
            rule,
        }
    }
}

/// Checks the strict sample invariants. Empty result means valid.
pub fn validate(sample: &FlowSample) -> Vec<Violation> {
    check(sample, false)
}

/// Like [`validate`], but positions before `valid_len` that are zero in all
/// three features (masked or inserted blanks) are accepted.
pub fn validate_relaxed(sample: &FlowSample) -> Vec<Violation> {
    check(sample, true)
}

fn check(s: &FlowSample, relaxed: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = s.sizes.len();
    if s.dirs.len() != n {
        out.push(Violation {
            field: Field::Dirs,
            position: None,
            rule: Rule::SeriesLength,
        });
    }
    if s.iats.len() != n {
        out.push(Violation {
            field: Field::Iats,
            position: None,
            rule: Rule::SeriesLength,
        });
    }
    if s.valid_len < 1 || s.valid_len > n {
        out.push(Violation {
            field: Field::ValidLen,
            position: None,
            rule: Rule::ValidLenRange,
        });
    }
    if !out.is_empty() {
        return out;
    }
    let l = s.valid_len;
    for t in 0..n {
        let (size, dir, iat) = (s.sizes[t], s.dirs[t], s.iats[t]);
        if !(-1..=1).contains(&dir) {
            out.push(Violation::at(Field::Dirs, t, Rule::DirectionDomain));
        }
        if !iat.is_finite() {
            out.push(Violation::at(Field::Iats, t, Rule::NonFiniteIat));
        } else if iat < 0.0 {
            out.push(Violation::at(Field::Iats, t, Rule::NegativeIat));
        }
        if t < l {
            if relaxed && s.is_blank(t) {
                continue;
            }
            if dir == 0 {
                out.push(Violation::at(Field::Dirs, t, Rule::DirectionSign));
            }
            if size == 0 {
                out.push(Violation::at(Field::Sizes, t, Rule::SizeZero));
            }
        } else {
            if size != 0 {
                out.push(Violation::at(Field::Sizes, t, Rule::PaddingNonZero));
            }
            if dir != 0 && (-1..=1).contains(&dir) {
                out.push(Violation::at(Field::Dirs, t, Rule::PaddingNonZero));
            }
            if iat != 0.0 && iat.is_finite() && iat > 0.0 {
                out.push(Violation::at(Field::Iats, t, Rule::PaddingNonZero));
            }
        }
    }
    out
}

/// Ordered collection of samples with a label vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<FlowSample>,
    labels: Vec<String>,
    class_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(samples: Vec<FlowSample>, labels: Vec<String>) -> Result<Self, FlowError> {
        let k = labels.len();
        let mut class_counts = vec![0; k];
        let n = samples.first().map(FlowSample::len);
        for s in &samples {
            if s.label >= k {
                return Err(FlowError::LabelOutOfRange {
                    label: s.label,
                    classes: k,
                });
            }
            if let Some(n) = n {
                if s.len() != n {
                    return Err(FlowError::LengthMismatch {
                        expected: n,
                        found: s.len(),
                    });
                }
            }
            class_counts[s.label] += 1;
        }
        Ok(Self {
            samples,
            labels,
            class_counts,
        })
    }

    pub fn samples(&self) -> &[FlowSample] {
        &self.samples
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Series length `N`, or `None` for an empty dataset.
    pub fn series_len(&self) -> Option<usize> {
        self.samples.first().map(FlowSample::len)
    }

    /// Sample indices grouped by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.labels.len()];
        for (i, s) in self.samples.iter().enumerate() {
            out[s.label].push(i);
        }
        out
    }

    /// Dataset of the given sample indices, same vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let samples: Vec<FlowSample> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut class_counts = vec![0; self.labels.len()];
        for s in &samples {
            class_counts[s.label] += 1;
        }
        Self {
            samples,
            labels: self.labels.clone(),
            class_counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormConfig {
    pub size_divisor: f64,
    pub iat_log_scale: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            size_divisor: 1460.0,
            iat_log_scale: 10_000f64.ln_1p(),
        }
    }
}

impl NormConfig {
    pub fn check(&self) -> Result<(), FlowError> {
        if !(self.size_divisor > 0.0 && self.size_divisor.is_finite()) {
            return Err(FlowError::Norm(format!(
                "size_divisor must be > 0, got {}",
                self.size_divisor
            )));
        }
        if !(self.iat_log_scale > 0.0 && self.iat_log_scale.is_finite()) {
            return Err(FlowError::Norm(format!(
                "iat_log_scale must be > 0, got {}",
                self.iat_log_scale
            )));
        }
        Ok(())
    }
}

/// Model input: `(size block, dir block, iat block)`, `3N` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Encodes a sample as `sizes / size_divisor ++ dirs ++ ln(1 + 1000 iat) / iat_log_scale`.
pub fn preprocess(sample: &FlowSample, norm: &NormConfig) -> Result<FeatureVector, FlowError> {
    let mut out = vec![0.0; 3 * sample.len()];
    preprocess_into(sample, norm, &mut out)?;
    Ok(FeatureVector(out))
}

/// Allocation-free form of [`preprocess`]; `out` must hold exactly `3N` values.
pub fn preprocess_into(
    sample: &FlowSample,
    norm: &NormConfig,
    out: &mut [f64],
) -> Result<(), FlowError> {
    norm.check()?;
    let n = sample.len();
    if sample.dirs.len() != n || sample.iats.len() != n {
        return Err(FlowError::Malformed("series lengths differ".into()));
    }
    if out.len() != 3 * n {
        return Err(FlowError::LengthMismatch {
            expected: 3 * n,
            found: out.len(),
        });
    }
    for t in 0..n {
        let iat = sample.iats[t];
        if !iat.is_finite() {
            return Err(FlowError::Malformed(format!("non-finite iat at {t}")));
        }
        out[t] = f64::from(sample.sizes[t]) / norm.size_divisor;
        out[n + t] = f64::from(sample.dirs[t]);
        out[2 * n + t] = (iat * 1000.0).ln_1p() / norm.iat_log_scale;
    }
    if let Some(t) = out.iter().position(|v| !v.is_finite()) {
        return Err(FlowError::Malformed(format!("non-finite feature at {t}")));
    }
    Ok(())
}
