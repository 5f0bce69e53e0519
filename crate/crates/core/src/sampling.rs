//! Class-weighted sampling and batch doubling.
//!
//! With an augmentation, a batch holds `B` drawn originals followed by one
//! augmented copy of each (entry `i + B` derives from entry `i`). Without
//! one, `2B` originals are drawn so both protocols see `2B` samples per step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{self, AugError, AugmentationSpec};
use crate::flow::{Dataset, FlowSample};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("cannot sample from an empty dataset")]
    EmptyDataset,
    #[error("class `{0}` has no samples; weighted sampling needs every class populated")]
    EmptyClass(String),
    #[error("batch size must be >= 1")]
    ZeroBatch,
    #[error(transparent)]
    Aug(#[from] AugError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Uniform over classes, then uniform within the class.
    Weighted,
    /// Uniform over samples.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    pub batch_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplerMode::Weighted,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Original,
    Augmented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub samples: Vec<FlowSample>,
    pub provenance: Vec<Provenance>,
    /// Dataset index each entry was drawn from (augmented entries carry
    /// their source's index).
    pub sources: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Batch sampler bound to one dataset.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    dataset: &'a Dataset,
    config: SamplerConfig,
    by_class: Vec<Vec<usize>>,
}

impl<'a> Sampler<'a> {
    pub fn new(dataset: &'a Dataset, config: SamplerConfig) -> Result<Self, SampleError> {
        if dataset.is_empty() {
            return Err(SampleError::EmptyDataset);
        }
        if config.batch_size == 0 {
            return Err(SampleError::ZeroBatch);
        }
        let by_class = dataset.class_indices();
        if config.mode == SamplerMode::Weighted {
            if let Some(c) = by_class.iter().position(Vec::is_empty) {
                return Err(SampleError::EmptyClass(dataset.labels()[c].clone()));
            }
        }
        Ok(Self {
            dataset,
            config,
            by_class,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Batches per epoch: `ceil(|dataset| / B)`.
    pub fn batches_per_epoch(&self) -> usize {
        self.dataset.len().div_ceil(self.config.batch_size)
    }

    /// `count` dataset indices, with replacement.
    pub fn draw_indices(&self, count: usize, rng: &mut RngStream) -> Vec<usize> {
        (0..count).map(|_| self.draw_one(rng)).collect()
    }

    fn draw_one(&self, rng: &mut RngStream) -> usize {
        match self.config.mode {
            SamplerMode::Uniform => rng.index(self.dataset.len()),
            SamplerMode::Weighted => {
                let members = &self.by_class[rng.index(self.by_class.len())];
                members[rng.index(members.len())]
            }
        }
    }

    /// One training batch of `2B` entries.
    pub fn make_batch(
        &self,
        spec: &AugmentationSpec,
        rng: &mut RngStream,
    ) -> Result<Batch, SampleError> {
        let b = self.config.batch_size;
        let samples = self.dataset.samples();
        if spec.is_identity() {
            let idx = self.draw_indices(2 * b, rng);
            return Ok(Batch {
                samples: idx.iter().map(|&i| samples[i].clone()).collect(),
                provenance: vec![Provenance::Original; 2 * b],
                sources: idx,
            });
        }
        let idx = self.draw_indices(b, rng);
        let needs_partner = matches!(spec, AugmentationSpec::CutMix { .. });
        let mut out: Vec<FlowSample> = idx.iter().map(|&i| samples[i].clone()).collect();
        for pos in 0..b {
            let src = &samples[idx[pos]];
            let partner = if needs_partner {
                Some(&samples[self.partner_for(&idx, pos, rng)])
            } else {
                None
            };
            out.push(augment::apply(spec, src, rng, partner)?);
        }
        let mut sources = idx.clone();
        sources.extend_from_slice(&idx);
        let mut provenance = vec![Provenance::Original; b];
        provenance.extend(std::iter::repeat_n(Provenance::Augmented, b));
        Ok(Batch {
            samples: out,
            provenance,
            sources,
        })
    }

    /// Same-class partner for batch position `pos`: another batch slot of the
    /// same class if any, otherwise another dataset member of the class
    /// (the sample itself for singleton classes).
    fn partner_for(&self, idx: &[usize], pos: usize, rng: &mut RngStream) -> usize {
        let samples = self.dataset.samples();
        let label = samples[idx[pos]].label;
        let in_batch: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|&(j, &i)| j != pos && samples[i].label == label)
            .map(|(_, &i)| i)
            .collect();
        if !in_batch.is_empty() {
            return in_batch[rng.index(in_batch.len())];
        }
        let others: Vec<usize> = self.by_class[label]
            .iter()
            .copied()
            .filter(|&i| i != idx[pos])
            .collect();
        if others.is_empty() {
            idx[pos]
        } else {
            others[rng.index(others.len())]
        }
    }
}

/// Convenience form of [`Sampler::draw_indices`].
pub fn draw_indices(
    dataset: &Dataset,
    config: SamplerConfig,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>, SampleError> {
    Ok(Sampler::new(dataset, config)?.draw_indices(count, rng))
}

/// Convenience form of [`Sampler::make_batch`].
pub fn make_batch(
    dataset: &Dataset,
    config: SamplerConfig,
    spec: &AugmentationSpec,
    rng: &mut RngStream,
) -> Result<Batch, SampleError> {
    Sampler::new(dataset, config)?.make_batch(spec, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugKind;

    fn dataset(counts: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                let size = 40 + (i % 50) as u32;
                samples.push(
                    FlowSample::from_prefix(
                        &[size, size + 1, size + 2, 9],
                        &[1, -1, 1, 1],
                        &[0.0, 0.01, 0.02, 0.5],
                        8,
                        c,
                    )
                    .unwrap(),
                );
            }
        }
        let labels = (0..counts.len()).map(|c| format!("c{c}")).collect();
        Dataset::new(samples, labels).unwrap()
    }

    fn cfg(mode: SamplerMode, b: usize) -> SamplerConfig {
        SamplerConfig {
            mode,
            batch_size: b,
        }
    }

    fn minority_freq(mode: SamplerMode) -> f64 {
        let d = dataset(&[900, 100]);
        let mut rng = RngStream::new(17);
        let idx = draw_indices(&d, cfg(mode, 1), 10_000, &mut rng).unwrap();
        idx.iter().filter(|&&i| d.samples()[i].label == 1).count() as f64 / 10_000.0
    }

    #[test]
    fn weighted_mode_balances_classes() {
        let f = minority_freq(SamplerMode::Weighted);
        assert!((f - 0.5).abs() <= 0.015, "{f}");
    }

    #[test]
    fn uniform_mode_follows_prevalence() {
        let f = minority_freq(SamplerMode::Uniform);
        assert!((f - 0.1).abs() <= 0.009, "{f}");
    }

    #[test]
    fn single_class_modes_coincide_in_support() {
        let d = dataset(&[30]);
        let mut r = RngStream::new(0);
        for mode in [SamplerMode::Weighted, SamplerMode::Uniform] {
            let idx = draw_indices(&d, cfg(mode, 4), 200, &mut r).unwrap();
            assert!(idx.iter().all(|&i| i < 30));
        }
    }

    #[test]
    fn empty_class_rejected_in_weighted_mode() {
        let mut d = dataset(&[5]);
        d = Dataset::new(d.samples().to_vec(), vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(
            Sampler::new(&d, cfg(SamplerMode::Weighted, 4)).unwrap_err(),
            SampleError::EmptyClass("b".into())
        );
        assert!(Sampler::new(&d, cfg(SamplerMode::Uniform, 4)).is_ok());
    }

    #[test]
    fn identity_batch_draws_2b_originals() {
        let d = dataset(&[50, 10]);
        let mut r = RngStream::new(1);
        let b = make_batch(&d, cfg(SamplerMode::Weighted, 16), &AugmentationSpec::Identity, &mut r)
            .unwrap();
        assert_eq!(b.len(), 32);
        assert!(b.provenance.iter().all(|&p| p == Provenance::Original));
    }

    #[test]
    fn augmented_batch_pairs_originals() {
        let d = dataset(&[50, 10]);
        let spec = AugmentationSpec::default_for(AugKind::GaussianNoise);
        let mut r = RngStream::new(2);
        let b = make_batch(&d, cfg(SamplerMode::Weighted, 16), &spec, &mut r).unwrap();
        assert_eq!(b.len(), 32);
        for i in 0..16 {
            assert_eq!(b.provenance[i], Provenance::Original);
            assert_eq!(b.provenance[i + 16], Provenance::Augmented);
            assert_eq!(b.sources[i], b.sources[i + 16]);
            assert_eq!(b.samples[i].label, b.samples[i + 16].label);
            assert_eq!(&b.samples[i], &d.samples()[b.sources[i]]);
        }
    }

    #[test]
    fn batches_replay_under_seed() {
        let d = dataset(&[50, 10, 3]);
        for kind in AugKind::TRANSFORMS {
            let spec = AugmentationSpec::default_for(kind);
            let b1 = make_batch(&d, cfg(SamplerMode::Weighted, 8), &spec, &mut RngStream::new(5))
                .unwrap();
            let b2 = make_batch(&d, cfg(SamplerMode::Weighted, 8), &spec, &mut RngStream::new(5))
                .unwrap();
            assert_eq!(b1, b2, "{kind}");
        }
    }

    #[test]
    fn cutmix_partner_for_singleton_class() {
        let d = dataset(&[40, 1]);
        let spec = AugmentationSpec::default_for(AugKind::CutMix);
        let mut r = RngStream::new(8);
        for _ in 0..20 {
            let b = make_batch(&d, cfg(SamplerMode::Weighted, 4), &spec, &mut r).unwrap();
            for i in 0..4 {
                if b.samples[i].label == 1 {
                    // The lone member is its own partner, so cutmix is a no-op.
                    assert_eq!(b.samples[i], b.samples[i + 4]);
                }
            }
        }
    }

    #[test]
    fn epoch_length() {
        let d = dataset(&[50, 11]);
        let s = Sampler::new(&d, cfg(SamplerMode::Weighted, 32)).unwrap();
        assert_eq!(s.batches_per_epoch(), 2);
    }
}
