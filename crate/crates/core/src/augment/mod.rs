//! Hand-crafted augmentations for flow time series.
//!
//! Fourteen transforms in three families plus a two-sample mix:
//!
//! * amplitude: [`gaussian_noise`], [`spike_noise`], [`gaussian_wrapup`],
//!   [`sine_wrapup`], [`constant_wrapup`];
//! * mask: [`bernoulli_mask`], [`window_mask`];
//! * order: [`interpolation`], [`flip`], [`packet_loss`], [`translation`],
//!   [`wrap`], [`permutation`];
//! * [`cutmix`], which patches a segment of a same-class partner.
//!
//! Every transform is pure: it returns a new sample, keeps `N` and the
//! label, and falls back to returning the input unchanged when the input is
//! too short or too flat for the transform to apply. Amplitude transforms
//! never touch directions and gate sizes and IATs independently through a
//! [`FeaturePolicy`]. Mask and order transforms move or zero whole packets.

mod amplitude;
mod mask;
mod order;
mod spec;

pub use amplitude::{
    constant_wrapup, gaussian_noise, gaussian_wrapup, sine_wrapup, spike_noise, SPIKE_SIZE_SCALE,
};
pub use mask::{bernoulli_mask, window_mask};
pub use order::{cutmix, flip, interpolation, packet_loss, permutation, translation, wrap};
pub use spec::{AugKind, AugmentationSpec, FeaturePolicy};

use thiserror::Error;

use crate::flow::FlowSample;
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugError {
    #[error("invalid augmentation parameter: {0}")]
    Param(String),
    #[error("cannot parse augmentation record: {0}")]
    Parse(String),
    #[error("cutmix requires a partner sample")]
    MissingPartner,
    #[error("cutmix partner has label {partner}, expected {label}")]
    LabelMismatch { label: usize, partner: usize },
    #[error("cutmix partner has series length {partner}, expected {len}")]
    LengthMismatch { len: usize, partner: usize },
}

/// Applies `spec` to `sample`. `partner` is required for cutmix and ignored
/// otherwise.
pub fn apply(
    spec: &AugmentationSpec,
    sample: &FlowSample,
    rng: &mut RngStream,
    partner: Option<&FlowSample>,
) -> Result<FlowSample, AugError> {
    use AugmentationSpec as S;
    Ok(match *spec {
        S::Identity => sample.clone(),
        S::GaussianNoise { policy, sigma_rel } => gaussian_noise(sample, &policy, sigma_rel, rng),
        S::SpikeNoise {
            policy,
            sigma_abs,
            max_spikes,
        } => spike_noise(sample, &policy, sigma_abs, max_spikes, rng),
        S::GaussianWrapup { policy, sigma_mult } => {
            gaussian_wrapup(sample, &policy, sigma_mult, rng)
        }
        S::SineWrapup {
            policy,
            amp,
            period,
        } => sine_wrapup(sample, &policy, amp, period, rng),
        S::ConstantWrapup { c } => constant_wrapup(sample, c, rng),
        S::BernoulliMask { p_mask } => bernoulli_mask(sample, p_mask, rng),
        S::WindowMask { win } => window_mask(sample, win, rng),
        S::Interpolation => interpolation(sample, rng),
        S::Flip => flip(sample),
        S::PacketLoss { dt_frac } => packet_loss(sample, dt_frac, rng),
        S::Translation { k_max } => translation(sample, k_max, rng),
        S::Wrap { p_edit } => wrap(sample, p_edit, rng),
        S::Permutation { m } => permutation(sample, m, rng),
        S::CutMix { len } => {
            let b = partner.ok_or(AugError::MissingPartner)?;
            if b.label != sample.label {
                return Err(AugError::LabelMismatch {
                    label: sample.label,
                    partner: b.label,
                });
            }
            if b.len() != sample.len() {
                return Err(AugError::LengthMismatch {
                    len: sample.len(),
                    partner: b.len(),
                });
            }
            cutmix(sample, b, len, rng)
        }
    })
}

/// Rounds half up and clamps to a real-packet size (>= 1).
pub(crate) fn to_size(x: f64) -> u32 {
    let r = (x + 0.5).floor();
    if r.is_nan() || r < 1.0 {
        1
    } else if r > f64::from(u32::MAX) {
        u32::MAX
    } else {
        r as u32
    }
}
