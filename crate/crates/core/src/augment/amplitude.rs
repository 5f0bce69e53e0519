//! Additive and multiplicative noise on sizes and IATs.
//!
//! Draw order, which the replay tests depend on: one uniform gate draw for
//! sizes, one for IATs, then the transform draws for sizes (if gated) and
//! for IATs (if gated). Only positions before `valid_len` holding a packet
//! are altered; blank (masked) positions stay zero.

use std::f64::consts::PI;

use super::spec::FeaturePolicy;
use super::to_size;
use crate::flow::FlowSample;
use crate::rng::RngStream;

/// Bytes corresponding to one unit of `sigma_abs` for spike noise on sizes.
pub const SPIKE_SIZE_SCALE: f64 = 1460.0;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Feature {
    Size,
    Iat,
}

fn gates(policy: &FeaturePolicy, rng: &mut RngStream) -> [(Feature, bool); 2] {
    let size = rng.bernoulli(policy.p_size);
    let iat = rng.bernoulli(policy.p_iat);
    [(Feature::Size, size), (Feature::Iat, iat)]
}

/// Transform of one feature's valid prefix; `values` arrive as `f64` and are
/// written back with the feature's clamping rule.
fn map_feature(
    s: &mut FlowSample,
    feature: Feature,
    f: impl FnOnce(&mut [f64], &[bool]),
) {
    let l = s.valid_len;
    let live: Vec<bool> = (0..l).map(|t| !s.is_blank(t)).collect();
    let mut vals: Vec<f64> = match feature {
        Feature::Size => s.sizes[..l].iter().map(|&v| f64::from(v)).collect(),
        Feature::Iat => s.iats[..l].to_vec(),
    };
    f(&mut vals, &live);
    for t in 0..l {
        if !live[t] {
            continue;
        }
        match feature {
            Feature::Size => s.sizes[t] = to_size(vals[t]),
            Feature::Iat => s.iats[t] = vals[t].max(0.0),
        }
    }
}

fn live_std(vals: &[f64], live: &[bool]) -> f64 {
    let xs: Vec<f64> = vals
        .iter()
        .zip(live)
        .filter(|(_, &l)| l)
        .map(|(&v, _)| v)
        .collect();
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Adds `N(0, (sigma_rel * std)^2)` noise per position, where `std` is the
/// population standard deviation of the feature over the valid prefix.
pub fn gaussian_noise(
    sample: &FlowSample,
    policy: &FeaturePolicy,
    sigma_rel: f64,
    rng: &mut RngStream,
) -> FlowSample {
    let mut out = sample.clone();
    for (feature, on) in gates(policy, rng) {
        if !on {
            continue;
        }
        map_feature(&mut out, feature, |vals, live| {
            let scale = sigma_rel * live_std(vals, live);
            if scale == 0.0 || !scale.is_finite() {
                return;
            }
            for (v, &l) in vals.iter_mut().zip(live) {
                let e = rng.normal(0.0, scale);
                if l {
                    *v += e;
                }
            }
        });
    }
    out
}

/// Adds `|N(0, sigma^2)|` to between 1 and `max_spikes` non-zero positions.
///
/// `sigma` is `sigma_abs` seconds for IATs and `sigma_abs * SPIKE_SIZE_SCALE`
/// bytes for sizes.
pub fn spike_noise(
    sample: &FlowSample,
    policy: &FeaturePolicy,
    sigma_abs: f64,
    max_spikes: usize,
    rng: &mut RngStream,
) -> FlowSample {
    let mut out = sample.clone();
    for (feature, on) in gates(policy, rng) {
        if !on {
            continue;
        }
        let sigma = match feature {
            Feature::Size => sigma_abs * SPIKE_SIZE_SCALE,
            Feature::Iat => sigma_abs,
        };
        map_feature(&mut out, feature, |vals, live| {
            let nonzero: Vec<usize> = (0..vals.len()).filter(|&t| live[t] && vals[t] != 0.0).collect();
            let cap = max_spikes.min(nonzero.len());
            if cap == 0 || sigma == 0.0 {
                return;
            }
            let k = rng.int_inclusive(1, cap);
            for pick in rng.choose_distinct(nonzero.len(), k) {
                vals[nonzero[pick]] += rng.normal(0.0, sigma).abs();
            }
        });
    }
    out
}

/// Multiplies each position by `max(0, N(1, sigma_mult^2))`.
pub fn gaussian_wrapup(
    sample: &FlowSample,
    policy: &FeaturePolicy,
    sigma_mult: f64,
    rng: &mut RngStream,
) -> FlowSample {
    let mut out = sample.clone();
    for (feature, on) in gates(policy, rng) {
        if !on || sigma_mult == 0.0 {
            continue;
        }
        map_feature(&mut out, feature, |vals, live| {
            for (v, &l) in vals.iter_mut().zip(live) {
                let g = rng.normal(1.0, sigma_mult).max(0.0);
                if l {
                    *v *= g;
                }
            }
        });
    }
    out
}

/// Multiplies by `1 + A sin(2 pi t / T + phi)` with `A`, `T`, `phi` drawn once
/// per gated feature, in that order.
pub fn sine_wrapup(
    sample: &FlowSample,
    policy: &FeaturePolicy,
    amp: (f64, f64),
    period: (f64, f64),
    rng: &mut RngStream,
) -> FlowSample {
    let mut out = sample.clone();
    for (feature, on) in gates(policy, rng) {
        if !on {
            continue;
        }
        let a = rng.uniform_in(amp.0, amp.1);
        let p = rng.uniform_in(period.0, period.1);
        let phi = rng.uniform_in(0.0, 2.0 * PI);
        map_feature(&mut out, feature, |vals, live| {
            for (t, (v, &l)) in vals.iter_mut().zip(live).enumerate() {
                if l {
                    *v *= 1.0 + a * (2.0 * PI * t as f64 / p + phi).sin();
                }
            }
        });
    }
    out
}

/// Scales every IAT by one factor `c ~ U(c_range)`; sizes and directions untouched.
pub fn constant_wrapup(sample: &FlowSample, c_range: (f64, f64), rng: &mut RngStream) -> FlowSample {
    let c = rng.uniform_in(c_range.0, c_range.1);
    scale_iats(sample, c)
}

pub(crate) fn scale_iats(sample: &FlowSample, c: f64) -> FlowSample {
    let mut out = sample.clone();
    map_feature(&mut out, Feature::Iat, |vals, live| {
        for (v, &l) in vals.iter_mut().zip(live) {
            if l {
                *v *= c;
            }
        }
    });
    out
}
