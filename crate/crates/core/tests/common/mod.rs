#![allow(dead_code)]

use flowaug::augment::{AugKind, AugmentationSpec};
use flowaug::flow::{Dataset, FlowSample};
use flowaug::RngStream;

/// A strictly valid sample with `n` positions.
pub fn random_sample(rng: &mut RngStream, n: usize, label: usize) -> FlowSample {
    let l = rng.int_inclusive(1, n);
    let sizes: Vec<u32> = (0..l)
        .map(|_| {
            if rng.bernoulli(0.05) {
                rng.int_inclusive(1, 65_535) as u32
            } else {
                rng.int_inclusive(1, 1500) as u32
            }
        })
        .collect();
    let dirs: Vec<i8> = (0..l).map(|_| if rng.bernoulli(0.5) { 1 } else { -1 }).collect();
    let iats: Vec<f64> = (0..l)
        .map(|t| {
            if (t == 0 && rng.bernoulli(0.5)) || rng.bernoulli(0.1) {
                0.0
            } else {
                rng.normal(-4.0, 2.0).exp()
            }
        })
        .collect();
    FlowSample::from_prefix(&sizes, &dirs, &iats, n, label).expect("generator yields valid samples")
}

pub fn random_dataset(rng: &mut RngStream, n: usize, classes: usize, count: usize) -> Dataset {
    let samples = (0..count)
        .map(|i| {
            let label = if i < classes { i } else { rng.index(classes) };
            random_sample(rng, n, label)
        })
        .collect();
    let labels = (0..classes).map(|c| format!("class-{c}")).collect();
    Dataset::new(samples, labels).unwrap()
}

fn policy(rng: &mut RngStream) -> String {
    let pick = |rng: &mut RngStream| ["0", "0.5", "1", "0.3"][rng.index(4)];
    format!("p_size={} p_dir=0 p_iat={}", pick(rng), pick(rng))
}

fn range_f(rng: &mut RngStream, lo: f64, hi: f64) -> (f64, f64) {
    let a = rng.uniform_in(lo, hi);
    let b = rng.uniform_in(lo, hi);
    (a.min(b), a.max(b))
}

fn range_i(rng: &mut RngStream, lo: usize, hi: usize) -> (usize, usize) {
    let a = rng.int_inclusive(lo, hi);
    let b = rng.int_inclusive(lo, hi);
    (a.min(b), a.max(b))
}

/// A spec of `kind` with randomized valid parameters, built through the
/// text form.
pub fn random_spec(rng: &mut RngStream, kind: AugKind, n: usize) -> AugmentationSpec {
    let text = match kind {
        AugKind::Identity => "identity".to_string(),
        AugKind::GaussianNoise => format!("gaussian_noise sigma_rel={} {}", rng.uniform_in(0.0, 0.5), policy(rng)),
        AugKind::SpikeNoise => format!(
            "spike_noise sigma_abs={} max_spikes={} {}",
            rng.uniform_in(0.0, 0.2),
            rng.int_inclusive(1, 6),
            policy(rng)
        ),
        AugKind::GaussianWrapup => format!("gaussian_wrapup sigma_mult={} {}", rng.uniform_in(0.0, 0.5), policy(rng)),
        AugKind::SineWrapup => {
            let a = range_f(rng, 0.0, 0.9);
            let p = range_f(rng, 1.0, 30.0);
            format!(
                "sine_wrapup amp_lo={} amp_hi={} period_lo={} period_hi={} {}",
                a.0,
                a.1,
                p.0,
                p.1,
                policy(rng)
            )
        }
        AugKind::ConstantWrapup => {
            let c = range_f(rng, 0.05, 4.0);
            format!("constant_wrapup c_lo={} c_hi={}", c.0, c.1)
        }
        AugKind::BernoulliMask => format!("bernoulli_mask p_mask={}", rng.uniform()),
        AugKind::WindowMask => format!("window_mask win={}", rng.int_inclusive(1, n + 1)),
        AugKind::Interpolation => "interpolation".to_string(),
        AugKind::Flip => "flip".to_string(),
        AugKind::PacketLoss => format!("packet_loss dt_frac={}", rng.uniform_in(0.0, 0.99)),
        AugKind::Translation => format!("translation k_max={}", rng.int_inclusive(0, n + 1)),
        AugKind::Wrap => format!("wrap p_edit={}", rng.uniform_in(0.0, 0.5)),
        AugKind::Permutation => {
            let m = range_i(rng, 1, 8);
            format!("permutation m_lo={} m_hi={}", m.0, m.1)
        }
        AugKind::CutMix => {
            let w = range_i(rng, 1, n);
            format!("cutmix len_lo={} len_hi={}", w.0, w.1)
        }
    };
    text.parse().unwrap_or_else(|e| panic!("`{text}`: {e}"))
}

/// A parameter setting under which `kind` must return its input.
pub fn identity_spec(kind: AugKind, n: usize) -> Option<AugmentationSpec> {
    let text = match kind {
        AugKind::Identity => "identity".to_string(),
        AugKind::GaussianNoise => "gaussian_noise sigma_rel=0 p_size=1 p_iat=1".into(),
        AugKind::SpikeNoise => "spike_noise sigma_abs=0 p_size=1 p_iat=1".into(),
        AugKind::GaussianWrapup => "gaussian_wrapup sigma_mult=0 p_size=1 p_iat=1".into(),
        AugKind::SineWrapup => "sine_wrapup amp_lo=0 amp_hi=0 p_size=1 p_iat=1".into(),
        AugKind::ConstantWrapup => "constant_wrapup c_lo=1 c_hi=1".into(),
        AugKind::BernoulliMask => "bernoulli_mask p_mask=0".into(),
        AugKind::WindowMask => format!("window_mask win={}", n + 1),
        AugKind::PacketLoss => "packet_loss dt_frac=0".into(),
        AugKind::Translation => "translation k_max=0".into(),
        AugKind::Wrap => "wrap p_edit=0".into(),
        AugKind::Permutation => "permutation m_lo=1 m_hi=1".into(),
        AugKind::Interpolation | AugKind::Flip | AugKind::CutMix => return None,
    };
    Some(text.parse().unwrap())
}
