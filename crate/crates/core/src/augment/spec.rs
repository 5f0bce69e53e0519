use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::AugError;

/// Per-feature alteration probabilities for the amplitude transforms.
///
/// Directions are never altered by amplitude transforms, so `p_dir` is kept
/// for completeness and must stay 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePolicy {
    pub p_size: f64,
    pub p_dir: f64,
    pub p_iat: f64,
}

impl Default for FeaturePolicy {
    fn default() -> Self {
        Self {
            p_size: 0.5,
            p_dir: 0.0,
            p_iat: 0.5,
        }
    }
}

impl FeaturePolicy {
    pub const ALWAYS: Self = Self {
        p_size: 1.0,
        p_dir: 0.0,
        p_iat: 1.0,
    };

    fn check(&self) -> Result<(), AugError> {
        check_prob("p_size", self.p_size)?;
        check_prob("p_iat", self.p_iat)?;
        if self.p_dir != 0.0 {
            return Err(AugError::Param(
                "p_dir must be 0: amplitude transforms never alter directions".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugKind {
    Identity,
    GaussianNoise,
    SpikeNoise,
    GaussianWrapup,
    SineWrapup,
    ConstantWrapup,
    BernoulliMask,
    WindowMask,
    Interpolation,
    Flip,
    PacketLoss,
    Translation,
    Wrap,
    Permutation,
    CutMix,
}

impl AugKind {
    /// The fourteen transforms, without `Identity`.
    pub const TRANSFORMS: [AugKind; 14] = [
        AugKind::GaussianNoise,
        AugKind::SpikeNoise,
        AugKind::GaussianWrapup,
        AugKind::SineWrapup,
        AugKind::ConstantWrapup,
        AugKind::BernoulliMask,
        AugKind::WindowMask,
        AugKind::Interpolation,
        AugKind::Flip,
        AugKind::PacketLoss,
        AugKind::Translation,
        AugKind::Wrap,
        AugKind::Permutation,
        AugKind::CutMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugKind::Identity => "identity",
            AugKind::GaussianNoise => "gaussian_noise",
            AugKind::SpikeNoise => "spike_noise",
            AugKind::GaussianWrapup => "gaussian_wrapup",
            AugKind::SineWrapup => "sine_wrapup",
            AugKind::ConstantWrapup => "constant_wrapup",
            AugKind::BernoulliMask => "bernoulli_mask",
            AugKind::WindowMask => "window_mask",
            AugKind::Interpolation => "interpolation",
            AugKind::Flip => "flip",
            AugKind::PacketLoss => "packet_loss",
            AugKind::Translation => "translation",
            AugKind::Wrap => "wrap",
            AugKind::Permutation => "permutation",
            AugKind::CutMix => "cutmix",
        }
    }

    pub fn all_names() -> Vec<&'static str> {
        std::iter::once(AugKind::Identity)
            .chain(AugKind::TRANSFORMS)
            .map(AugKind::name)
            .collect()
    }
}

impl FromStr for AugKind {
    type Err = AugError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(AugKind::Identity)
            .chain(AugKind::TRANSFORMS)
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                AugError::Parse(format!(
                    "unknown augmentation `{s}` (expected one of: {})",
                    AugKind::all_names().join(", ")
                ))
            })
    }
}

impl fmt::Display for AugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One augmentation with its parameters.
///
/// The text form is the kind name followed by `key=value` pairs separated
/// by whitespace or commas, e.g. `sine_wrapup amp_hi=0.3 p_size=1`. Missing
/// keys take their defaults; [`fmt::Display`] prints every key.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AugmentationSpec {
    #[default]
    Identity,
    GaussianNoise {
        policy: FeaturePolicy,
        sigma_rel: f64,
    },
    SpikeNoise {
        policy: FeaturePolicy,
        sigma_abs: f64,
        max_spikes: usize,
    },
    GaussianWrapup {
        policy: FeaturePolicy,
        sigma_mult: f64,
    },
    SineWrapup {
        policy: FeaturePolicy,
        amp: (f64, f64),
        period: (f64, f64),
    },
    ConstantWrapup {
        c: (f64, f64),
    },
    BernoulliMask {
        p_mask: f64,
    },
    WindowMask {
        win: usize,
    },
    Interpolation,
    Flip,
    PacketLoss {
        dt_frac: f64,
    },
    Translation {
        k_max: usize,
    },
    Wrap {
        p_edit: f64,
    },
    Permutation {
        m: (usize, usize),
    },
    CutMix {
        len: (usize, usize),
    },
}

impl AugmentationSpec {
    pub fn default_for(kind: AugKind) -> Self {
        let policy = FeaturePolicy::default();
        match kind {
            AugKind::Identity => Self::Identity,
            AugKind::GaussianNoise => Self::GaussianNoise {
                policy,
                sigma_rel: 0.1,
            },
            AugKind::SpikeNoise => Self::SpikeNoise {
                policy,
                sigma_abs: 0.05,
                max_spikes: 3,
            },
            AugKind::GaussianWrapup => Self::GaussianWrapup {
                policy,
                sigma_mult: 0.1,
            },
            AugKind::SineWrapup => Self::SineWrapup {
                policy,
                amp: (0.1, 0.5),
                period: (4.0, 20.0),
            },
            AugKind::ConstantWrapup => Self::ConstantWrapup { c: (0.5, 2.0) },
            AugKind::BernoulliMask => Self::BernoulliMask { p_mask: 0.1 },
            AugKind::WindowMask => Self::WindowMask { win: 2 },
            AugKind::Interpolation => Self::Interpolation,
            AugKind::Flip => Self::Flip,
            AugKind::PacketLoss => Self::PacketLoss { dt_frac: 0.2 },
            AugKind::Translation => Self::Translation { k_max: 3 },
            AugKind::Wrap => Self::Wrap { p_edit: 0.15 },
            AugKind::Permutation => Self::Permutation { m: (2, 4) },
            AugKind::CutMix => Self::CutMix { len: (2, 6) },
        }
    }

    pub fn kind(&self) -> AugKind {
        match self {
            Self::Identity => AugKind::Identity,
            Self::GaussianNoise { .. } => AugKind::GaussianNoise,
            Self::SpikeNoise { .. } => AugKind::SpikeNoise,
            Self::GaussianWrapup { .. } => AugKind::GaussianWrapup,
            Self::SineWrapup { .. } => AugKind::SineWrapup,
            Self::ConstantWrapup { .. } => AugKind::ConstantWrapup,
            Self::BernoulliMask { .. } => AugKind::BernoulliMask,
            Self::WindowMask { .. } => AugKind::WindowMask,
            Self::Interpolation => AugKind::Interpolation,
            Self::Flip => AugKind::Flip,
            Self::PacketLoss { .. } => AugKind::PacketLoss,
            Self::Translation { .. } => AugKind::Translation,
            Self::Wrap { .. } => AugKind::Wrap,
            Self::Permutation { .. } => AugKind::Permutation,
            Self::CutMix { .. } => AugKind::CutMix,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity)
    }

    /// Checks parameter ranges.
    pub fn check(&self) -> Result<(), AugError> {
        match *self {
            Self::Identity | Self::Interpolation | Self::Flip => Ok(()),
            Self::GaussianNoise { policy, sigma_rel } => {
                policy.check()?;
                check_nonneg("sigma_rel", sigma_rel)
            }
            Self::SpikeNoise {
                policy, sigma_abs, ..
            } => {
                policy.check()?;
                check_nonneg("sigma_abs", sigma_abs)
            }
            Self::GaussianWrapup { policy, sigma_mult } => {
                policy.check()?;
                check_nonneg("sigma_mult", sigma_mult)
            }
            Self::SineWrapup {
                policy,
                amp,
                period,
            } => {
                policy.check()?;
                check_nonneg("amp_lo", amp.0)?;
                check_order("amp", amp.0, amp.1)?;
                check_positive("period_lo", period.0)?;
                check_order("period", period.0, period.1)
            }
            Self::ConstantWrapup { c } => {
                check_positive("c_lo", c.0)?;
                check_order("c", c.0, c.1)
            }
            Self::BernoulliMask { p_mask } => check_prob("p_mask", p_mask),
            Self::WindowMask { win } => {
                if win == 0 {
                    Err(AugError::Param("win must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
            Self::PacketLoss { dt_frac } => {
                if (0.0..1.0).contains(&dt_frac) {
                    Ok(())
                } else {
                    Err(AugError::Param(format!(
                        "dt_frac must lie in [0, 1), got {dt_frac}"
                    )))
                }
            }
            Self::Translation { .. } => Ok(()),
            Self::Wrap { p_edit } => {
                if (0.0..=0.5).contains(&p_edit) {
                    Ok(())
                } else {
                    Err(AugError::Param(format!(
                        "p_edit must lie in [0, 0.5], got {p_edit}"
                    )))
                }
            }
            Self::Permutation { m } => check_int_range("m", m, 1),
            Self::CutMix { len } => check_int_range("len", len, 1),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), AugError> {
        let kind = self.kind().name();
        let bad_key = || AugError::Parse(format!("`{key}` is not a parameter of {kind}"));
        let policy_slot = match self {
            Self::GaussianNoise { policy, .. }
            | Self::SpikeNoise { policy, .. }
            | Self::GaussianWrapup { policy, .. }
            | Self::SineWrapup { policy, .. } => Some(policy),
            _ => None,
        };
        if let Some(policy) = policy_slot {
            match key {
                "p_size" => return parse_f64(key, value).map(|v| policy.p_size = v),
                "p_dir" => return parse_f64(key, value).map(|v| policy.p_dir = v),
                "p_iat" => return parse_f64(key, value).map(|v| policy.p_iat = v),
                _ => {}
            }
        }
        match (self, key) {
            (Self::GaussianNoise { sigma_rel, .. }, "sigma_rel") => *sigma_rel = parse_f64(key, value)?,
            (Self::SpikeNoise { sigma_abs, .. }, "sigma_abs") => *sigma_abs = parse_f64(key, value)?,
            (Self::SpikeNoise { max_spikes, .. }, "max_spikes") => {
                *max_spikes = parse_usize(key, value)?
            }
            (Self::GaussianWrapup { sigma_mult, .. }, "sigma_mult") => {
                *sigma_mult = parse_f64(key, value)?
            }
            (Self::SineWrapup { amp, .. }, "amp_lo") => amp.0 = parse_f64(key, value)?,
            (Self::SineWrapup { amp, .. }, "amp_hi") => amp.1 = parse_f64(key, value)?,
            (Self::SineWrapup { period, .. }, "period_lo") => period.0 = parse_f64(key, value)?,
            (Self::SineWrapup { period, .. }, "period_hi") => period.1 = parse_f64(key, value)?,
            (Self::ConstantWrapup { c }, "c_lo") => c.0 = parse_f64(key, value)?,
            (Self::ConstantWrapup { c }, "c_hi") => c.1 = parse_f64(key, value)?,
            (Self::BernoulliMask { p_mask }, "p_mask") => *p_mask = parse_f64(key, value)?,
            (Self::WindowMask { win }, "win") => *win = parse_usize(key, value)?,
            (Self::PacketLoss { dt_frac }, "dt_frac") => *dt_frac = parse_f64(key, value)?,
            (Self::Translation { k_max }, "k_max") => *k_max = parse_usize(key, value)?,
            (Self::Wrap { p_edit }, "p_edit") => *p_edit = parse_f64(key, value)?,
            (Self::Permutation { m }, "m_lo") => m.0 = parse_usize(key, value)?,
            (Self::Permutation { m }, "m_hi") => m.1 = parse_usize(key, value)?,
            (Self::CutMix { len }, "len_lo") => len.0 = parse_usize(key, value)?,
            (Self::CutMix { len }, "len_hi") => len.1 = parse_usize(key, value)?,
            _ => return Err(bad_key()),
        }
        Ok(())
    }

    /// Parameters in canonical order.
    fn params(&self) -> Vec<(&'static str, String)> {
        let pol = |p: &FeaturePolicy| {
            vec![
                ("p_size", fmt_f64(p.p_size)),
                ("p_dir", fmt_f64(p.p_dir)),
                ("p_iat", fmt_f64(p.p_iat)),
            ]
        };
        let mut out = Vec::new();
        match self {
            Self::Identity | Self::Interpolation | Self::Flip => {}
            Self::GaussianNoise { policy, sigma_rel } => {
                out.push(("sigma_rel", fmt_f64(*sigma_rel)));
                out.extend(pol(policy));
            }
            Self::SpikeNoise {
                policy,
                sigma_abs,
                max_spikes,
            } => {
                out.push(("sigma_abs", fmt_f64(*sigma_abs)));
                out.push(("max_spikes", max_spikes.to_string()));
                out.extend(pol(policy));
            }
            Self::GaussianWrapup { policy, sigma_mult } => {
                out.push(("sigma_mult", fmt_f64(*sigma_mult)));
                out.extend(pol(policy));
            }
            Self::SineWrapup {
                policy,
                amp,
                period,
            } => {
                out.push(("amp_lo", fmt_f64(amp.0)));
                out.push(("amp_hi", fmt_f64(amp.1)));
                out.push(("period_lo", fmt_f64(period.0)));
                out.push(("period_hi", fmt_f64(period.1)));
                out.extend(pol(policy));
            }
            Self::ConstantWrapup { c } => {
                out.push(("c_lo", fmt_f64(c.0)));
                out.push(("c_hi", fmt_f64(c.1)));
            }
            Self::BernoulliMask { p_mask } => out.push(("p_mask", fmt_f64(*p_mask))),
            Self::WindowMask { win } => out.push(("win", win.to_string())),
            Self::PacketLoss { dt_frac } => out.push(("dt_frac", fmt_f64(*dt_frac))),
            Self::Translation { k_max } => out.push(("k_max", k_max.to_string())),
            Self::Wrap { p_edit } => out.push(("p_edit", fmt_f64(*p_edit))),
            Self::Permutation { m } => {
                out.push(("m_lo", m.0.to_string()));
                out.push(("m_hi", m.1.to_string()));
            }
            Self::CutMix { len } => {
                out.push(("len_lo", len.0.to_string()));
                out.push(("len_hi", len.1.to_string()));
            }
        }
        out
    }
}

impl FromStr for AugmentationSpec {
    type Err = AugError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty());
        let kind: AugKind = tokens
            .next()
            .ok_or_else(|| AugError::Parse("empty augmentation record".into()))?
            .parse()?;
        let mut spec = AugmentationSpec::default_for(kind);
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| AugError::Parse(format!("expected key=value, got `{tok}`")))?;
            spec.set(k.trim(), v.trim())?;
        }
        spec.check()?;
        Ok(spec)
    }
}

impl fmt::Display for AugmentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().name())?;
        for (k, v) in self.params() {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for AugmentationSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AugmentationSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(key: &str, v: &str) -> Result<f64, AugError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| AugError::Parse(format!("`{key}` expects a finite number, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, AugError> {
    v.parse::<usize>()
        .map_err(|_| AugError::Parse(format!("`{key}` expects a non-negative integer, got `{v}`")))
}

fn check_prob(name: &str, p: f64) -> Result<(), AugError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AugError::Param(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<(), AugError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AugError::Param(format!("{name} must be >= 0, got {v}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), AugError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AugError::Param(format!("{name} must be > 0, got {v}")))
    }
}

fn check_order(name: &str, lo: f64, hi: f64) -> Result<(), AugError> {
    if lo <= hi && hi.is_finite() {
        Ok(())
    } else {
        Err(AugError::Param(format!(
            "{name} range must satisfy lo <= hi, got [{lo}, {hi}]"
        )))
    }
}

fn check_int_range(name: &str, r: (usize, usize), min: usize) -> Result<(), AugError> {
    if r.0 >= min && r.0 <= r.1 {
        Ok(())
    } else {
        Err(AugError::Param(format!(
            "{name} range must satisfy {min} <= lo <= hi, got ({}, {})",
            r.0, r.1
        )))
    }
}
