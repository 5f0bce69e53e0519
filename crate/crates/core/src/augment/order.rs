//! Transforms that move, insert or drop whole packets.
//!
//! Each public transform draws its random parameters and hands them to a
//! deterministic kernel (`pub(crate)`), which the unit tests drive directly
//! with pinned parameters.

use crate::flow::FlowSample;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Packet {
    size: u32,
    dir: i8,
    iat: f64,
}

impl Packet {
    const BLANK: Packet = Packet {
        size: 0,
        dir: 0,
        iat: 0.0,
    };

    fn is_blank(&self) -> bool {
        self.size == 0 && self.dir == 0 && self.iat == 0.0
    }

    /// Sizes and IATs average (sizes rounded half up); the direction is
    /// copied from the left packet.
    fn midpoint(&self, right: &Packet) -> Packet {
        if self.is_blank() || right.is_blank() {
            return Packet::BLANK;
        }
        let size = (u64::from(self.size) + u64::from(right.size)).div_ceil(2) as u32;
        Packet {
            size,
            dir: self.dir,
            iat: (self.iat + right.iat) / 2.0,
        }
    }
}

fn packets(s: &FlowSample) -> Vec<Packet> {
    (0..s.valid_len)
        .map(|t| Packet {
            size: s.sizes[t],
            dir: s.dirs[t],
            iat: s.iats[t],
        })
        .collect()
}

/// Writes `pkts` (cropped to `n`) into a zero-padded sample.
fn assemble(n: usize, label: usize, pkts: &[Packet]) -> FlowSample {
    let mut out = FlowSample::padding(n, label);
    let l = pkts.len().min(n);
    for (t, p) in pkts[..l].iter().enumerate() {
        out.sizes[t] = p.size;
        out.dirs[t] = p.dir;
        out.iats[t] = p.iat;
    }
    out.valid_len = l;
    out
}

/// The valid prefix with a midpoint packet between every adjacent pair
/// (length `2L - 1`).
fn expanded(s: &FlowSample) -> Vec<Packet> {
    let p = packets(s);
    let mut out = Vec::with_capacity(2 * p.len());
    for (i, pk) in p.iter().enumerate() {
        out.push(*pk);
        if let Some(next) = p.get(i + 1) {
            out.push(pk.midpoint(next));
        }
    }
    out
}

/// `N` consecutive values of the midpoint expansion starting at `start`.
pub(crate) fn take_window(s: &FlowSample, start: usize) -> FlowSample {
    let e = expanded(s);
    assemble(s.len(), s.label, &e[start.min(e.len())..])
}

/// Doubles the temporal resolution with midpoints, then keeps `N`
/// consecutive values from a uniform start.
pub fn interpolation(sample: &FlowSample, rng: &mut RngStream) -> FlowSample {
    let l = sample.valid_len;
    if l < 2 {
        return sample.clone();
    }
    let e_len = 2 * l - 1;
    let start = rng.int_inclusive(0, e_len.saturating_sub(sample.len()));
    take_window(sample, start)
}

/// Reverses the valid prefix. IATs are re-anchored so the gap sequence is
/// reversed: `iats'[0] = 0`, `iats'[t] = iats[L - t]`.
pub fn flip(sample: &FlowSample) -> FlowSample {
    let l = sample.valid_len;
    let mut out = sample.clone();
    out.sizes[..l].reverse();
    out.dirs[..l].reverse();
    out.iats[0] = 0.0;
    for t in 1..l {
        out.iats[t] = sample.iats[l - t];
    }
    out
}

/// Drops packets whose arrival time falls in `[lo, hi)`. Returns `None`
/// when nothing or everything would be dropped.
pub(crate) fn drop_interval(s: &FlowSample, lo: f64, hi: f64) -> Option<FlowSample> {
    let l = s.valid_len;
    let mut arrival = 0.0;
    let mut survivors = Vec::with_capacity(l);
    for t in 0..l {
        arrival += s.iats[t];
        if !(lo <= arrival && arrival < hi) {
            survivors.push(t);
        }
    }
    if survivors.is_empty() || survivors.len() == l {
        return None;
    }
    let mut pkts = Vec::with_capacity(survivors.len());
    let mut prev: Option<usize> = None;
    for &t in &survivors {
        let iat = match prev {
            None => 0.0,
            Some(p) if p + 1 == t => s.iats[t],
            Some(p) => s.iats[p + 1..=t].iter().sum(),
        };
        pkts.push(Packet {
            size: s.sizes[t],
            dir: s.dirs[t],
            iat,
        });
        prev = Some(t);
    }
    Some(assemble(s.len(), s.label, &pkts))
}

/// Discards packets arriving in a window of `dt_frac` times the flow duration.
pub fn packet_loss(sample: &FlowSample, dt_frac: f64, rng: &mut RngStream) -> FlowSample {
    if dt_frac <= 0.0 {
        return sample.clone();
    }
    let duration: f64 = sample.iats[..sample.valid_len].iter().sum();
    if !(duration > 0.0) {
        return sample.clone();
    }
    let width = dt_frac * duration;
    let lo = rng.uniform_in(0.0, duration - width);
    drop_interval(sample, lo, lo + width).unwrap_or_else(|| sample.clone())
}

/// Drops the first `k` packets; the new first packet gets IAT 0.
pub(crate) fn shift_left(s: &FlowSample, k: usize) -> Option<FlowSample> {
    if k >= s.valid_len {
        return None;
    }
    let mut pkts = packets(s).split_off(k);
    pkts[0].iat = 0.0;
    Some(assemble(s.len(), s.label, &pkts))
}

/// Inserts `k` blank positions at the head, truncating at `N`.
pub(crate) fn shift_right(s: &FlowSample, k: usize) -> FlowSample {
    let mut pkts = vec![Packet::BLANK; k];
    pkts.extend(packets(s));
    assemble(s.len(), s.label, &pkts)
}

/// Shifts the flow left or right by `k ~ U{1..k_max}` positions.
pub fn translation(sample: &FlowSample, k_max: usize, rng: &mut RngStream) -> FlowSample {
    if k_max == 0 {
        return sample.clone();
    }
    let k = rng.int_inclusive(1, k_max);
    if rng.bernoulli(0.5) {
        shift_left(sample, k).unwrap_or_else(|| sample.clone())
    } else {
        shift_right(sample, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum WrapEdit {
    Insert,
    Keep,
    Drop,
}

/// Applies one edit per valid packet. `None` when every packet is dropped.
pub(crate) fn apply_wrap_edits(s: &FlowSample, edits: &[WrapEdit]) -> Option<FlowSample> {
    let p = packets(s);
    let mut pkts = Vec::with_capacity(2 * p.len());
    for (t, (pk, e)) in p.iter().zip(edits).enumerate() {
        match e {
            WrapEdit::Keep => pkts.push(*pk),
            WrapEdit::Drop => {}
            WrapEdit::Insert => {
                pkts.push(*pk);
                pkts.push(match p.get(t + 1) {
                    Some(next) => pk.midpoint(next),
                    None => *pk,
                });
            }
        }
    }
    if pkts.is_empty() {
        None
    } else {
        Some(assemble(s.len(), s.label, &pkts))
    }
}

/// Per packet: insert a midpoint after it with probability `p_edit`, drop it
/// with probability `p_edit`, keep it otherwise.
pub fn wrap(sample: &FlowSample, p_edit: f64, rng: &mut RngStream) -> FlowSample {
    let edits: Vec<WrapEdit> = (0..sample.valid_len)
        .map(|_| {
            let u = rng.uniform();
            if u < p_edit {
                WrapEdit::Insert
            } else if u >= 1.0 - p_edit {
                WrapEdit::Drop
            } else {
                WrapEdit::Keep
            }
        })
        .collect();
    apply_wrap_edits(sample, &edits).unwrap_or_else(|| sample.clone())
}

/// Splits the valid prefix at `cuts` (sorted, in `1..L`) and emits the
/// segments in `order`.
pub(crate) fn permute_segments(s: &FlowSample, cuts: &[usize], order: &[usize]) -> FlowSample {
    let p = packets(s);
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cuts);
    bounds.push(p.len());
    let mut pkts = Vec::with_capacity(p.len());
    for &seg in order {
        pkts.extend_from_slice(&p[bounds[seg]..bounds[seg + 1]]);
    }
    assemble(s.len(), s.label, &pkts)
}

/// Cuts the valid prefix into `m ~ U{m_range}` segments and shuffles them.
/// IATs travel with their packets.
pub fn permutation(sample: &FlowSample, m_range: (usize, usize), rng: &mut RngStream) -> FlowSample {
    let l = sample.valid_len;
    if l < 2 {
        return sample.clone();
    }
    let m = rng.int_inclusive(m_range.0, m_range.1).min(l);
    if m < 2 {
        return sample.clone();
    }
    let mut cuts: Vec<usize> = rng
        .choose_distinct(l - 1, m - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut order: Vec<usize> = (0..m).collect();
    rng.shuffle(&mut order);
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        rng.shuffle(&mut order);
    }
    permute_segments(sample, &cuts, &order)
}

/// `a` with positions `[start, start + width)` copied from `b`.
pub(crate) fn patch_segment(a: &FlowSample, b: &FlowSample, start: usize, width: usize) -> FlowSample {
    let mut out = a.clone();
    let r = start..start + width;
    out.sizes[r.clone()].copy_from_slice(&b.sizes[r.clone()]);
    out.dirs[r.clone()].copy_from_slice(&b.dirs[r.clone()]);
    out.iats[r.clone()].copy_from_slice(&b.iats[r]);
    out
}

/// Replaces a random segment of `a` with the aligned segment of `b`.
/// `b` should share `a`'s label; the output keeps `a`'s label and length.
pub fn cutmix(
    a: &FlowSample,
    b: &FlowSample,
    len_range: (usize, usize),
    rng: &mut RngStream,
) -> FlowSample {
    let min_l = a.valid_len.min(b.valid_len);
    if min_l < len_range.0 || len_range.0 == 0 {
        return a.clone();
    }
    let width = rng.int_inclusive(len_range.0, len_range.1).min(min_l);
    let start = rng.int_inclusive(0, min_l - width);
    patch_segment(a, b, start, width)
}
