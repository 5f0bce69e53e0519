//! Zeroing whole packet positions.
//!
//! Masked positions keep their slot inside the valid prefix and hold zero in
//! all three features, so [`crate::flow::validate_relaxed`] accepts them.

use crate::flow::FlowSample;
use crate::rng::RngStream;

fn blank(s: &mut FlowSample, t: usize) {
    s.sizes[t] = 0;
    s.dirs[t] = 0;
    s.iats[t] = 0.0;
}

/// Zeroes each valid position independently with probability `p_mask`.
pub fn bernoulli_mask(sample: &FlowSample, p_mask: f64, rng: &mut RngStream) -> FlowSample {
    let mut out = sample.clone();
    for t in 0..sample.valid_len {
        if rng.bernoulli(p_mask) {
            blank(&mut out, t);
        }
    }
    out
}

/// Zeroes `win` consecutive valid positions at a uniform start.
pub fn window_mask(sample: &FlowSample, win: usize, rng: &mut RngStream) -> FlowSample {
    let l = sample.valid_len;
    if win == 0 || l < win {
        return sample.clone();
    }
    let start = rng.int_inclusive(0, l - win);
    let mut out = sample.clone();
    for t in start..start + win {
        blank(&mut out, t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::validate_relaxed;

    fn s(l: usize) -> FlowSample {
        let sizes: Vec<u32> = (1..=l as u32).map(|v| v * 10).collect();
        let dirs: Vec<i8> = (0..l).map(|t| if t % 3 == 0 { -1 } else { 1 }).collect();
        let iats: Vec<f64> = (0..l).map(|t| t as f64 * 0.01).collect();
        FlowSample::from_prefix(&sizes, &dirs, &iats, 20, 1).unwrap()
    }

    #[test]
    fn probability_extremes() {
        let x = s(6);
        let mut r = RngStream::new(3);
        assert!(bernoulli_mask(&x, 0.0, &mut r).bit_eq(&x));
        let y = bernoulli_mask(&x, 1.0, &mut r);
        assert!((0..6).all(|t| y.is_blank(t)));
        assert_eq!(y.valid_len, 6);
        assert!(validate_relaxed(&y).is_empty());
    }

    #[test]
    fn window_of_full_length() {
        let x = s(2);
        let mut r = RngStream::new(0);
        let y = window_mask(&x, 2, &mut r);
        assert!(y.is_blank(0) && y.is_blank(1));
    }

    #[test]
    fn window_longer_than_flow_is_identity() {
        let x = s(1);
        let mut r = RngStream::new(0);
        assert!(window_mask(&x, 2, &mut r).bit_eq(&x));
    }

    #[test]
    fn window_zeroes_exactly_win_positions() {
        let x = s(10);
        let mut r = RngStream::new(12);
        for _ in 0..40 {
            let y = window_mask(&x, 2, &mut r);
            let blanks: Vec<usize> = (0..10).filter(|&t| y.is_blank(t)).collect();
            // Position 0 of `s` has iat 0 but a non-zero size, so it is never blank up front.
            assert_eq!(blanks.len(), 2);
            assert_eq!(blanks[1], blanks[0] + 1);
        }
    }
}
