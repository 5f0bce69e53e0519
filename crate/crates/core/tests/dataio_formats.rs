mod common;

use std::path::Path;

use common::random_dataset;
use flowaug::dataio::{self, largest_remainder, split, synthesize, SplitFractions, SynthConfig};
use flowaug::RngStream;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/flows.jsonl");

#[test]
fn fixture_loads_and_saves_canonically() {
    let d = dataio::load(Path::new(FIXTURE)).unwrap();
    assert_eq!(d.labels(), ["web", "chat"]);
    assert_eq!(d.class_counts(), [3, 2]);
    assert_eq!(d.series_len(), Some(4));
    let blank = &d.samples()[2];
    assert_eq!(blank.valid_len, 3);
    assert!(blank.is_blank(1));
    assert_eq!(dataio::to_string(&d), std::fs::read_to_string(FIXTURE).unwrap());
}

#[test]
fn save_then_load_is_identity_on_random_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(41);
    for i in 0..100 {
        let n = rng.int_inclusive(1, 30);
        let classes = rng.int_inclusive(1, 6);
        let count = rng.int_inclusive(classes, 60);
        let d = random_dataset(&mut rng, n, classes, count);
        let path = dir.path().join(format!("d{i}.jsonl"));
        dataio::save(&d, &path).unwrap();
        let back = dataio::load(&path).unwrap();
        assert_eq!(back.labels(), d.labels());
        assert_eq!(back.len(), d.len());
        for (a, b) in back.samples().iter().zip(d.samples()) {
            assert!(a.bit_eq(b));
        }
        assert_eq!(dataio::to_string(&back), std::fs::read_to_string(&path).unwrap());
    }
}

/// Integer allocation closest to the quotas in squared error; ties go to
/// the lexicographically largest allocation.
fn brute_apportion(total: usize, percents: [usize; 3]) -> [usize; 3] {
    let mut best = ([0; 3], u128::MAX);
    for a in (0..=total).rev() {
        for b in (0..=total - a).rev() {
            let alloc = [a, b, total - a - b];
            let err: u128 = alloc
                .iter()
                .zip(percents)
                .map(|(&c, p)| {
                    let d = (100 * c) as i128 - (total * p) as i128;
                    (d * d) as u128
                })
                .sum();
            if err < best.1 {
                best = (alloc, err);
            }
        }
    }
    best.0
}

#[test]
fn apportionment_matches_brute_force() {
    for total in 0..=300 {
        let got = largest_remainder(total, &[0.7, 0.15, 0.15]);
        assert_eq!(got, brute_apportion(total, [70, 15, 15]), "total {total}");
    }
}

#[test]
fn stratified_split_counts_and_disjointness() {
    let mut rng = RngStream::new(42);
    let d = random_dataset(&mut rng, 6, 4, 157);
    let (tr, va, te) = split(&d, SplitFractions::default(), 9).unwrap();
    assert_eq!(tr.len() + va.len() + te.len(), d.len());
    for c in 0..d.num_classes() {
        let want = brute_apportion(d.class_counts()[c], [70, 15, 15]);
        assert_eq!([tr.class_counts()[c], va.class_counts()[c], te.class_counts()[c]], want);
    }
    let mut seen: Vec<String> = [&tr, &va, &te]
        .iter()
        .flat_map(|p| p.samples().iter().map(|s| format!("{s:?}")))
        .collect();
    let mut all: Vec<String> = d.samples().iter().map(|s| format!("{s:?}")).collect();
    seen.sort();
    all.sort();
    assert_eq!(seen, all);
    let again = split(&d, SplitFractions::default(), 9).unwrap();
    assert_eq!(dataio::to_string(&again.0), dataio::to_string(&tr));
    let other = split(&d, SplitFractions::default(), 10).unwrap();
    assert_ne!(dataio::to_string(&other.0), dataio::to_string(&tr));
}

#[test]
fn synthetic_class_counts_follow_the_harmonic_law() {
    let cfg = SynthConfig::default();
    let h: f64 = (1..=10).map(|c| 1.0 / c as f64).sum();
    let quotas: Vec<f64> = (1..=10).map(|c| 5000.0 / (c as f64 * h)).collect();
    let d = synthesize(&cfg).unwrap();
    assert_eq!(d.class_counts(), [1707, 854, 569, 427, 341, 284, 244, 213, 190, 171]);
    for (n, q) in d.class_counts().iter().zip(&quotas) {
        assert!((*n as f64 - q).abs() < 1.0);
    }
    let flat = synthesize(&SynthConfig { zipf: 0.0, ..cfg }).unwrap();
    assert!(flat.class_counts().iter().all(|&n| n == 500));
    assert_eq!(dataio::to_string(&d), dataio::to_string(&synthesize(&cfg).unwrap()));
    for s in d.samples() {
        assert!(flowaug::flow::validate(s).is_empty());
        assert_eq!(s.iats[0], 0.0);
    }
}
