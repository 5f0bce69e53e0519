//! Multi-seed method comparison: per-seed ranking, Friedman test, Nemenyi
//! critical difference and critical-difference charts.

mod chart;
mod gamma;
mod results;

pub use chart::{render_cd_chart, write_cd_chart, ChartOptions, ChartLayout};
pub use gamma::{chi_square_cdf, chi_square_sf, gamma_p, gamma_q, ln_gamma};
pub use results::RunResult;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {min} {what}, got {got}")]
    TooFew {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("score matrix is ragged: row {row} has {len} entries, expected {expected}")]
    Ragged {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("non-finite score at seed row {row}, method column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("no Nemenyi critical value for k = {k} (supported: 2..=20)")]
    UnsupportedK { k: usize },
    #[error("unsupported significance level {0} (supported: 0.05, 0.10)")]
    UnsupportedAlpha(f64),
    #[error("results line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error("results are incomplete: missing ({method}, seed {seed})")]
    MissingCell { method: String, seed: u64 },
    #[error("duplicate method name `{0}`")]
    DuplicateMethod(String),
    #[error("malformed report JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-row ranks, 1 = highest score; ties share the mean of their positions.
pub fn rank_rows(scores: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    let k = scores.first().map_or(0, Vec::len);
    scores
        .iter()
        .enumerate()
        .map(|(row, r)| {
            if r.len() != k {
                return Err(StatsError::Ragged {
                    row,
                    len: r.len(),
                    expected: k,
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite { row, col });
            }
            Ok(midranks_desc(r))
        })
        .collect()
}

fn midranks_desc(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && row[order[j]] == row[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share rank mean(i+1..=j).
        let shared = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = shared;
        }
        i = j;
    }
    ranks
}

/// Column means of a rank matrix.
pub fn average_ranks(ranks: &[Vec<f64>]) -> Vec<f64> {
    let s = ranks.len() as f64;
    let k = ranks.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / s)
        .collect()
}

fn check_shape(ranks: &[Vec<f64>]) -> Result<(usize, usize), StatsError> {
    let s = ranks.len();
    if s < 2 {
        return Err(StatsError::TooFew {
            what: "seeds",
            min: 2,
            got: s,
        });
    }
    let k = ranks[0].len();
    if k < 2 {
        return Err(StatsError::TooFew {
            what: "methods",
            min: 2,
            got: k,
        });
    }
    for (row, r) in ranks.iter().enumerate() {
        if r.len() != k {
            return Err(StatsError::Ragged {
                row,
                len: r.len(),
                expected: k,
            });
        }
    }
    Ok((s, k))
}

/// Friedman statistic `12S/(k(k+1)) [sum_j R_j^2 - k(k+1)^2/4]` over column
/// mean ranks `R_j`, and its chi-square (`k - 1` df) p-value. No tie
/// correction is applied; see [`friedman_tie_corrected`].
pub fn friedman(ranks: &[Vec<f64>]) -> Result<(f64, f64), StatsError> {
    let (s, k) = check_shape(ranks)?;
    let (s, kf) = (s as f64, k as f64);
    let sum_sq: f64 = average_ranks(ranks).iter().map(|r| r * r).sum();
    let chi2 = (12.0 * s / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    Ok((chi2, chi_square_sf(chi2, kf - 1.0)))
}

/// Friedman statistic divided by `1 - sum(t^3 - t) / (S k (k^2 - 1))`, where
/// `t` runs over the sizes of tied groups within each row.
pub fn friedman_tie_corrected(ranks: &[Vec<f64>]) -> Result<(f64, f64), StatsError> {
    let (chi2, _) = friedman(ranks)?;
    let (s, k) = check_shape(ranks)?;
    let mut ties = 0.0;
    for row in ranks {
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            ties += t * t * t - t;
            i = j;
        }
    }
    let kf = k as f64;
    let denom = 1.0 - ties / (s as f64 * kf * (kf * kf - 1.0));
    if denom <= 0.0 {
        // Every row fully tied.
        return Ok((0.0, 1.0));
    }
    let chi2 = chi2 / denom;
    Ok((chi2, chi_square_sf(chi2, kf - 1.0)))
}

/// Two-tailed Nemenyi critical values `q_alpha(k)` (studentized range at
/// infinite df divided by sqrt 2), indexed by `k - 2`.
const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

fn is_alpha(alpha: f64, target: f64) -> bool {
    (alpha - target).abs() < 1e-12
}

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64, StatsError> {
    let table = if is_alpha(alpha, 0.05) {
        &Q_05
    } else if is_alpha(alpha, 0.10) {
        &Q_10
    } else {
        return Err(StatsError::UnsupportedAlpha(alpha));
    };
    if !(2..=20).contains(&k) {
        return Err(StatsError::UnsupportedK { k });
    }
    Ok(table[k - 2])
}

/// `CD = q_alpha(k) sqrt(k(k+1) / (6S))`.
pub fn nemenyi_cd(k: usize, seeds: usize, alpha: f64) -> Result<f64, StatsError> {
    let q = nemenyi_q(k, alpha)?;
    if seeds == 0 {
        return Err(StatsError::TooFew {
            what: "seeds",
            min: 1,
            got: 0,
        });
    }
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * seeds as f64)).sqrt())
}

/// Maximal runs of rank-sorted methods whose extreme average ranks differ by
/// at most `cd`. Returned as method indices, best first within each group,
/// groups ordered by their best member.
pub fn cd_groups(avg_ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..avg_ranks.len()).collect();
    order.sort_by(|&a, &b| avg_ranks[a].total_cmp(&avg_ranks[b]).then(a.cmp(&b)));
    let tol = 1e-12 * (1.0 + cd.abs());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = None;
    for i in 0..order.len() {
        let mut j = i;
        while j + 1 < order.len() && avg_ranks[order[j + 1]] - avg_ranks[order[i]] <= cd + tol {
            j += 1;
        }
        // An interval ending where the previous one ended is contained in it.
        if last_end == Some(j) {
            continue;
        }
        last_end = Some(j);
        groups.push(order[i..=j].to_vec());
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdReport {
    pub methods: Vec<String>,
    pub avg_ranks: Vec<f64>,
    pub friedman_chi2: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub cd: f64,
    /// Groups of statistically indistinguishable methods, by name.
    pub groups: Vec<Vec<String>>,
    /// Mean score per method over seeds (not part of the JSON export).
    pub mean_scores: Vec<f64>,
}

pub fn build_report(result: &RunResult, alpha: f64) -> Result<CdReport, StatsError> {
    let ranks = rank_rows(result.scores())?;
    let (chi2, p) = friedman(&ranks)?;
    let cd = nemenyi_cd(result.methods().len(), result.seeds().len(), alpha)?;
    let avg = average_ranks(&ranks);
    let groups = cd_groups(&avg, cd)
        .into_iter()
        .map(|g| g.into_iter().map(|i| result.methods()[i].clone()).collect())
        .collect();
    Ok(CdReport {
        methods: result.methods().to_vec(),
        avg_ranks: avg,
        friedman_chi2: chi2,
        p_value: p,
        alpha,
        cd,
        groups,
        mean_scores: result.method_means(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportJson {
    avg_ranks: Map<String, Value>,
    friedman_chi2: f64,
    p_value: f64,
    alpha: f64,
    cd: f64,
    groups: Vec<Vec<String>>,
}

impl CdReport {
    /// JSON with fields `avg_ranks` (method -> rank, in method order),
    /// `friedman_chi2`, `p_value`, `alpha`, `cd`, `groups`.
    pub fn to_json(&self) -> String {
        let avg_ranks = self
            .methods
            .iter()
            .zip(&self.avg_ranks)
            .map(|(m, &r)| (m.clone(), Value::from(r)))
            .collect();
        let j = ReportJson {
            avg_ranks,
            friedman_chi2: self.friedman_chi2,
            p_value: self.p_value,
            alpha: self.alpha,
            cd: self.cd,
            groups: self.groups.clone(),
        };
        serde_json::to_string_pretty(&j).expect("report serializes")
    }

    /// Parses [`CdReport::to_json`] output. `mean_scores` is not part of the
    /// format and comes back empty.
    pub fn from_json(text: &str) -> Result<Self, StatsError> {
        let j: ReportJson =
            serde_json::from_str(text).map_err(|e| StatsError::Json(e.to_string()))?;
        let mut methods = Vec::with_capacity(j.avg_ranks.len());
        let mut avg_ranks = Vec::with_capacity(j.avg_ranks.len());
        for (m, v) in j.avg_ranks {
            let r = v
                .as_f64()
                .ok_or_else(|| StatsError::Json(format!("rank of `{m}` is not a number")))?;
            methods.push(m);
            avg_ranks.push(r);
        }
        for g in &j.groups {
            if let Some(m) = g.iter().find(|m| !methods.contains(m)) {
                return Err(StatsError::Json(format!("group member `{m}` has no rank")));
            }
        }
        Ok(Self {
            methods,
            avg_ranks,
            friedman_chi2: j.friedman_chi2,
            p_value: j.p_value,
            alpha: j.alpha,
            cd: j.cd,
            groups: j.groups,
            mean_scores: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_simple_and_tied() {
        let r = rank_rows(&[vec![0.9, 0.8, 0.7], vec![0.8, 0.8, 0.7]]).unwrap();
        assert_eq!(r[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(r[1], vec![1.5, 1.5, 3.0]);
        let r = rank_rows(&[vec![0.5; 4]]).unwrap();
        assert_eq!(r[0], vec![2.5; 4]);
    }

    #[test]
    fn ranks_reject_bad_input() {
        assert!(matches!(
            rank_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(StatsError::Ragged { .. })
        ));
        assert!(matches!(
            rank_rows(&[vec![1.0, f64::NAN]]),
            Err(StatsError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn friedman_hand_case() {
        let ranks = vec![vec![1.0, 2.0, 3.0]; 3];
        let (chi2, p) = friedman(&ranks).unwrap();
        assert_eq!(chi2, 6.0);
        assert!((p - (-3.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn friedman_full_ties() {
        let ranks = rank_rows(&vec![vec![0.7; 4]; 5]).unwrap();
        let (chi2, p) = friedman(&ranks).unwrap();
        assert_eq!(chi2, 0.0);
        assert_eq!(p, 1.0);
        assert_eq!(friedman_tie_corrected(&ranks).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn friedman_size_checks() {
        assert!(friedman(&[vec![1.0, 2.0]]).is_err());
        assert!(friedman(&[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn tie_correction_inflates_statistic() {
        let ranks = rank_rows(&[
            vec![0.9, 0.9, 0.1],
            vec![0.8, 0.7, 0.1],
            vec![0.9, 0.5, 0.5],
        ])
        .unwrap();
        let (plain, _) = friedman(&ranks).unwrap();
        let (corr, _) = friedman_tie_corrected(&ranks).unwrap();
        assert!(corr > plain);
    }

    #[test]
    fn cd_k2() {
        let cd = nemenyi_cd(2, 30, 0.05).unwrap();
        assert!((cd - 1.960 * (6.0f64 / 180.0).sqrt()).abs() < 1e-12);
        assert!((cd - 0.3578).abs() < 1e-4);
        assert!(nemenyi_cd(21, 30, 0.05).is_err());
        assert!(nemenyi_cd(1, 30, 0.05).is_err());
        assert!(nemenyi_cd(5, 30, 0.01).is_err());
    }

    #[test]
    fn groups_by_interval() {
        let g = cd_groups(&[1.0, 2.0, 3.0], 1.1);
        assert_eq!(g, vec![vec![0, 1], vec![1, 2]]);
        let g = cd_groups(&[1.0, 2.0, 3.0], 0.5);
        assert_eq!(g, vec![vec![0], vec![1], vec![2]]);
        let g = cd_groups(&[3.0, 1.0, 2.0], 5.0);
        assert_eq!(g, vec![vec![1, 2, 0]]);
        let g = cd_groups(&[1.0, 1.5, 2.0, 4.0], 1.0);
        assert_eq!(g, vec![vec![0, 1, 2], vec![3]]);
    }
}
