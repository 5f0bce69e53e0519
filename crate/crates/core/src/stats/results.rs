use std::collections::HashMap;
use std::io::Read;

use super::StatsError;

pub const CSV_HEADER: [&str; 3] = ["method", "seed", "weighted_f1"];

/// Complete grid of scores: `scores[seed_row][method_col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    methods: Vec<String>,
    seeds: Vec<u64>,
    scores: Vec<Vec<f64>>,
}

impl RunResult {
    pub fn new(
        methods: Vec<String>,
        seeds: Vec<u64>,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self, StatsError> {
        if methods.len() < 2 {
            return Err(StatsError::TooFew {
                what: "methods",
                min: 2,
                got: methods.len(),
            });
        }
        if seeds.len() < 2 {
            return Err(StatsError::TooFew {
                what: "seeds",
                min: 2,
                got: seeds.len(),
            });
        }
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].contains(m) {
                return Err(StatsError::DuplicateMethod(m.clone()));
            }
        }
        if scores.len() != seeds.len() {
            return Err(StatsError::Ragged {
                row: scores.len(),
                len: 0,
                expected: methods.len(),
            });
        }
        for (row, r) in scores.iter().enumerate() {
            if r.len() != methods.len() {
                return Err(StatsError::Ragged {
                    row,
                    len: r.len(),
                    expected: methods.len(),
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite { row, col });
            }
        }
        Ok(Self {
            methods,
            seeds,
            scores,
        })
    }

    /// Assembles a grid from `(method, seed, score)` cells. Methods and seeds
    /// keep their order of first appearance; every combination must be present
    /// exactly once.
    pub fn from_cells<I>(cells: I) -> Result<Self, StatsError>
    where
        I: IntoIterator<Item = (String, u64, f64)>,
    {
        let mut methods: Vec<String> = Vec::new();
        let mut seeds: Vec<u64> = Vec::new();
        let mut values: HashMap<(usize, usize), f64> = HashMap::new();
        for (line, (m, s, v)) in cells.into_iter().enumerate() {
            let mi = index_of(&mut methods, m);
            let si = index_of(&mut seeds, s);
            if values.insert((mi, si), v).is_some() {
                return Err(StatsError::Row {
                    line: line + 1,
                    msg: format!("duplicate cell ({}, seed {})", methods[mi], seeds[si]),
                });
            }
        }
        let mut scores = vec![vec![0.0; methods.len()]; seeds.len()];
        for (si, row) in scores.iter_mut().enumerate() {
            for (mi, cell) in row.iter_mut().enumerate() {
                *cell = *values.get(&(mi, si)).ok_or_else(|| StatsError::MissingCell {
                    method: methods[mi].clone(),
                    seed: seeds[si],
                })?;
            }
        }
        Self::new(methods, seeds, scores)
    }

    /// Parses the `method,seed,weighted_f1` CSV format.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut cells = Vec::new();
        let mut lines = Vec::new();
        let mut seen_header = false;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| StatsError::Row {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if !seen_header {
                if rec.iter().collect::<Vec<_>>() != CSV_HEADER {
                    return Err(StatsError::Row {
                        line,
                        msg: format!("expected header `{}`", CSV_HEADER.join(",")),
                    });
                }
                seen_header = true;
                continue;
            }
            let bad = |msg: String| StatsError::Row { line, msg };
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", rec.len())));
            }
            let method = rec[0].to_string();
            if method.is_empty() {
                return Err(bad("empty method name".into()));
            }
            let seed: u64 = rec[1]
                .parse()
                .map_err(|_| bad(format!("seed `{}` is not a non-negative integer", &rec[1])))?;
            let score: f64 = rec[2]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("weighted_f1 `{}` is not a finite number", &rec[2])))?;
            cells.push((method, seed, score));
            lines.push(line);
        }
        if !seen_header {
            return Err(StatsError::Row {
                line: 1,
                msg: "empty results file".into(),
            });
        }
        Self::from_cells(cells).map_err(|e| match e {
            // Report the offending file line rather than the cell ordinal.
            StatsError::Row { line, msg } => StatsError::Row {
                line: lines.get(line - 1).copied().unwrap_or(line),
                msg,
            },
            other => other,
        })
    }

    /// CSV text, one row per cell, methods outer and seeds inner.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for (mi, m) in self.methods.iter().enumerate() {
            for (si, s) in self.seeds.iter().enumerate() {
                w.write_record([m.as_str(), &s.to_string(), &format!("{}", self.scores[si][mi])])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn score(&self, method: &str, seed: u64) -> Option<f64> {
        let mi = self.methods.iter().position(|m| m == method)?;
        let si = self.seeds.iter().position(|&s| s == seed)?;
        Some(self.scores[si][mi])
    }

    pub fn method_means(&self) -> Vec<f64> {
        let s = self.seeds.len() as f64;
        (0..self.methods.len())
            .map(|j| self.scores.iter().map(|r| r[j]).sum::<f64>() / s)
            .collect()
    }

    pub fn method_mean(&self, method: &str) -> Option<f64> {
        let mi = self.methods.iter().position(|m| m == method)?;
        Some(self.method_means()[mi])
    }
}

fn index_of<T: PartialEq>(v: &mut Vec<T>, x: T) -> usize {
    match v.iter().position(|y| *y == x) {
        Some(i) => i,
        None => {
            v.push(x);
            v.len() - 1
        }
    }
}
