//! ROC-AUC, ranking and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks (Mann-Whitney U).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "auc",
            format!("{} scores, {} labels", scores.len(), labels.len()),
        ));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Domain(format!("score {s} is not comparable")));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let avg = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += avg * tied_pos as f64;
        i = j;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Node indices in descending score order; equal scores keep ascending
/// index order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// How many nodes to flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    TopK(usize),
    /// Every node scoring strictly above the value.
    Threshold(f64),
}

/// Flagged nodes, highest score first.
pub fn rank_and_threshold(report: &ScoreReport, cutoff: Cutoff) -> Result<Vec<usize>> {
    let order: Vec<usize> = report.rows.iter().map(|r| r.node).collect();
    match cutoff {
        Cutoff::TopK(k) => {
            if k > order.len() {
                return Err(Error::Config(format!("top-{k} requested from {} nodes", order.len())));
            }
            Ok(order[..k].to_vec())
        }
        Cutoff::Threshold(t) => Ok(report.rows.iter().filter(|r| r.score > t).map(|r| r.node).collect()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub node: usize,
    pub score: f64,
    /// 1-based position in the descending ranking.
    pub rank: usize,
    pub label: Option<u8>,
}

/// Scored nodes in rank order with optional ground truth and timings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    pub auc: Option<f64>,
    /// Wall-clock seconds per named phase.
    pub timings: BTreeMap<String, f64>,
    /// Nodes scored without a discrimination term.
    pub unpaired: Vec<usize>,
}

impl ScoreReport {
    /// Ranks `scores`; AUC is filled in when `labels` has both classes.
    pub fn new(scores: &[f64], labels: Option<&[u8]>) -> Result<Self> {
        if let Some(y) = labels {
            if y.len() != scores.len() {
                return Err(Error::shape(
                    "ScoreReport::new",
                    format!("{} scores, {} labels", scores.len(), y.len()),
                ));
            }
        }
        let rows = ranking(scores)
            .into_iter()
            .enumerate()
            .map(|(r, node)| ScoreRow {
                node,
                score: scores[node],
                rank: r + 1,
                label: labels.map(|y| y[node]),
            })
            .collect();
        let auc = match labels {
            Some(y) if y.contains(&0) && y.contains(&1) => Some(auc(scores, y)?),
            _ => None,
        };
        Ok(Self {
            rows,
            auc,
            timings: BTreeMap::new(),
            unpaired: Vec::new(),
        })
    }

    /// Scores indexed by node.
    pub fn scores(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows.len()];
        for r in &self.rows {
            s[r.node] = r.score;
        }
        s
    }

    /// `node,score,rank,label` lines in rank order; the label column is
    /// empty when unknown.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,score,rank,label\n");
        for r in &self.rows {
            let label = r.label.map(|y| y.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.node, r.score, r.rank, label).expect("write to string");
        }
        out
    }

    /// Parses what [`ScoreReport::to_csv`] wrote. AUC is recomputed when
    /// every row carries a label; timings are not stored in the CSV.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "node,score,rank,label" => {}
            _ => return Err(Error::Data("scores CSV must start with 'node,score,rank,label'".into())),
        }
        let mut rows = Vec::new();
        for (ln, line) in lines {
            let bad = || Error::Data(format!("scores CSV line {}: '{line}'", ln + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let label = match f[3] {
                "" => None,
                "0" => Some(0),
                "1" => Some(1),
                _ => return Err(bad()),
            };
            rows.push(ScoreRow {
                node: f[0].parse().map_err(|_| bad())?,
                score: f[1].parse().map_err(|_| bad())?,
                rank: f[2].parse().map_err(|_| bad())?,
                label,
            });
        }
        let mut seen = vec![false; rows.len()];
        for r in &rows {
            if r.node >= rows.len() || std::mem::replace(&mut seen[r.node], true) {
                return Err(Error::Data(format!(
                    "scores CSV: node {} repeated or out of range",
                    r.node
                )));
            }
        }
        let mut report = Self {
            rows,
            ..Self::default()
        };
        let scores = report.scores();
        let mut by_node = vec![None; scores.len()];
        for r in &report.rows {
            by_node[r.node] = r.label;
        }
        if let Some(y) = by_node.into_iter().collect::<Option<Vec<u8>>>() {
            if y.contains(&0) && y.contains(&1) {
                report.auc = Some(auc(&scores, &y)?);
            }
        }
        Ok(report)
    }

    pub fn metrics_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Metrics<'a> {
            auc: Option<f64>,
            nodes: usize,
            anomalies: usize,
            timings: &'a BTreeMap<String, f64>,
            unpaired: &'a [usize],
        }
        let m = Metrics {
            auc: self.auc,
            nodes: self.rows.len(),
            anomalies: self.rows.iter().filter(|r| r.label == Some(1)).count(),
            timings: &self.timings,
            unpaired: &self.unpaired,
        };
        Ok(serde_json::to_string_pretty(&m)?)
    }

    /// Writes `scores.csv` and `metrics.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("scores.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join("metrics.json");
        fs::write(&json, self.metrics_json()?).map_err(|e| Error::io(&json, e))
    }
}

/// One point of an embedding-dimension sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dim: usize,
    pub auc: f64,
}

/// `dim<TAB>auc` with a header line.
pub fn sweep_tsv(points: &[SweepPoint]) -> String {
    let mut out = String::from("dim\tauc\n");
    for p in points {
        writeln!(out, "{}\t{}", p.dim, p.auc).expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted_separation() {
        let s = [0.1, 0.2, 0.8, 0.9];
        assert_eq!(auc(&s, &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&s, &[1, 1, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc(&[3.0; 7], &[0, 1, 0, 1, 1, 0, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_domain_error() {
        assert!(matches!(auc(&[1.0, 2.0], &[1, 1]), Err(Error::Domain(_))));
        assert!(matches!(auc(&[1.0, 2.0], &[0, 0]), Err(Error::Domain(_))));
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(ranking(&[1.0, 3.0, 3.0, 2.0, 3.0]), vec![1, 2, 4, 3, 0]);
    }

    #[test]
    fn top_k_and_threshold() {
        let r = ScoreReport::new(&[0.5, 0.9, 0.1], Some(&[0, 1, 0])).unwrap();
        assert_eq!(rank_and_threshold(&r, Cutoff::TopK(1)).unwrap(), vec![1]);
        assert_eq!(rank_and_threshold(&r, Cutoff::TopK(3)).unwrap(), vec![1, 0, 2]);
        assert!(matches!(rank_and_threshold(&r, Cutoff::TopK(4)), Err(Error::Config(_))));
        assert_eq!(rank_and_threshold(&r, Cutoff::Threshold(0.4)).unwrap(), vec![1, 0]);
        assert_eq!(r.auc, Some(1.0));
    }

    #[test]
    fn csv_layout() {
        let r = ScoreReport::new(&[0.5, 0.75], Some(&[0, 1])).unwrap();
        assert_eq!(r.to_csv(), "node,score,rank,label\n1,0.75,1,1\n0,0.5,2,0\n");
        let r = ScoreReport::new(&[0.5], None).unwrap();
        assert_eq!(r.to_csv(), "node,score,rank,label\n0,0.5,1,\n");
        assert_eq!(r.scores(), vec![0.5]);
    }

    #[test]
    fn csv_round_trip() {
        let r = ScoreReport::new(&[0.1, 0.30000000000000004, -2.5e-8], Some(&[0, 1, 0])).unwrap();
        let back = ScoreReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        let r = ScoreReport::new(&[1.0, 2.0], None).unwrap();
        assert_eq!(ScoreReport::from_csv(&r.to_csv()).unwrap(), r);
        assert!(matches!(ScoreReport::from_csv("a,b\n"), Err(Error::Data(_))));
        assert!(matches!(
            ScoreReport::from_csv("node,score,rank,label\n0,1,1,\n0,2,2,\n"),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn sweep_tsv_layout() {
        let t = sweep_tsv(&[SweepPoint { dim: 8, auc: 0.5 }, SweepPoint { dim: 16, auc: 0.75 }]);
        assert_eq!(t, "dim\tauc\n8\t0.5\n16\t0.75\n");
    }
}
