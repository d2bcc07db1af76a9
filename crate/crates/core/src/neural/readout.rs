use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Pooling of several embeddings into one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    #[default]
    Avg,
    Min,
    Max,
}

impl Readout {
    pub const ALL: [Readout; 3] = [Readout::Avg, Readout::Min, Readout::Max];
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Readout::Avg => "avg",
            Readout::Min => "min",
            Readout::Max => "max",
        })
    }
}

impl FromStr for Readout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" | "average" | "mean" => Ok(Readout::Avg),
            "min" => Ok(Readout::Min),
            "max" => Ok(Readout::Max),
            other => Err(Error::Config(format!("unknown readout '{other}' (avg|min|max)"))),
        }
    }
}

/// Which input row won each output dimension (min/max), or nothing (avg).
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutTrace {
    mode: Readout,
    rows: Vec<usize>,
    winners: Vec<usize>,
}

/// Per-dimension pooling over every row of `h`.
pub fn readout(h: &DenseMatrix, mode: Readout) -> Result<Vec<f64>> {
    let rows: Vec<usize> = (0..h.rows()).collect();
    readout_rows(h, &rows, mode).map(|(v, _)| v)
}

/// Pooling over the listed rows of `h`. Ties in min/max go to the first
/// listed row.
pub fn readout_rows(h: &DenseMatrix, rows: &[usize], mode: Readout) -> Result<(Vec<f64>, ReadoutTrace)> {
    if rows.is_empty() {
        return Err(Error::Domain("readout over zero rows".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= h.rows()) {
        return Err(Error::Index {
            what: "readout row".into(),
            index: bad,
            len: h.rows(),
        });
    }
    let mut winners = Vec::new();
    let out = match mode {
        Readout::Avg => {
            // running mean: identical rows pool to exactly that row
            let mut acc = h.row(rows[0]).to_vec();
            for (k, &r) in rows.iter().enumerate().skip(1) {
                let k = (k + 1) as f64;
                for (a, &x) in acc.iter_mut().zip(h.row(r)) {
                    *a += (x - *a) / k;
                }
            }
            acc
        }
        Readout::Min | Readout::Max => {
            let better = |x: f64, best: f64| if mode == Readout::Max { x > best } else { x < best };
            winners = vec![rows[0]; h.cols()];
            let mut best = h.row(rows[0]).to_vec();
            for &r in &rows[1..] {
                for (j, &x) in h.row(r).iter().enumerate() {
                    if better(x, best[j]) {
                        best[j] = x;
                        winners[j] = r;
                    }
                }
            }
            best
        }
    };
    Ok((
        out,
        ReadoutTrace {
            mode,
            rows: rows.to_vec(),
            winners,
        },
    ))
}

/// Scatters the gradient of a pooled vector back onto rows of `grad_h`.
pub fn readout_backward(trace: &ReadoutTrace, upstream: &[f64], grad_h: &mut DenseMatrix) {
    match trace.mode {
        Readout::Avg => {
            let k = trace.rows.len() as f64;
            for &r in &trace.rows {
                for (g, &u) in grad_h.row_mut(r).iter_mut().zip(upstream) {
                    *g += u / k;
                }
            }
        }
        Readout::Min | Readout::Max => {
            for (j, (&r, &u)) in trace.winners.iter().zip(upstream).enumerate() {
                let cols = grad_h.cols();
                grad_h.as_mut_slice()[r * cols + j] += u;
            }
        }
    }
}
