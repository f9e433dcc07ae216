//! Dynamic time warping distance over a subset of feature columns.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSequence, N_FEATURES};

/// Columns used when no selection has been run: x, y, pressure and their
/// first derivatives.
pub const DEFAULT_COLUMNS: [usize; 6] = [1, 2, 3, 8, 9, 10];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtwConfig {
    /// 1-based feature column numbers.
    pub columns: Vec<usize>,
    /// Sakoe-Chiba half width in frames. Widened to the length difference
    /// when narrower, so an alignment always exists.
    pub band: Option<usize>,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            columns: DEFAULT_COLUMNS.to_vec(),
            band: None,
        }
    }
}

impl DtwConfig {
    pub fn with_columns(columns: Vec<usize>) -> Self {
        DtwConfig { columns, band: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Config("DTW needs at least one column".into()));
        }
        for (i, &c) in self.columns.iter().enumerate() {
            if c == 0 || c > N_FEATURES {
                return Err(Error::Config(format!("DTW column {c} outside 1..={N_FEATURES}")));
            }
            if self.columns[..i].contains(&c) {
                return Err(Error::Config(format!("DTW column {c} listed twice")));
            }
        }
        Ok(())
    }
}

fn gather(seq: ArrayView2<'_, f64>, columns: &[usize]) -> Result<Vec<f64>> {
    if seq.nrows() == 0 {
        return Err(Error::Shape("DTW of an empty sequence".into()));
    }
    if let Some(&c) = columns.iter().find(|&&c| c == 0 || c > seq.ncols()) {
        return Err(Error::Shape(format!("column {c} not present in a {}-column sequence", seq.ncols())));
    }
    let mut out = Vec::with_capacity(seq.nrows() * columns.len());
    for row in seq.rows() {
        out.extend(columns.iter().map(|&c| row[c - 1]));
    }
    Ok(out)
}

/// Path-length-normalised DTW distance between two matrices whose rows are
/// frames. Steps (1,0), (0,1), (1,1); local cost is the squared Euclidean
/// distance over `cfg.columns`. Among minimum-cost alignments the shortest
/// one is used for normalisation.
pub fn dtw_views(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, cfg: &DtwConfig) -> Result<f64> {
    let k = cfg.columns.len();
    if k == 0 {
        return Err(Error::Config("DTW needs at least one column".into()));
    }
    let xa = gather(a, &cfg.columns)?;
    let xb = gather(b, &cfg.columns)?;
    let (n, m) = (a.nrows(), b.nrows());
    let band = cfg.band.map(|w| w.max(n.abs_diff(m)));

    // Row-by-row DP keeping (cost, length) per cell.
    let inf = (f64::INFINITY, usize::MAX);
    let mut prev = vec![inf; m];
    let mut cur = vec![inf; m];
    let better = |x: (f64, usize), y: (f64, usize)| x.0 < y.0 || (x.0 == y.0 && x.1 < y.1);
    for i in 0..n {
        let fa = &xa[i * k..(i + 1) * k];
        let (lo, hi) = match band {
            Some(w) => {
                // Centre of the band follows the diagonal from (0,0) to (n-1,m-1).
                let centre = if n > 1 { i * (m - 1) / (n - 1) } else { 0 };
                (centre.saturating_sub(w), (centre + w).min(m - 1))
            }
            None => (0, m - 1),
        };
        cur.fill(inf);
        for j in lo..=hi {
            let fb = &xb[j * k..(j + 1) * k];
            let local: f64 = fa.iter().zip(fb).map(|(p, q)| (p - q) * (p - q)).sum();
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = inf;
                if i > 0 && j > 0 && better(prev[j - 1], best) {
                    best = prev[j - 1];
                }
                if i > 0 && better(prev[j], best) {
                    best = prev[j];
                }
                if j > 0 && better(cur[j - 1], best) {
                    best = cur[j - 1];
                }
                best
            };
            if best.1 != usize::MAX {
                cur[j] = (best.0 + local, best.1 + 1);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    if len == usize::MAX {
        return Err(Error::Degenerate("no alignment inside the DTW band".into()));
    }
    Ok(cost / len as f64)
}

pub fn dtw_distance(a: &FeatureSequence, b: &FeatureSequence, cfg: &DtwConfig) -> Result<f64> {
    dtw_views(a.view(), b.view(), cfg)
}

/// Verification score: higher is more similar.
pub fn dtw_score(a: &FeatureSequence, b: &FeatureSequence, cfg: &DtwConfig) -> Result<f64> {
    Ok(-dtw_distance(a, b, cfg)?)
}
