//! Sequential forward floating selection of DTW feature columns, scored by
//! the 4vs1 equal error rate on the development partition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{build_pairs, DatasetSplit, Pair, Partition};
use crate::dtw::{dtw_views, DtwConfig};
use crate::error::{Error, Result};
use crate::eval::{aggregate_4vs1, compute_eer, PairScore};
use crate::features::{FEATURE_NAMES, N_FEATURES};
use crate::train::FeatureStore;

pub const DEFAULT_K_MAX: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SffsAction {
    Add,
    Remove,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SffsStep {
    pub action: SffsAction,
    pub column: usize,
    /// Subset after the step, ascending.
    pub subset: Vec<usize>,
    pub eer_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SffsReport {
    pub selected: Vec<usize>,
    pub eer_percent: f64,
    pub steps: Vec<SffsStep>,
}

impl SffsReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# DTW feature selection, development 4vs1 EER").unwrap();
        for (i, step) in self.steps.iter().enumerate() {
            let verb = match step.action {
                SffsAction::Add => "add",
                SffsAction::Remove => "remove",
            };
            writeln!(
                s,
                "step {:>2}  {verb:<6} {:<6} eer {:>8.4}%  subset {:?}",
                i + 1,
                FEATURE_NAMES[step.column - 1],
                step.eer_percent,
                step.subset
            )
            .unwrap();
        }
        let names: Vec<&str> = self.selected.iter().map(|&c| FEATURE_NAMES[c - 1]).collect();
        writeln!(s, "selected {:?} ({})", self.selected, names.join(", ")).unwrap();
        writeln!(s, "eer {:.4}%", self.eer_percent).unwrap();
        s
    }
}

/// Scores a fixed pair list with DTW for many column subsets. Features of
/// every referenced signature are gathered once.
struct SubsetScorer<'a> {
    pairs: Vec<Pair>,
    store: &'a FeatureStore,
    n_enrollment: usize,
    band: Option<usize>,
    cache: BTreeMap<Vec<usize>, f64>,
}

impl SubsetScorer<'_> {
    fn eer(&mut self, subset: &[usize]) -> Result<f64> {
        let mut key = subset.to_vec();
        key.sort_unstable();
        if let Some(&e) = self.cache.get(&key) {
            return Ok(e);
        }
        let cfg = DtwConfig {
            columns: key.clone(),
            band: self.band,
        };
        let store = self.store;
        let scores: Vec<PairScore> = self
            .pairs
            .par_iter()
            .map(|p| {
                let fa = store
                    .get(&p.enrollment)
                    .ok_or_else(|| Error::MissingFeatures(p.enrollment.to_string()))?;
                let fb = store
                    .get(&p.probe)
                    .ok_or_else(|| Error::MissingFeatures(p.probe.to_string()))?;
                Ok(PairScore {
                    user: p.user.clone(),
                    enrollment_index: p.enrollment_index,
                    probe_index: p.probe_index,
                    label: p.label,
                    score: -dtw_views(fa.view(), fb.view(), &cfg)?,
                })
            })
            .collect::<Result<_>>()?;
        let eer = compute_eer(&aggregate_4vs1("dtw", &scores, self.n_enrollment)?)?.eer_percent;
        self.cache.insert(key, eer);
        Ok(eer)
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Floating forward selection over columns 1..=23. Each round adds the
/// column giving the lowest EER (lowest column number on ties), then removes
/// columns while that yields a strictly better subset than any seen before
/// at the smaller size. Stops at `k_max` columns or when the best addition
/// does not strictly improve on the current subset.
pub fn sffs_select(split: &DatasetSplit, store: &FeatureStore, k_max: usize, band: Option<usize>) -> Result<SffsReport> {
    if k_max == 0 || k_max > N_FEATURES {
        return Err(Error::Config(format!("k_max must be in 1..={N_FEATURES}, got {k_max}")));
    }
    let pairs = build_pairs(split, Partition::Development);
    if pairs.genuine_count() == 0 || pairs.impostor_count() == 0 {
        return Err(Error::Degenerate(format!(
            "feature selection needs genuine and forgery development pairs, got {} and {}",
            pairs.genuine_count(),
            pairs.impostor_count()
        )));
    }
    let mut scorer = SubsetScorer {
        pairs: pairs.pairs,
        store,
        n_enrollment: split.counts.enrollment,
        band,
        cache: BTreeMap::new(),
    };

    let mut current: Vec<usize> = Vec::new();
    let mut current_eer = f64::INFINITY;
    // best_by_size[k] is the lowest EER seen for a subset of k columns.
    let mut best_by_size = vec![f64::INFINITY; N_FEATURES + 1];
    let mut steps = Vec::new();

    while current.len() < k_max {
        let mut best: Option<(usize, f64)> = None;
        for c in 1..=N_FEATURES {
            if current.contains(&c) {
                continue;
            }
            let mut trial = current.clone();
            trial.push(c);
            let e = scorer.eer(&trial)?;
            if best.map_or(true, |(_, b)| e < b) {
                best = Some((c, e));
            }
        }
        let Some((added, eer)) = best else { break };
        if eer >= current_eer {
            break;
        }
        current = sorted([current, vec![added]].concat());
        current_eer = eer;
        best_by_size[current.len()] = best_by_size[current.len()].min(eer);
        steps.push(SffsStep {
            action: SffsAction::Add,
            column: added,
            subset: current.clone(),
            eer_percent: eer,
        });

        while current.len() > 2 {
            let mut best: Option<(usize, f64)> = None;
            for &c in &current {
                if c == added {
                    continue;
                }
                let trial: Vec<usize> = current.iter().copied().filter(|&x| x != c).collect();
                let e = scorer.eer(&trial)?;
                if best.map_or(true, |(_, b)| e < b) {
                    best = Some((c, e));
                }
            }
            let Some((removed, eer)) = best else { break };
            let size = current.len() - 1;
            if eer >= best_by_size[size] {
                break;
            }
            current.retain(|&x| x != removed);
            current_eer = eer;
            best_by_size[size] = eer;
            steps.push(SffsStep {
                action: SffsAction::Remove,
                column: removed,
                subset: current.clone(),
                eer_percent: eer,
            });
        }
    }
    Ok(SffsReport {
        selected: current,
        eer_percent: current_eer,
        steps,
    })
}
