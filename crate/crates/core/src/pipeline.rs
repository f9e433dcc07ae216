//! Glue between the stages: batch feature extraction, pair scoring for both
//! systems, development metrics and the training log.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::dataset::{Pair, PairList};
use crate::dtw::{dtw_views, DtwConfig};
use crate::error::{Error, Result};
use crate::eval::{aggregate_4vs1, compute_eer, one_vs_one, PairScore, ScoreSet};
use crate::features::{extract_features, FeatureConfig};
use crate::siamese::SiameseModel;
use crate::signature::{SignatureKey, SignatureRecord};
use crate::train::{DevMetrics, FeatureStore, IterationRecord};

pub const SIAMESE_SYSTEM: &str = "siamese";
pub const DTW_SYSTEM: &str = "dtw";

/// Features for every record, keyed by signature. Extraction runs in
/// parallel; the map order is canonical regardless of thread count.
pub fn extract_all<'a, I>(records: I, cfg: &FeatureConfig) -> Result<FeatureStore>
where
    I: IntoIterator<Item = &'a SignatureRecord>,
{
    let records: Vec<&SignatureRecord> = records.into_iter().collect();
    let extracted: Vec<_> = records
        .par_iter()
        .map(|r| extract_features(r, cfg).map(|f| (r.key.clone(), f)))
        .collect::<Result<_>>()?;
    let mut store = FeatureStore::new();
    for (key, f) in extracted {
        if store.insert(key.clone(), f).is_some() {
            return Err(Error::Protocol(format!("duplicate signature {key}")));
        }
    }
    Ok(store)
}

fn lookup<'a>(store: &'a FeatureStore, key: &SignatureKey) -> Result<&'a crate::features::FeatureSequence> {
    store.get(key).ok_or_else(|| Error::MissingFeatures(key.to_string()))
}

fn pair_score(p: &Pair, score: f64) -> PairScore {
    PairScore {
        user: p.user.clone(),
        enrollment_index: p.enrollment_index,
        probe_index: p.probe_index,
        label: p.label,
        score,
    }
}

/// Siamese scores for `pairs`, in pair order. Each distinct signature runs
/// through the branch network once.
pub fn siamese_scores(model: &SiameseModel, pairs: &[Pair], store: &FeatureStore) -> Result<Vec<PairScore>> {
    let mut keys: Vec<&SignatureKey> = pairs.iter().flat_map(|p| [&p.enrollment, &p.probe]).collect();
    keys.sort();
    keys.dedup();
    let embedded: BTreeMap<&SignatureKey, Array2<f64>> = keys
        .par_iter()
        .map(|&k| Ok((k, model.embed(lookup(store, k)?.view())?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    pairs
        .par_iter()
        .map(|p| {
            let s = model.score_embedded(&embedded[&p.enrollment], &embedded[&p.probe])?;
            Ok(pair_score(p, s))
        })
        .collect()
}

/// DTW scores (negated distances) for `pairs`, in pair order.
pub fn dtw_scores(pairs: &[Pair], store: &FeatureStore, cfg: &DtwConfig) -> Result<Vec<PairScore>> {
    cfg.validate()?;
    pairs
        .par_iter()
        .map(|p| {
            let a = lookup(store, &p.enrollment)?;
            let b = lookup(store, &p.probe)?;
            Ok(pair_score(p, -dtw_views(a.view(), b.view(), cfg)?))
        })
        .collect()
}

/// 1vs1 and 4vs1 score sets from pair scores.
pub fn protocol_sets(system: &str, scores: &[PairScore], n_enrollment: usize) -> Result<[ScoreSet; 2]> {
    Ok([one_vs_one(system, scores), aggregate_4vs1(system, scores, n_enrollment)?])
}

/// Development EERs of `model` on `pairs`.
pub fn siamese_dev_metrics(
    model: &SiameseModel,
    pairs: &PairList,
    store: &FeatureStore,
    n_enrollment: usize,
) -> Result<DevMetrics> {
    let scores = siamese_scores(model, &pairs.pairs, store)?;
    let [one, four] = protocol_sets(SIAMESE_SYSTEM, &scores, n_enrollment)?;
    Ok(DevMetrics {
        eer_1vs1: compute_eer(&one)?.eer_percent,
        eer_4vs1: compute_eer(&four)?.eer_percent,
    })
}

/// CSV with one row per training iteration. Iterations without a
/// development evaluation leave the EER fields empty.
pub fn write_training_log<W: Write>(out: W, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "mean_train_cost", "dev_eer_1vs1", "dev_eer_4vs1", "wall_clock_seconds"])?;
    for r in history {
        let (e1, e4) = match r.dev {
            Some(d) => (d.eer_1vs1.to_string(), d.eer_4vs1.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.iteration.to_string(),
            r.mean_cost.to_string(),
            e1,
            e4,
            format!("{:.3}", r.elapsed_secs),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<training log>", e))
}
