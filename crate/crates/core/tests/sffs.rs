mod common;

use common::rng;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use sigverify::dataset::{build_pairs, build_split, DatasetSplit, Partition, ProtocolCounts};
use sigverify::dtw::DtwConfig;
use sigverify::eval::{aggregate_4vs1, compute_eer};
use sigverify::features::{FeatureConfig, FeatureSequence, N_FEATURES};
use sigverify::pipeline::{dtw_scores, extract_all};
use sigverify::sffs::{sffs_select, SffsAction};
use sigverify::signature::SignatureKind;
use sigverify::synth::{generate, SynthConfig};
use sigverify::train::FeatureStore;
use sigverify::Error;

fn small_split(n_users: usize, counts: ProtocolCounts) -> DatasetSplit {
    let recs = generate(&SynthConfig {
        n_users,
        ..Default::default()
    })
    .unwrap();
    build_split(&recs, n_users, counts).unwrap()
}

fn dev_features(split: &DatasetSplit) -> FeatureStore {
    extract_all(split.records(Partition::Development), &FeatureConfig::default()).unwrap()
}

/// Features where only columns 1 and 2 depend on the user: genuine
/// signatures follow the user's template closely, forgeries distort it.
/// All other columns are independent standard normal noise.
fn informative_store(split: &DatasetSplit) -> FeatureStore {
    let mut r = rng(31);
    let t = 30;
    let mut store = FeatureStore::new();
    for user in &split.development_users {
        let template: Vec<f64> = (0..2 * t).map(|_| r.sample::<f64, _>(StandardNormal) * 3.0).collect();
        for rec in split.users[user].all() {
            let spread = if rec.key.kind == SignatureKind::Genuine { 0.1 } else { 2.0 };
            let mut values = Array2::zeros((t, N_FEATURES));
            for i in 0..t {
                for c in 0..N_FEATURES {
                    let noise: f64 = r.sample(StandardNormal);
                    values[[i, c]] = if c < 2 { template[2 * i + c] + spread * noise } else { noise };
                }
            }
            store.insert(rec.key.clone(), FeatureSequence { values, source: rec.key.clone() });
        }
    }
    store
}

#[test]
fn single_column_budget_picks_the_best_singleton() {
    let split = small_split(3, ProtocolCounts::default());
    let store = dev_features(&split);
    let report = sffs_select(&split, &store, 1, None).unwrap();
    let pairs = build_pairs(&split, Partition::Development);
    let mut best = (0, f64::INFINITY);
    for c in 1..=N_FEATURES {
        let scores = dtw_scores(&pairs.pairs, &store, &DtwConfig::with_columns(vec![c])).unwrap();
        let eer = compute_eer(&aggregate_4vs1("dtw", &scores, 4).unwrap()).unwrap().eer_percent;
        if eer < best.1 {
            best = (c, eer);
        }
    }
    assert_eq!(report.selected, vec![best.0]);
    assert_eq!(report.eer_percent, best.1);
    assert_eq!(report.steps.len(), 1);
}

#[test]
fn informative_columns_are_chosen_over_noise() {
    let split = small_split(4, ProtocolCounts::default());
    let store = informative_store(&split);
    let report = sffs_select(&split, &store, 9, None).unwrap();
    assert!(!report.selected.is_empty());
    assert!(report.selected.iter().all(|&c| c <= 2), "selected {:?}", report.selected);
    assert_eq!(report.eer_percent, 0.0);
    for w in report.steps.windows(2) {
        if w[1].action == SffsAction::Add {
            assert!(w[1].eer_percent < w[0].eer_percent);
        }
    }
}

#[test]
fn selection_is_deterministic_and_reported() {
    let split = small_split(2, ProtocolCounts::default());
    let store = dev_features(&split);
    let a = sffs_select(&split, &store, 3, None).unwrap();
    let b = sffs_select(&split, &store, 3, None).unwrap();
    assert_eq!(a, b);
    let text = a.to_text();
    assert!(text.contains("selected"));
    assert_eq!(text.lines().filter(|l| l.starts_with("step")).count(), a.steps.len());
}

#[test]
fn single_class_development_set_is_rejected() {
    let counts = ProtocolCounts {
        forgeries: 0,
        ..Default::default()
    };
    let split = small_split(2, counts);
    let store = dev_features(&split);
    assert!(matches!(sffs_select(&split, &store, 3, None), Err(Error::Degenerate(_))));
    assert!(matches!(sffs_select(&split, &store, 0, None), Err(Error::Config(_))));
}
