//! Mini-batch training of the Siamese verifier on labelled pairs.
//!
//! One iteration is a full pass over the shuffled pair list. Batch gradients
//! are computed in parallel and reduced in a fixed order, so results do not
//! depend on the worker count.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Pair, PairList};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::rng_for;
use crate::siamese::{SiameseGrads, SiameseModel};
use crate::signature::SignatureKey;

pub type FeatureStore = BTreeMap<SignatureKey, FeatureSequence>;

const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain gradient descent.
    Sgd,
    /// Adaptive-moment gradient descent.
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Stop after this many iterations without a better checkpoint; 0 disables.
    pub patience: usize,
    /// Global-norm gradient clipping threshold.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Run the development hook every this many iterations.
    pub eval_every: usize,
    /// Users whose pairs are shuffled together; batches are cut from the
    /// resulting order. Small values let a batch share signatures, so fewer
    /// branch passes are needed. 0 shuffles all pairs together.
    pub users_per_block: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_iterations: 200,
            patience: 20,
            clip_norm: Some(5.0),
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            eval_every: 1,
            users_per_block: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Config("batch size and eval interval must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if c <= 0.0 || !c.is_finite() {
                return Err(Error::Config("clip norm must be positive".into()));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::Config("invalid moment parameters".into()));
        }
        Ok(())
    }
}

/// Development-set performance reported by the evaluation hook (EER in %).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevMetrics {
    pub eer_1vs1: f64,
    pub eer_4vs1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_cost: f64,
    pub dev: Option<DevMetrics>,
    pub elapsed_secs: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Checkpoint with the best development result (lowest cost when no
    /// development metrics are available).
    pub best: SiameseModel,
    pub best_iteration: usize,
    pub last: SiameseModel,
    pub history: Vec<IterationRecord>,
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    fn new(cfg: &TrainConfig, n_params: usize) -> Self {
        let moments = if cfg.optimizer == OptimizerKind::Adam { n_params } else { 0 };
        Optimizer {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            step: 0,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
        }
    }

    fn apply(&mut self, model: &mut SiameseModel, grads: &SiameseGrads) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut k = 0;
        for (param, grad) in model.tensors_mut().into_iter().zip(grads.tensors()) {
            for (p, &g) in param.iter_mut().zip(grad) {
                match self.kind {
                    OptimizerKind::Sgd => *p -= self.lr * g,
                    OptimizerKind::Adam => {
                        self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
                        self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
                        let m_hat = self.m[k] / c1;
                        let v_hat = self.v[k] / c2;
                        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
                k += 1;
            }
        }
    }
}

/// Distinct feature sequences referenced by `pairs` and each pair as
/// indices into them.
type Resolved<'a> = (Vec<&'a FeatureSequence>, Vec<(usize, usize, u8)>);

fn resolve<'a>(pairs: &[Pair], features: &'a FeatureStore) -> Result<Resolved<'a>> {
    let mut index: BTreeMap<&SignatureKey, usize> = BTreeMap::new();
    let mut seqs = Vec::new();
    let mut lookup = |key: &SignatureKey| -> Result<usize> {
        let (k, f) = features
            .get_key_value(key)
            .ok_or_else(|| Error::MissingFeatures(key.to_string()))?;
        Ok(*index.entry(k).or_insert_with(|| {
            seqs.push(f);
            seqs.len() - 1
        }))
    };
    let items = pairs
        .iter()
        .map(|p| Ok((lookup(&p.enrollment)?, lookup(&p.probe)?, p.label)))
        .collect::<Result<Vec<_>>>()?;
    Ok((seqs, items))
}

/// Pair indices grouped by user, in first-appearance order.
fn user_blocks(pairs: &[Pair]) -> Vec<Vec<usize>> {
    let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let b = *slot.entry(p.user.as_str()).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(i);
    }
    blocks
}

/// Visiting order for one pass. Users are shuffled and taken
/// `users_per_block` at a time; the pairs of each group are shuffled
/// together. With `users_per_block == 0` the whole list is shuffled.
fn epoch_order<R: rand::Rng>(blocks: &[Vec<usize>], users_per_block: usize, rng: &mut R) -> Vec<usize> {
    let mut users: Vec<&Vec<usize>> = blocks.iter().collect();
    users.shuffle(rng);
    let group = if users_per_block == 0 { users.len().max(1) } else { users_per_block };
    let mut order = Vec::new();
    for g in users.chunks(group) {
        let start = order.len();
        for u in g {
            order.extend_from_slice(u);
        }
        order[start..].shuffle(rng);
    }
    order
}

/// Ranking of checkpoints: development 1vs1 EER, then 4vs1 EER, then cost.
fn checkpoint_key(rec: &IterationRecord) -> (f64, f64, f64) {
    match rec.dev {
        Some(d) => (d.eer_1vs1, d.eer_4vs1, rec.mean_cost),
        None => (0.0, 0.0, rec.mean_cost),
    }
}

/// Trains `model` on `pairs`. `dev_hook` is called with the current model
/// after every `eval_every`-th iteration and may return development metrics
/// used for checkpoint selection.
pub fn train<F>(
    model: SiameseModel,
    pairs: &PairList,
    features: &FeatureStore,
    cfg: &TrainConfig,
    mut dev_hook: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&SiameseModel, usize) -> Result<Option<DevMetrics>>,
{
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Config("training pair list is empty".into()));
    }
    let (seqs, items) = resolve(&pairs.pairs, features)?;
    let views: Vec<_> = seqs.iter().map(|f| f.view()).collect();
    let blocks = user_blocks(&pairs.pairs);
    let mut rng = rng_for(cfg.seed, SHUFFLE_STREAM);
    let mut opt = Optimizer::new(cfg, model.param_count());
    let mut losses = vec![0.0; items.len()];
    let start = Instant::now();

    let mut current = model;
    let mut best = current.clone();
    let mut best_iteration = 0;
    let mut best_key: Option<(f64, f64, f64)> = None;
    let mut since_best = 0;
    let mut history = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        let order = epoch_order(&blocks, cfg.users_per_block, &mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let batch_items: Vec<(usize, usize, u8)> = batch.iter().map(|&i| items[i]).collect();
            let mut total = SiameseGrads::zeros_for(&current);
            let results = current.batch_gradient(&views, &batch_items, &mut total)?;
            for (&idx, (loss, _)) in batch.iter().zip(results) {
                losses[idx] = loss;
            }
            total.scale(1.0 / batch.len() as f64);
            if let Some(limit) = cfg.clip_norm {
                let norm = total.norm();
                if !norm.is_finite() {
                    return Err(Error::Divergence {
                        iteration,
                        detail: format!("gradient norm is {norm}"),
                    });
                }
                if norm > limit {
                    total.scale(limit / norm);
                }
            }
            opt.apply(&mut current, &total);
        }

        let mean_cost = losses.iter().sum::<f64>() / losses.len() as f64;
        if !mean_cost.is_finite() || !current.is_finite() {
            return Err(Error::Divergence {
                iteration,
                detail: format!("mean cost {mean_cost}, parameters finite: {}", current.is_finite()),
            });
        }
        let scheduled = iteration % cfg.eval_every == 0 || iteration == cfg.max_iterations;
        let dev = if scheduled { dev_hook(&current, iteration)? } else { None };
        let record = IterationRecord {
            iteration,
            mean_cost,
            dev,
            elapsed_secs: start.elapsed().as_secs_f64(),
        };
        let key = checkpoint_key(&record);
        history.push(record);
        if !scheduled {
            continue;
        }
        let better = match best_key {
            None => true,
            Some(b) => key.partial_cmp(&b) == Some(std::cmp::Ordering::Less),
        };
        if better {
            best_key = Some(key);
            best = current.clone();
            best_iteration = iteration;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        best,
        best_iteration,
        last: current,
        history,
    })
}
