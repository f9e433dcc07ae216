//! Siamese LSTM verifier.
//!
//! Both signatures of a pair go through the same branch LSTM (one parameter
//! set, so sharing is structural). The two branch output sequences are
//! concatenated per time step, fed to a merge LSTM, and the merge output at
//! the last valid step is mapped to a score in (0, 1) by a sigmoid unit.
//! The shorter signature is padded with masked steps, which repeat its last
//! branch output.
//!
//! With `symmetric` set the score is the mean of both input orders, making
//! `score(a, b) == score(b, a)` hold exactly.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSequence, N_FEATURES};
use crate::lstm::{axpy, dense_sigmoid, lstm_backward_into, lstm_forward, DenseParams, LstmForward, LstmParams};

/// Scores are clamped to `[SCORE_CLAMP, 1 - SCORE_CLAMP]` inside the loss.
pub const SCORE_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatMode {
    /// Branch outputs joined at every time step.
    PerStep,
    /// Only the final branch states, as a one-step merge sequence.
    FinalState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    LastValid,
    MeanOverTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiameseConfig {
    pub input_size: usize,
    pub branch_hidden: usize,
    pub merge_hidden: usize,
    pub concat: ConcatMode,
    pub readout: Readout,
    pub symmetric: bool,
    pub forget_bias: f64,
}

impl Default for SiameseConfig {
    fn default() -> Self {
        SiameseConfig {
            input_size: N_FEATURES,
            branch_hidden: 46,
            merge_hidden: 23,
            concat: ConcatMode::PerStep,
            readout: Readout::LastValid,
            symmetric: true,
            forget_bias: 1.0,
        }
    }
}

impl SiameseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.branch_hidden == 0 || self.merge_hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn merge_input(&self) -> usize {
        2 * self.branch_hidden
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiameseModel {
    config: SiameseConfig,
    branch: LstmParams,
    merge: LstmParams,
    head: DenseParams,
}

struct MergeGradient {
    loss: f64,
    score: f64,
    d_first: Array2<f64>,
    d_second: Array2<f64>,
}

/// Gradient of the pair loss with respect to every model parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SiameseGrads {
    pub branch: LstmParams,
    pub merge: LstmParams,
    pub head: DenseParams,
}

impl SiameseGrads {
    pub fn zeros_for(model: &SiameseModel) -> Self {
        SiameseGrads {
            branch: model.branch.zeros_like(),
            merge: model.merge.zeros_like(),
            head: DenseParams::zeros(model.head.input_size()),
        }
    }

    /// Like `zeros_for`, with an empty branch part. Only for merge and head
    /// accumulation.
    fn top_zeros_for(model: &SiameseModel) -> Self {
        SiameseGrads {
            branch: LstmParams::zeros(0, 0),
            merge: model.merge.zeros_like(),
            head: DenseParams::zeros(model.head.input_size()),
        }
    }

    pub fn add_assign(&mut self, other: &SiameseGrads) {
        self.branch.add_assign(&other.branch);
        self.merge.add_assign(&other.merge);
        axpy(1.0, &other.head.weights, &mut self.head.weights);
        self.head.bias += other.head.bias;
    }

    pub fn scale(&mut self, k: f64) {
        self.branch.scale(k);
        self.merge.scale(k);
        self.head.weights.iter_mut().for_each(|w| *w *= k);
        self.head.bias *= k;
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.branch.weights(),
            self.branch.bias(),
            self.merge.weights(),
            self.merge.bias(),
            &self.head.weights,
            std::slice::from_ref(&self.head.bias),
        ]
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

/// Tensor names in storage order.
pub const TENSOR_NAMES: [&str; 6] = [
    "branch.weights",
    "branch.bias",
    "merge.weights",
    "merge.bias",
    "head.weights",
    "head.bias",
];

impl SiameseModel {
    /// Random initialization: uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
    /// forget-gate biases set to `config.forget_bias`.
    pub fn new<R: Rng + ?Sized>(config: SiameseConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let branch = LstmParams::uniform(config.branch_hidden, config.input_size, config.forget_bias, rng);
        let merge = LstmParams::uniform(config.merge_hidden, config.merge_input(), config.forget_bias, rng);
        let head = DenseParams::uniform(config.merge_hidden, rng);
        Ok(SiameseModel {
            config,
            branch,
            merge,
            head,
        })
    }

    pub fn zeros(config: SiameseConfig) -> Result<Self> {
        config.validate()?;
        Ok(SiameseModel {
            config,
            branch: LstmParams::zeros(config.branch_hidden, config.input_size),
            merge: LstmParams::zeros(config.merge_hidden, config.merge_input()),
            head: DenseParams::zeros(config.merge_hidden),
        })
    }

    pub fn from_parts(config: SiameseConfig, branch: LstmParams, merge: LstmParams, head: DenseParams) -> Result<Self> {
        config.validate()?;
        if branch.hidden_size() != config.branch_hidden
            || branch.input_size() != config.input_size
            || merge.hidden_size() != config.merge_hidden
            || merge.input_size() != config.merge_input()
            || head.input_size() != config.merge_hidden
        {
            return Err(Error::Shape("parameter shapes do not match the architecture".into()));
        }
        if !(branch.is_finite() && merge.is_finite() && head.is_finite()) {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(SiameseModel {
            config,
            branch,
            merge,
            head,
        })
    }

    pub fn config(&self) -> &SiameseConfig {
        &self.config
    }

    pub fn branch(&self) -> &LstmParams {
        &self.branch
    }

    pub fn merge(&self) -> &LstmParams {
        &self.merge
    }

    pub fn head(&self) -> &DenseParams {
        &self.head
    }

    /// Symmetrization can be switched without touching the parameters.
    pub fn set_symmetric(&mut self, symmetric: bool) {
        self.config.symmetric = symmetric;
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.branch.weights(),
            self.branch.bias(),
            self.merge.weights(),
            self.merge.bias(),
            &self.head.weights,
            std::slice::from_ref(&self.head.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        let (bw, bb) = self.branch.parts_mut();
        let (mw, mb) = self.merge.parts_mut();
        [bw, bb, mw, mb, &mut self.head.weights, std::slice::from_mut(&mut self.head.bias)]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.branch.is_finite() && self.merge.is_finite() && self.head.is_finite()
    }

    fn check_input(&self, seq: ArrayView2<f64>, len: usize) -> Result<()> {
        if seq.ncols() != self.config.input_size {
            return Err(Error::Shape(format!(
                "sequence has {} columns, model expects {}",
                seq.ncols(),
                self.config.input_size
            )));
        }
        if len == 0 || len > seq.nrows() {
            return Err(Error::Shape(format!(
                "valid length {len} for a sequence of {} rows",
                seq.nrows()
            )));
        }
        Ok(())
    }

    fn branch_forward(&self, seq: ArrayView2<f64>, len: usize) -> Result<LstmForward> {
        self.check_input(seq, len)?;
        let mask: Vec<bool> = (0..seq.nrows()).map(|t| t < len).collect();
        lstm_forward(&self.branch, seq, &mask)
    }

    /// Branch LSTM outputs (`len x H`) for one signature. Pair scores can be
    /// computed from these with [`SiameseModel::score_embedded`], so each
    /// signature needs to pass through the branch only once.
    pub fn embed(&self, seq: ArrayView2<f64>) -> Result<Array2<f64>> {
        let fwd = self.branch_forward(seq, seq.nrows())?;
        Ok(fwd.outputs)
    }

    fn merge_input(&self, first: ArrayView2<f64>, second: ArrayView2<f64>) -> Array2<f64> {
        let hb = self.config.branch_hidden;
        let (la, lb) = (first.nrows(), second.nrows());
        let rows: Vec<(usize, usize)> = match self.config.concat {
            ConcatMode::PerStep => (0..la.max(lb)).map(|t| (t.min(la - 1), t.min(lb - 1))).collect(),
            ConcatMode::FinalState => vec![(la - 1, lb - 1)],
        };
        let first = first.as_standard_layout();
        let second = second.as_standard_layout();
        let (fa, fb) = (first.as_slice().expect("contiguous"), second.as_slice().expect("contiguous"));
        let mut m = Vec::with_capacity(rows.len() * 2 * hb);
        for &(ra, rb) in &rows {
            m.extend_from_slice(&fa[ra * hb..(ra + 1) * hb]);
            m.extend_from_slice(&fb[rb * hb..(rb + 1) * hb]);
        }
        Array2::from_shape_vec((rows.len(), 2 * hb), m).expect("shape")
    }

    fn readout(&self, outputs: &Array2<f64>) -> Vec<f64> {
        match self.config.readout {
            Readout::LastValid => outputs.row(outputs.nrows() - 1).to_vec(),
            Readout::MeanOverTime => outputs.mean_axis(ndarray::Axis(0)).expect("non-empty").to_vec(),
        }
    }

    fn ordered_score(&self, first: ArrayView2<f64>, second: ArrayView2<f64>) -> Result<f64> {
        let input = self.merge_input(first, second);
        let mask = vec![true; input.nrows()];
        let fwd = lstm_forward(&self.merge, input.view(), &mask)?;
        dense_sigmoid(&self.head, &self.readout(&fwd.outputs))
    }

    /// Score from precomputed branch outputs.
    pub fn score_embedded(&self, a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
        let hb = self.config.branch_hidden;
        if a.ncols() != hb || b.ncols() != hb || a.nrows() == 0 || b.nrows() == 0 {
            return Err(Error::Shape("embedding does not match branch size".into()));
        }
        let ab = self.ordered_score(a.view(), b.view())?;
        if !self.config.symmetric {
            return Ok(ab);
        }
        let ba = self.ordered_score(b.view(), a.view())?;
        Ok(0.5 * (ab + ba))
    }

    pub fn score_views(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
        self.score_masked(a, a.nrows(), b, b.nrows())
    }

    /// Score of two sequences whose rows past `a_len` / `b_len` are padding.
    pub fn score_masked(&self, a: ArrayView2<f64>, a_len: usize, b: ArrayView2<f64>, b_len: usize) -> Result<f64> {
        let fa = self.branch_forward(a, a_len)?;
        let fb = self.branch_forward(b, b_len)?;
        let ea = fa.outputs.slice(s![..a_len, ..]).to_owned();
        let eb = fb.outputs.slice(s![..b_len, ..]).to_owned();
        self.score_embedded(&ea, &eb)
    }

    /// Forward and backward pass for one labelled pair. Gradients of the
    /// binary cross-entropy loss are added into `grads`; returns
    /// `(loss, score)`.
    pub fn accumulate_gradient(
        &self,
        a: ArrayView2<f64>,
        b: ArrayView2<f64>,
        label: u8,
        grads: &mut SiameseGrads,
    ) -> Result<(f64, f64)> {
        let fa = self.branch_forward(a, a.nrows())?;
        let fb = self.branch_forward(b, b.nrows())?;
        let top = self.merge_gradient(&fa.outputs, &fb.outputs, label, grads)?;
        lstm_backward_into(&self.branch, &fa.cache, top.d_first.view(), &mut grads.branch)?;
        lstm_backward_into(&self.branch, &fb.cache, top.d_second.view(), &mut grads.branch)?;
        Ok((top.loss, top.score))
    }

    /// Summed gradient over `pairs`, each `(first, second, label)` indexing
    /// into `seqs`. Every distinct sequence goes through the branch network
    /// once, forward and backward. Work is spread over the rayon pool and
    /// reduced in a fixed order. Returns `(loss, score)` per pair.
    pub fn batch_gradient(
        &self,
        seqs: &[ArrayView2<f64>],
        pairs: &[(usize, usize, u8)],
        grads: &mut SiameseGrads,
    ) -> Result<Vec<(f64, f64)>> {
        let mut used: Vec<usize> = pairs.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        used.sort_unstable();
        used.dedup();
        if let Some(&last) = used.last() {
            if last >= seqs.len() {
                return Err(Error::Shape(format!("sequence index {last} out of {}", seqs.len())));
            }
        }
        let slot = |i: usize| used.binary_search(&i).expect("indexed");
        let forward: Vec<LstmForward> = used
            .par_iter()
            .map(|&i| self.branch_forward(seqs[i], seqs[i].nrows()))
            .collect::<Result<_>>()?;
        let tops: Vec<(MergeGradient, SiameseGrads)> = pairs
            .par_iter()
            .map(|&(a, b, label)| {
                let mut g = SiameseGrads::top_zeros_for(self);
                let top = self.merge_gradient(&forward[slot(a)].outputs, &forward[slot(b)].outputs, label, &mut g)?;
                Ok((top, g))
            })
            .collect::<Result<_>>()?;

        let hb = self.config.branch_hidden;
        let mut d_emb: Vec<Array2<f64>> = used.iter().map(|&i| Array2::zeros((seqs[i].nrows(), hb))).collect();
        let mut out = Vec::with_capacity(pairs.len());
        for (&(a, b, _), (top, g)) in pairs.iter().zip(&tops) {
            grads.merge.add_assign(&g.merge);
            axpy(1.0, &g.head.weights, &mut grads.head.weights);
            grads.head.bias += g.head.bias;
            d_emb[slot(a)] += &top.d_first;
            d_emb[slot(b)] += &top.d_second;
            out.push((top.loss, top.score));
        }
        let branch: Vec<LstmParams> = forward
            .par_iter()
            .zip(&d_emb)
            .map(|(f, d)| {
                let mut g = self.branch.zeros_like();
                lstm_backward_into(&self.branch, &f.cache, d.view(), &mut g)?;
                Ok(g)
            })
            .collect::<Result<_>>()?;
        for g in &branch {
            grads.branch.add_assign(g);
        }
        Ok(out)
    }

    /// Merge and head part of the pair gradient, from branch outputs.
    /// Merge and head gradients go into `grads`; gradients with respect to
    /// the two branch output sequences are returned.
    fn merge_gradient(
        &self,
        ea: &Array2<f64>,
        eb: &Array2<f64>,
        label: u8,
        grads: &mut SiameseGrads,
    ) -> Result<MergeGradient> {
        let hb = self.config.branch_hidden;
        let (la, lb) = (ea.nrows(), eb.nrows());
        let orders: &[bool] = if self.config.symmetric { &[false, true] } else { &[false] };
        let weight = 1.0 / orders.len() as f64;

        struct Direction {
            swapped: bool,
            merge: LstmForward,
            readout: Vec<f64>,
            score: f64,
        }
        let mut dirs = Vec::with_capacity(orders.len());
        for &swapped in orders {
            let (first, second) = if swapped { (eb.view(), ea.view()) } else { (ea.view(), eb.view()) };
            let input = self.merge_input(first, second);
            let mask = vec![true; input.nrows()];
            let merge = lstm_forward(&self.merge, input.view(), &mask)?;
            let readout = self.readout(&merge.outputs);
            let score = dense_sigmoid(&self.head, &readout)?;
            dirs.push(Direction {
                swapped,
                merge,
                readout,
                score,
            });
        }
        let score = weight * dirs.iter().map(|d| d.score).sum::<f64>();
        let loss = pair_loss(score, label);
        let dscore = pair_loss_derivative(score, label);

        let mut da: Array2<f64> = Array2::zeros((la, hb));
        let mut db: Array2<f64> = Array2::zeros((lb, hb));
        for d in &dirs {
            let dz = dscore * weight * d.score * (1.0 - d.score);
            axpy(dz, &d.readout, &mut grads.head.weights);
            grads.head.bias += dz;
            let steps = d.merge.outputs.nrows();
            let mut gh = Array2::zeros((steps, self.config.merge_hidden));
            match self.config.readout {
                Readout::LastValid => {
                    for (g, w) in gh.row_mut(steps - 1).iter_mut().zip(&self.head.weights) {
                        *g = dz * w;
                    }
                }
                Readout::MeanOverTime => {
                    let k = dz / steps as f64;
                    for mut row in gh.rows_mut() {
                        for (g, w) in row.iter_mut().zip(&self.head.weights) {
                            *g = k * w;
                        }
                    }
                }
            }
            let dm = lstm_backward_into(&self.merge, &d.merge.cache, gh.view(), &mut grads.merge)?;
            let (dfirst, dsecond) = if d.swapped { (&mut db, &mut da) } else { (&mut da, &mut db) };
            let (lf, ls) = (dfirst.nrows(), dsecond.nrows());
            let dfirst = dfirst.as_slice_mut().expect("contiguous");
            let dsecond = dsecond.as_slice_mut().expect("contiguous");
            let dm = dm.as_slice().expect("contiguous");
            for (t, row) in dm.chunks_exact(2 * hb).enumerate() {
                let (tf, ts) = match self.config.concat {
                    ConcatMode::PerStep => (t.min(lf - 1), t.min(ls - 1)),
                    ConcatMode::FinalState => (lf - 1, ls - 1),
                };
                axpy(1.0, &row[..hb], &mut dfirst[tf * hb..(tf + 1) * hb]);
                axpy(1.0, &row[hb..], &mut dsecond[ts * hb..(ts + 1) * hb]);
            }
        }
        Ok(MergeGradient {
            loss,
            score,
            d_first: da,
            d_second: db,
        })
    }

    /// Loss of one pair, for finite-difference checks.
    pub fn pair_loss_of(&self, a: ArrayView2<f64>, b: ArrayView2<f64>, label: u8) -> Result<f64> {
        Ok(pair_loss(self.score_views(a, b)?, label))
    }
}

/// Symmetrized similarity score of two feature sequences.
pub fn score_pair(model: &SiameseModel, a: &FeatureSequence, b: &FeatureSequence) -> Result<f64> {
    model.score_views(a.view(), b.view())
}

/// Binary cross-entropy of a score against a 0/1 label.
pub fn pair_loss(score: f64, label: u8) -> f64 {
    let s = score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    if label == 1 {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

fn pair_loss_derivative(score: f64, label: u8) -> f64 {
    if !(SCORE_CLAMP..=1.0 - SCORE_CLAMP).contains(&score) {
        return 0.0;
    }
    if label == 1 {
        -1.0 / score
    } else {
        1.0 / (1.0 - score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> SiameseConfig {
        SiameseConfig {
            input_size: 4,
            branch_hidden: 3,
            merge_hidden: 2,
            ..Default::default()
        }
    }

    fn seq(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, d), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn loss_values() {
        assert!((pair_loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((pair_loss(0.5, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(pair_loss(1.0 - 1e-15, 1) < 1e-11);
        assert!((pair_loss(0.9, 0) - 2.302585092994046).abs() < 1e-12);
        assert!(pair_loss(1.0, 0).is_finite());
    }

    #[test]
    fn zero_model_scores_half() {
        let model = SiameseModel::zeros(SiameseConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = seq(&mut rng, 9, 23);
        let b = seq(&mut rng, 14, 23);
        assert_eq!(model.score_views(a.view(), b.view()).unwrap(), 0.5);
    }

    #[test]
    fn default_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = SiameseModel::new(SiameseConfig::default(), &mut rng).unwrap();
        assert_eq!(model.branch().hidden_size(), 46);
        assert_eq!(model.branch().input_size(), 23);
        assert_eq!(model.merge().hidden_size(), 23);
        assert_eq!(model.merge().input_size(), 92);
        assert_eq!(model.head().input_size(), 23);
        assert!(model.branch().gate_bias(crate::lstm::Gate::Forget).iter().all(|&b| b == 1.0));
    }

    #[test]
    fn symmetry_and_self_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = SiameseModel::new(tiny(), &mut rng).unwrap();
        let a = seq(&mut rng, 6, 4);
        let b = seq(&mut rng, 9, 4);
        assert_eq!(
            model.score_views(a.view(), b.view()).unwrap(),
            model.score_views(b.view(), a.view()).unwrap()
        );
        let mut asym = model.clone();
        asym.set_symmetric(false);
        let self_score = asym.score_views(a.view(), a.view()).unwrap();
        assert_eq!(model.score_views(a.view(), a.view()).unwrap(), self_score);
        assert_ne!(
            asym.score_views(a.view(), b.view()).unwrap(),
            asym.score_views(b.view(), a.view()).unwrap()
        );
    }

    #[test]
    fn wrong_columns_rejected() {
        let model = SiameseModel::zeros(tiny()).unwrap();
        let a = Array2::zeros((5, 3));
        let b = Array2::zeros((5, 4));
        assert!(model.score_views(a.view(), b.view()).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = SiameseModel::new(tiny(), &mut rng).unwrap();
        let flat = model.params_flat();
        assert_eq!(flat.len(), model.param_count());
        let mut other = SiameseModel::zeros(tiny()).unwrap();
        other.set_params_flat(&flat).unwrap();
        assert_eq!(other, model);
        assert!(other.set_params_flat(&flat[1..]).is_err());
    }

    #[test]
    fn embedded_scores_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = SiameseModel::new(tiny(), &mut rng).unwrap();
        let a = seq(&mut rng, 7, 4);
        let b = seq(&mut rng, 5, 4);
        let ea = model.embed(a.view()).unwrap();
        let eb = model.embed(b.view()).unwrap();
        assert_eq!(
            model.score_embedded(&ea, &eb).unwrap(),
            model.score_views(a.view(), b.view()).unwrap()
        );
    }

    #[test]
    fn gradient_reports_loss_and_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = SiameseModel::new(tiny(), &mut rng).unwrap();
        let a = seq(&mut rng, 7, 4);
        let b = seq(&mut rng, 5, 4);
        let mut g = SiameseGrads::zeros_for(&model);
        let (loss, score) = model.accumulate_gradient(a.view(), b.view(), 1, &mut g).unwrap();
        assert_eq!(score, model.score_views(a.view(), b.view()).unwrap());
        assert_eq!(loss, pair_loss(score, 1));
        assert!(g.norm() > 0.0);
    }

    #[test]
    fn batch_gradient_matches_per_pair_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = SiameseModel::new(tiny(), &mut rng).unwrap();
        let seqs: Vec<Array2<f64>> = (0..5).map(|i| seq(&mut rng, 4 + i, 4)).collect();
        let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
        let pairs = [(0, 1, 1), (1, 2, 0), (0, 1, 0), (3, 3, 1), (4, 0, 1)];
        let mut batch = SiameseGrads::zeros_for(&model);
        let out = model.batch_gradient(&views, &pairs, &mut batch).unwrap();
        let mut single = SiameseGrads::zeros_for(&model);
        for (&(a, b, label), &(loss, score)) in pairs.iter().zip(&out) {
            let r = model.accumulate_gradient(views[a], views[b], label, &mut single).unwrap();
            assert_eq!(r, (loss, score));
        }
        for (x, y) in batch.to_flat().iter().zip(single.to_flat()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
        }
        assert!(model.batch_gradient(&views, &[(0, 5, 1)], &mut batch).is_err());
    }
}
