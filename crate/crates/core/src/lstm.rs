//! LSTM layer (forget/input/output gates, one memory cell per block, no
//! peepholes) with full backpropagation through time, and the sigmoid
//! feed-forward unit used as the scoring head.
//!
//! Gate weights are stored stacked in one row-major `4H x (H + D)` matrix in
//! the order forget, input, output, candidate. Every row acts on the
//! concatenation `[h_{t-1}, x_t]`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of gate blocks stacked in [`LstmParams`].
pub const GATES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Candidate = 3,
}

/// Logistic function, evaluated so that `exp` never sees a large positive
/// argument.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [0.0f64; 4];
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    hidden: usize,
    input: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradients share the parameter layout.
pub type LstmGrads = LstmParams;

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            hidden,
            input,
            weights: vec![0.0; GATES * hidden * (hidden + input)],
            bias: vec![0.0; GATES * hidden],
        }
    }

    pub fn from_parts(hidden: usize, input: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Shape("LSTM hidden size must be positive".into()));
        }
        let w_len = GATES * hidden * (hidden + input);
        if weights.len() != w_len || bias.len() != GATES * hidden {
            return Err(Error::Shape(format!(
                "LSTM(H={hidden}, D={input}) expects {w_len} weights and {} biases, got {} and {}",
                GATES * hidden,
                weights.len(),
                bias.len()
            )));
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::Shape("non-finite LSTM parameter".into()));
        }
        Ok(LstmParams {
            hidden,
            input,
            weights,
            bias,
        })
    }

    /// Uniform initialization in `[-r, r]` with `r = 1/sqrt(H + D)`; the
    /// forget-gate bias is set to `forget_bias`.
    pub fn uniform<R: Rng + ?Sized>(hidden: usize, input: usize, forget_bias: f64, rng: &mut R) -> Self {
        let mut p = LstmParams::zeros(hidden, input);
        let r = 1.0 / ((hidden + input) as f64).sqrt();
        for w in &mut p.weights {
            *w = rng.gen_range(-r..=r);
        }
        for b in &mut p.bias {
            *b = rng.gen_range(-r..=r);
        }
        for b in &mut p.bias[..hidden] {
            *b = forget_bias;
        }
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    fn row_width(&self) -> usize {
        self.hidden + self.input
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    /// The `H x (H + D)` block of one gate, row-major.
    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        let block = self.hidden * self.row_width();
        let g = gate as usize;
        &self.weights[g * block..(g + 1) * block]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let g = gate as usize;
        &self.bias[g * self.hidden..(g + 1) * self.hidden]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &LstmParams) -> bool {
        self.hidden == other.hidden && self.input == other.input
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.hidden, self.input)
    }

    pub fn add_assign(&mut self, other: &LstmParams) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v *= k);
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate pre-activations `z = W [h; x] + b` for one step.
fn preactivate(params: &LstmParams, concat: &[f64], z: &mut [f64]) {
    let width = params.row_width();
    for (r, (zr, row)) in z.iter_mut().zip(params.weights.chunks_exact(width)).enumerate() {
        *zr = params.bias[r] + dot(row, concat);
    }
}

/// Applies the gate nonlinearities in place and advances `(h, c)`.
/// On return `z` holds the activated gates `[f, i, o, c~]`.
fn activate(hidden: usize, z: &mut [f64], h: &mut [f64], c: &mut [f64], tanh_c: &mut [f64]) {
    let (f, rest) = z.split_at_mut(hidden);
    let (i, rest) = rest.split_at_mut(hidden);
    let (o, g) = rest.split_at_mut(hidden);
    for j in 0..hidden {
        f[j] = sigmoid(f[j]);
        i[j] = sigmoid(i[j]);
        o[j] = sigmoid(o[j]);
        g[j] = g[j].tanh();
        c[j] = f[j] * c[j] + i[j] * g[j];
        tanh_c[j] = c[j].tanh();
        h[j] = o[j] * tanh_c[j];
    }
}

/// One application of the LSTM block equations.
pub fn lstm_step(params: &LstmParams, state: &LstmState, x: &[f64]) -> Result<LstmState> {
    let hd = params.hidden;
    if x.len() != params.input || state.h.len() != hd || state.c.len() != hd {
        return Err(Error::Shape(format!(
            "lstm_step: params (H={}, D={}), state (h={}, c={}), input {}",
            hd,
            params.input,
            state.h.len(),
            state.c.len(),
            x.len()
        )));
    }
    let mut concat = Vec::with_capacity(params.row_width());
    concat.extend_from_slice(&state.h);
    concat.extend_from_slice(x);
    let mut z = vec![0.0; GATES * hd];
    preactivate(params, &concat, &mut z);
    let mut next = state.clone();
    let mut tanh_c = vec![0.0; hd];
    activate(hd, &mut z, &mut next.h, &mut next.c, &mut tanh_c);
    Ok(next)
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct LstmCache {
    hidden: usize,
    input: usize,
    mask: Vec<bool>,
    /// `T x D` layer inputs.
    inputs: Array2<f64>,
    /// `T x H`: `h_{t-1}` at each step.
    prev_h: Array2<f64>,
    /// `T x 4H`: activated gates.
    gates: Vec<f64>,
    /// `T x H`: cell state after each step.
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Activated gates `[f, i, o, c~]` at step `t`.
    pub fn gates_at(&self, t: usize) -> &[f64] {
        let w = GATES * self.hidden;
        &self.gates[t * w..(t + 1) * w]
    }
}

#[derive(Clone, Debug)]
pub struct LstmForward {
    /// `T x H` block outputs; masked rows repeat the previous state.
    pub outputs: Array2<f64>,
    pub final_state: LstmState,
    pub cache: LstmCache,
}

impl LstmParams {
    /// `4H x (H + D)` view of the stacked gate weights.
    fn matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((GATES * self.hidden, self.row_width()), &self.weights).expect("shape")
    }
}

/// Runs the layer from a zero state over `inputs` (`T x D`). Steps whose mask
/// entry is false leave the state untouched.
///
/// The input half of every pre-activation, `W_x x_t + b`, is computed for
/// all steps at once as a matrix product; only `W_h h_{t-1}` runs step by
/// step.
pub fn lstm_forward(params: &LstmParams, inputs: ArrayView2<f64>, mask: &[bool]) -> Result<LstmForward> {
    let (steps, d) = inputs.dim();
    if d != params.input {
        return Err(Error::Shape(format!(
            "lstm_forward: input has {d} columns, layer expects {}",
            params.input
        )));
    }
    if mask.len() != steps {
        return Err(Error::Shape(format!(
            "lstm_forward: mask length {} for {steps} steps",
            mask.len()
        )));
    }
    if steps == 0 {
        return Err(Error::Shape("lstm_forward: empty sequence".into()));
    }
    let hd = params.hidden;
    let width = params.row_width();
    let w = params.matrix();

    let mut gates: Vec<f64> = params.bias.iter().copied().cycle().take(steps * GATES * hd).collect();
    {
        let mut z = ArrayViewMut2::from_shape((steps, GATES * hd), &mut gates).expect("shape");
        general_mat_mul(1.0, &inputs, &w.slice(s![.., hd..]).t(), 1.0, &mut z);
    }

    let mut prev_h = vec![0.0; steps * hd];
    let mut cells = vec![0.0; steps * hd];
    let mut tanh_cells = vec![0.0; steps * hd];
    let mut outputs = vec![0.0; steps * hd];
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut tc = vec![0.0; hd];

    for t in 0..steps {
        let z = &mut gates[t * GATES * hd..(t + 1) * GATES * hd];
        if mask[t] {
            prev_h[t * hd..(t + 1) * hd].copy_from_slice(&h);
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&params.weights[r * width..r * width + hd], &h);
            }
            activate(hd, z, &mut h, &mut c, &mut tc);
            tanh_cells[t * hd..(t + 1) * hd].copy_from_slice(&tc);
        } else {
            z.fill(0.0);
        }
        outputs[t * hd..(t + 1) * hd].copy_from_slice(&h);
        cells[t * hd..(t + 1) * hd].copy_from_slice(&c);
    }

    Ok(LstmForward {
        outputs: Array2::from_shape_vec((steps, hd), outputs).expect("shape"),
        final_state: LstmState { h, c },
        cache: LstmCache {
            hidden: hd,
            input: d,
            mask: mask.to_vec(),
            inputs: inputs.to_owned(),
            prev_h: Array2::from_shape_vec((steps, hd), prev_h).expect("shape"),
            gates,
            cells,
            tanh_cells,
        },
    })
}

#[derive(Clone, Debug)]
pub struct LstmBackward {
    pub params: LstmGrads,
    /// `T x D`; zero on masked steps.
    pub inputs: Array2<f64>,
}

/// Exact gradients of `sum_t <grad_h[t], h_t>` with respect to parameters
/// and inputs.
pub fn lstm_backward(params: &LstmParams, cache: &LstmCache, grad_h: ArrayView2<f64>) -> Result<LstmBackward> {
    let mut grads = params.zeros_like();
    let inputs = lstm_backward_into(params, cache, grad_h, &mut grads)?;
    Ok(LstmBackward { params: grads, inputs })
}

/// As [`lstm_backward`], accumulating parameter gradients into `grads`.
///
/// The time loop only produces the pre-activation gradients `dz_t`; weight,
/// bias and input gradients are then formed from them with matrix products.
pub fn lstm_backward_into(
    params: &LstmParams,
    cache: &LstmCache,
    grad_h: ArrayView2<f64>,
    grads: &mut LstmGrads,
) -> Result<Array2<f64>> {
    let hd = params.hidden;
    let d = params.input;
    let steps = cache.len();
    if cache.hidden != hd || cache.input != d || !grads.same_shape(params) {
        return Err(Error::Shape("lstm_backward: cache/parameter shape mismatch".into()));
    }
    if grad_h.dim() != (steps, hd) {
        return Err(Error::Shape(format!(
            "lstm_backward: upstream gradient {:?}, expected ({steps}, {hd})",
            grad_h.dim()
        )));
    }
    let width = params.row_width();
    let grad_h = grad_h.as_standard_layout();
    let gh = grad_h.as_slice().expect("standard layout");

    // Rows of masked steps stay zero.
    let mut dzs = Array2::<f64>::zeros((steps, GATES * hd));
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dh = vec![0.0; hd];
    let zero = vec![0.0; hd];

    for t in (0..steps).rev() {
        for (j, v) in dh.iter_mut().enumerate() {
            *v = gh[t * hd + j] + dh_next[j];
        }
        if !cache.mask[t] {
            dh_next.copy_from_slice(&dh);
            continue;
        }
        let g = cache.gates_at(t);
        let (f, i, o, cand) = (&g[..hd], &g[hd..2 * hd], &g[2 * hd..3 * hd], &g[3 * hd..]);
        let tc = &cache.tanh_cells[t * hd..(t + 1) * hd];
        let c_prev = if t > 0 { &cache.cells[(t - 1) * hd..t * hd] } else { &zero[..] };
        let mut row = dzs.row_mut(t);
        let dz = row.as_slice_mut().expect("contiguous row");
        for j in 0..hd {
            let dc = dc_next[j] + dh[j] * o[j] * (1.0 - tc[j] * tc[j]);
            dz[j] = dc * c_prev[j] * f[j] * (1.0 - f[j]);
            dz[hd + j] = dc * cand[j] * i[j] * (1.0 - i[j]);
            dz[2 * hd + j] = dh[j] * tc[j] * o[j] * (1.0 - o[j]);
            dz[3 * hd + j] = dc * i[j] * (1.0 - cand[j] * cand[j]);
            dc_next[j] = dc * f[j];
        }
        dh_next.fill(0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            axpy(dzr, &params.weights[r * width..r * width + hd], &mut dh_next);
        }
    }

    for (b, col) in grads.bias.iter_mut().zip(dzs.columns()) {
        *b += col.sum();
    }
    let mut gw = ArrayViewMut2::from_shape((GATES * hd, width), &mut grads.weights).expect("shape");
    general_mat_mul(1.0, &dzs.t(), &cache.prev_h, 1.0, &mut gw.slice_mut(s![.., ..hd]));
    general_mat_mul(1.0, &dzs.t(), &cache.inputs, 1.0, &mut gw.slice_mut(s![.., hd..]));
    let mut dx = Array2::zeros((steps, d));
    general_mat_mul(1.0, &dzs, &params.matrix().slice(s![.., hd..]), 0.0, &mut dx);
    Ok(dx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl DenseParams {
    pub fn zeros(input: usize) -> Self {
        DenseParams {
            weights: vec![0.0; input],
            bias: 0.0,
        }
    }

    pub fn uniform<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Self {
        let r = 1.0 / (input as f64).sqrt();
        DenseParams {
            weights: (0..input).map(|_| rng.gen_range(-r..=r)).collect(),
            bias: rng.gen_range(-r..=r),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// `sigmoid(w . x + b)`.
pub fn dense_sigmoid(params: &DenseParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.weights.len() {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {}",
            params.weights.len(),
            x.len()
        )));
    }
    Ok(sigmoid(dot(&params.weights, x) + params.bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{s, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_inputs(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, d), |_| rng.gen_range(-1.5..1.5))
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let s = lstm_step(&p, &LstmState::zeros(3), &[0.7, -2.0]).unwrap();
        assert_eq!(s.h, vec![0.0; 3]);
        assert_eq!(s.c, vec![0.0; 3]);
    }

    #[test]
    fn forget_gate_only_scalar_case() {
        let mut p = LstmParams::zeros(1, 1);
        p.bias_mut()[Gate::Forget as usize] = 10.0;
        let state = LstmState { h: vec![0.0], c: vec![3.0] };
        let next = lstm_step(&p, &state, &[0.4]).unwrap();
        let f = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((next.c[0] - 3.0 * f).abs() < 1e-15);
        assert!((next.c[0] - 2.99986).abs() < 1e-5);
        assert!((next.h[0] - 0.5 * next.c[0].tanh()).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let p = LstmParams::zeros(2, 3);
        assert!(lstm_step(&p, &LstmState::zeros(2), &[1.0]).is_err());
        assert!(lstm_step(&p, &LstmState::zeros(4), &[1.0, 2.0, 3.0]).is_err());
        assert!(LstmParams::from_parts(2, 3, vec![0.0; 5], vec![0.0; 8]).is_err());
    }

    #[test]
    fn single_step_forward_matches_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::uniform(4, 3, 1.0, &mut rng);
        let x = random_inputs(&mut rng, 1, 3);
        let fwd = lstm_forward(&p, x.view(), &[true]).unwrap();
        let s = lstm_step(&p, &LstmState::zeros(4), x.row(0).as_slice().unwrap()).unwrap();
        assert_eq!(fwd.final_state, s);
        assert_eq!(fwd.outputs.row(0).to_vec(), s.h);
    }

    #[test]
    fn all_masked_is_pure_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = LstmParams::uniform(4, 3, 1.0, &mut rng);
        let x = random_inputs(&mut rng, 6, 3);
        let fwd = lstm_forward(&p, x.view(), &[false; 6]).unwrap();
        assert!(fwd.outputs.iter().all(|&v| v == 0.0));
        assert_eq!(fwd.final_state, LstmState::zeros(4));
    }

    #[test]
    fn trailing_padding_is_exact_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::uniform(5, 3, 1.0, &mut rng);
        let mut x = random_inputs(&mut rng, 12, 3);
        let short = lstm_forward(&p, x.slice(s![..5, ..]), &[true; 5]).unwrap();
        // garbage in the padded rows must not matter
        x.slice_mut(s![5.., ..]).fill(99.0);
        let mut mask = vec![false; 12];
        mask[..5].fill(true);
        let padded = lstm_forward(&p, x.view(), &mask).unwrap();
        assert_eq!(short.outputs, padded.outputs.slice(s![..5, ..]));
        assert_eq!(short.final_state, padded.final_state);
        for t in 5..12 {
            assert_eq!(padded.outputs.row(t), short.outputs.row(4));
        }
    }

    #[test]
    fn outputs_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = LstmParams::uniform(6, 4, 1.0, &mut rng);
        p.scale(8.0);
        let x = random_inputs(&mut rng, 30, 4) * 10.0;
        let fwd = lstm_forward(&p, x.view(), &[true; 30]).unwrap();
        assert!(fwd.outputs.iter().all(|v| v.abs() < 1.0));
        for t in 0..30 {
            assert!(fwd.cache.gates_at(t).iter().all(|g| (-1.0..=1.0).contains(g)));
        }
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::uniform(3, 2, 1.0, &mut rng);
        let x = random_inputs(&mut rng, 7, 2);
        let fwd = lstm_forward(&p, x.view(), &[true; 7]).unwrap();
        let back = lstm_backward(&p, &fwd.cache, Array2::zeros((7, 3)).view()).unwrap();
        assert!(back.params.weights().iter().all(|&g| g == 0.0));
        assert!(back.params.bias().iter().all(|&g| g == 0.0));
        assert!(back.inputs.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_gradient() {
        let p = LstmParams::zeros(3, 2);
        let fwd = lstm_forward(&p, Array2::zeros((4, 2)).view(), &[true; 4]).unwrap();
        assert!(lstm_backward(&p, &fwd.cache, Array2::zeros((4, 2)).view()).is_err());
        let other = LstmParams::zeros(2, 2);
        assert!(lstm_backward(&other, &fwd.cache, Array2::zeros((4, 2)).view()).is_err());
    }

    #[test]
    fn dense_head() {
        let zero = DenseParams::zeros(4);
        assert_eq!(dense_sigmoid(&zero, &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.5);
        let sat = DenseParams { weights: vec![0.0; 2], bias: 20.0 };
        assert!((dense_sigmoid(&sat, &[5.0, -5.0]).unwrap() - 1.0).abs() < 1e-8);
        assert!(dense_sigmoid(&zero, &[1.0]).is_err());
        let p = DenseParams { weights: vec![0.3, -1.2, 0.5], bias: 0.1 };
        let x = [0.9, 0.4, -2.0];
        let z: f64 = 0.3 * 0.9 + -1.2 * 0.4 + 0.5 * -2.0 + 0.1;
        assert!((dense_sigmoid(&p, &x).unwrap() - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable_far_out() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(-35.0) - (-35.0f64).exp() / (1.0 + (-35.0f64).exp())).abs() < 1e-25);
    }
}
