//! Reference implementations used as test oracles. Each one is written
//! independently of the library code it checks: plain loops, no shared
//! helpers.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigverify::lstm::{Gate, LstmParams};
use sigverify::siamese::{SiameseGrads, SiameseModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One LSTM step evaluated gate by gate from the block equations:
/// f, i, o = logistic(W [h; x] + b), c~ = tanh(W [h; x] + b),
/// c = f c_prev + i c~, h = o tanh(c).
pub fn scalar_lstm_step(p: &LstmParams, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden_size();
    let d = p.input_size();
    let pre = |gate: Gate, j: usize| -> f64 {
        let w = p.gate_weights(gate);
        let row = &w[j * (hd + d)..(j + 1) * (hd + d)];
        let mut z = p.gate_bias(gate)[j];
        for k in 0..hd {
            z += row[k] * h[k];
        }
        for k in 0..d {
            z += row[hd + k] * x[k];
        }
        z
    };
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    for j in 0..hd {
        let f = logistic(pre(Gate::Forget, j));
        let i = logistic(pre(Gate::Input, j));
        let o = logistic(pre(Gate::Output, j));
        let g = pre(Gate::Candidate, j).tanh();
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    (h_new, c_new)
}

/// Relative error with a small absolute floor so that gradients that are
/// zero up to rounding compare as equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between backpropagated and central-difference
/// gradients of the pair loss over every parameter of the model.
pub fn siamese_gradient_error(model: &SiameseModel, a: ArrayView2<f64>, b: ArrayView2<f64>, label: u8, step: f64) -> f64 {
    let mut grads = SiameseGrads::zeros_for(model);
    model.accumulate_gradient(a, b, label, &mut grads).unwrap();
    let analytic = grads.to_flat();
    let base = model.params_flat();
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for (n, &g) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[n] = base[n] + step;
        probe.set_params_flat(&p).unwrap();
        let up = probe.pair_loss_of(a, b, label).unwrap();
        p[n] = base[n] - step;
        probe.set_params_flat(&p).unwrap();
        let down = probe.pair_loss_of(a, b, label).unwrap();
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(g, numeric));
    }
    worst
}

/// DTW by enumerating every monotone alignment path from (0,0) to
/// (n-1,m-1). Returns cost / length of the cheapest path, shortest among
/// equally cheap ones.
pub fn brute_force_dtw(a: ArrayView2<f64>, b: ArrayView2<f64>, columns: &[usize]) -> f64 {
    let local = |i: usize, j: usize| -> f64 {
        columns
            .iter()
            .map(|&c| {
                let d = a[[i, c - 1]] - b[[j, c - 1]];
                d * d
            })
            .sum()
    };
    let (n, m) = (a.nrows(), b.nrows());
    let mut best = (f64::INFINITY, usize::MAX);
    let mut stack = vec![(0usize, 0usize, local(0, 0), 1usize)];
    while let Some((i, j, cost, len)) = stack.pop() {
        if i == n - 1 && j == m - 1 {
            if cost < best.0 || (cost == best.0 && len < best.1) {
                best = (cost, len);
            }
            continue;
        }
        if i + 1 < n {
            stack.push((i + 1, j, cost + local(i + 1, j), len + 1));
        }
        if j + 1 < m {
            stack.push((i, j + 1, cost + local(i, j + 1), len + 1));
        }
        if i + 1 < n && j + 1 < m {
            stack.push((i + 1, j + 1, cost + local(i + 1, j + 1), len + 1));
        }
    }
    best.0 / best.1 as f64
}

/// EER in percent from FAR/FRR evaluated at a threshold below all scores,
/// at every midpoint between consecutive distinct scores, and above all
/// scores; linear interpolation between the two points around FAR = FRR.
pub fn midpoint_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut all: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup();
    let mut thresholds = vec![all[0] - 1.0];
    for w in all.windows(2) {
        thresholds.push(0.5 * (w[0] + w[1]));
    }
    thresholds.push(all[all.len() - 1] + 1.0);
    let point = |t: f64| -> (f64, f64) {
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
        (far, frr)
    };
    let points: Vec<(f64, f64)> = thresholds.iter().map(|&t| point(t)).collect();
    for w in points.windows(2) {
        let (d0, d1) = (w[0].0 - w[0].1, w[1].0 - w[1].1);
        if d0 > 0.0 && d1 <= 0.0 {
            if d1 == 0.0 {
                return 100.0 * w[1].0;
            }
            let t = d0 / (d0 - d1);
            return 100.0 * (w[0].0 + t * (w[1].0 - w[0].0));
        }
    }
    unreachable!("FAR - FRR goes from 1 to -1")
}
