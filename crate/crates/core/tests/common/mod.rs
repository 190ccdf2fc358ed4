//! Reference computations shared by the integration tests. None of them
//! call the code under test for the quantity they check.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;

use spikeq::encoding::DriveMode;
use spikeq::snn::{
    softmax_ce_batch, CellKind, Dynamics, LayerParams, LifParams, Network, SpikeFn, Stimulus,
};

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

/// `n_in`-`n_hid`-`n_out` recurrent LIF + LI network whose Heaviside spike is
/// replaced by the soft gate whose derivative is the surrogate, so that the
/// surrogate gradient is the true gradient.
pub fn soft_toy_net<R: Rng>(rng: &mut R, n_in: usize, n_hid: usize, n_out: usize, steps: usize) -> Network {
    let dynamics = Dynamics {
        spike_fn: SpikeFn::Soft,
        self_connections: true,
        ..Dynamics::default()
    };
    let l1 = LayerParams::new(
        uniform(rng, n_in, n_hid, 1.5),
        Some(uniform(rng, n_hid, n_hid, 1.5)),
        CellKind::Lif,
    )
    .unwrap();
    let l2 = LayerParams::new(uniform(rng, n_hid, n_out, 1.5), None, CellKind::Li).unwrap();
    let hidden = LifParams {
        v_th: rng.random_range(0.05..0.5),
        ..LifParams::HIDDEN
    };
    Network::new(vec![l1, l2], vec![hidden, LifParams::READOUT], dynamics, steps).unwrap()
}

fn loss(net: &Network, stim: &Stimulus, targets: &[usize]) -> f64 {
    let out = net.infer(stim).unwrap();
    softmax_ce_batch(out.view(), targets).unwrap().0
}

/// Central differences of the mean cross-entropy with respect to every
/// weight, in the order of `Network::tensors_mut`.
pub fn finite_difference(net: &Network, stim: &Stimulus, targets: &[usize], eps: f64) -> Vec<Vec<f64>> {
    let shapes: Vec<usize> = net.clone().tensors_mut().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (t, &len) in shapes.iter().enumerate() {
        let mut g = Vec::with_capacity(len);
        for j in 0..len {
            let mut plus = net.clone();
            plus.tensors_mut()[t][j] += eps;
            let mut minus = net.clone();
            minus.tensors_mut()[t][j] -= eps;
            g.push((loss(&plus, stim, targets) - loss(&minus, stim, targets)) / (2.0 * eps));
        }
        out.push(g);
    }
    out
}

/// Denominator floor of [`relative_error`]: below it both values are
/// indistinguishable from the finite-difference round-off.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Largest relative error between BPTT and central differences for one
/// random draw of weights, inputs and targets.
pub fn gradient_check<R: Rng>(rng: &mut R, steps: usize, eps: f64) -> f64 {
    gradient_check_with(rng, steps, |net, stim, targets| finite_difference(net, stim, targets, eps)).0
}

/// As [`gradient_check`], against the Richardson extrapolation
/// `(4 D(eps/2) - D(eps)) / 3` of central differences, whose truncation
/// error is `O(eps^4)` instead of `O(eps^2)`. Also returns the smallest
/// `|v - v_th|` of the hidden layer: the soft gate is not twice
/// differentiable at 0, so no difference quotient is trustworthy when a
/// perturbation can move a membrane across its threshold.
pub fn richardson_check<R: Rng>(rng: &mut R, steps: usize, eps: f64) -> (f64, f64) {
    gradient_check_with(rng, steps, |net, stim, targets| {
        let coarse = finite_difference(net, stim, targets, eps);
        let fine = finite_difference(net, stim, targets, eps / 2.0);
        coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
            .collect()
    })
}

fn gradient_check_with<R: Rng>(
    rng: &mut R,
    steps: usize,
    oracle: impl Fn(&Network, &Stimulus, &[usize]) -> Vec<Vec<f64>>,
) -> (f64, f64) {
    let net = soft_toy_net(rng, 4, 3, 2, steps);
    let batch = 3;
    let stim = Stimulus::new(uniform(rng, batch, 4, 1.0), DriveMode::Constant);
    let targets: Vec<usize> = (0..batch).map(|_| rng.random_range(0..2)).collect();
    let (out, tape) = net.forward(&stim).unwrap();
    let (_, d_out) = softmax_ce_batch(out.view(), &targets).unwrap();
    let g = net.backward(&tape, d_out.view()).unwrap();
    let fd = oracle(&net, &stim, &targets);
    let mut worst = 0.0f64;
    for (gt, ft) in g.tensors().iter().zip(&fd) {
        for (a, b) in gt.iter().zip(ft) {
            worst = worst.max(relative_error(*a, *b));
        }
    }
    let v_th = net.neuron_params()[0].v_th;
    let gap = tape
        .membrane(0)
        .iter()
        .flat_map(|v| v.iter())
        .fold(f64::INFINITY, |m, v| m.min((v - v_th).abs()));
    (worst, gap)
}

/// Membrane of a linear layer (no threshold) after `k` steps, from the
/// explicit double sum `v[k] = sum_{j<k} a^(k-j) sum_{l<j} b^(j-1-l) d[l]`
/// with `d[l]` the drive injected at step `l`.
pub fn linear_membrane(alpha: f64, beta: f64, drive: &[f64], k: usize) -> f64 {
    let mut v = 0.0;
    for j in 0..k {
        let mut i = 0.0;
        for (l, d) in drive.iter().enumerate().take(j) {
            i += beta.powi((j - 1 - l) as i32) * d;
        }
        v += alpha.powi((k - j) as i32) * i;
    }
    v
}

/// Geometric-series bounds `(|i|, |v|)` of a layer whose summed input
/// magnitude never exceeds `drive`: `|i| <= D / (1 - b)`,
/// `|v| <= a |i| / (1 - a)` (scaled membrane form, hard reset to 0).
pub fn state_bounds(p: &LifParams, drive: f64) -> (f64, f64) {
    let i = drive / (1.0 - p.beta());
    (i, p.alpha() * i / (1.0 - p.alpha()))
}
