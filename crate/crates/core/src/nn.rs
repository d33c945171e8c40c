//! Bidirectional recurrent encoder (RNN, LSTM, GRU) with manual
//! backpropagation through time, and the tag projection with its explicit
//! left/right split.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid, Mat};
use crate::seed;

/// Initial weight range: uniform(−0.25, 0.25).
pub const INIT_BOUND: f64 = 0.25;
pub const LSTM_FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Rnn,
    Lstm,
    Gru,
    /// Elman recurrence without the tanh. Only useful for closed-form checks.
    #[doc(hidden)]
    IdentityRnn,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Rnn, CellKind::Lstm, CellKind::Gru];

    /// Number of stacked gate blocks in the weight matrices.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Rnn | CellKind::IdentityRnn => 1,
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::IdentityRnn => "identity-rnn",
        })
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(CellKind::Rnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            "identity-rnn" => Ok(CellKind::IdentityRnn),
            other => Err(Error::invalid(format!("unknown cell kind {other:?}"))),
        }
    }
}

/// Weights of one recurrent direction. Gate blocks are stacked row-wise:
/// LSTM `[input; forget; candidate; output]`, GRU `[reset; update; candidate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    /// `gates·h × d`
    pub w_input: Mat,
    /// `gates·h × h`
    pub w_hidden: Mat,
    /// `gates·h`
    pub bias: Vec<f64>,
}

impl CellParams {
    pub fn zeros(kind: CellKind, input_dim: usize, hidden: usize) -> Self {
        let g = kind.gates() * hidden;
        CellParams {
            kind,
            input_dim,
            hidden,
            w_input: Mat::zeros(g, input_dim),
            w_hidden: Mat::zeros(g, hidden),
            bias: vec![0.0; g],
        }
    }

    pub fn init(kind: CellKind, input_dim: usize, hidden: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let g = kind.gates() * hidden;
        let w_input = Mat::uniform(g, input_dim, INIT_BOUND, rng);
        let w_hidden = Mat::uniform(g, hidden, INIT_BOUND, rng);
        let mut bias = Mat::uniform(1, g, INIT_BOUND, rng).as_slice().to_vec();
        if kind == CellKind::Lstm {
            bias[hidden..2 * hidden].fill(LSTM_FORGET_BIAS);
        }
        CellParams {
            kind,
            input_dim,
            hidden,
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn zeros_like(&self) -> Self {
        CellParams::zeros(self.kind, self.input_dim, self.hidden)
    }

    pub fn zero_state(&self) -> RecurrentState {
        RecurrentState {
            h: vec![0.0; self.hidden],
            c: if self.kind == CellKind::Lstm {
                vec![0.0; self.hidden]
            } else {
                Vec::new()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    /// LSTM memory cell; empty for the other kinds.
    pub c: Vec<f64>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gate values, stacked like the weights.
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

fn step_cached(p: &CellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let hs = p.hidden;
    let mut pre = p.bias.clone();
    p.w_input.matvec_rows_acc(0..pre.len(), x, &mut pre);
    let (gates, c, h) = match p.kind {
        CellKind::Rnn | CellKind::IdentityRnn => {
            p.w_hidden.matvec_rows_acc(0..hs, h_prev, &mut pre);
            if p.kind == CellKind::Rnn {
                pre.iter_mut().for_each(|v| *v = v.tanh());
            }
            (pre.clone(), Vec::new(), pre)
        }
        CellKind::Lstm => {
            p.w_hidden.matvec_rows_acc(0..4 * hs, h_prev, &mut pre);
            for (k, v) in pre.iter_mut().enumerate() {
                *v = if (2 * hs..3 * hs).contains(&k) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
            let mut c = vec![0.0; hs];
            let mut h = vec![0.0; hs];
            for j in 0..hs {
                let (i, f, g, o) = (pre[j], pre[hs + j], pre[2 * hs + j], pre[3 * hs + j]);
                c[j] = f * c_prev[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            (pre, c, h)
        }
        CellKind::Gru => {
            p.w_hidden.matvec_rows_acc(0..2 * hs, h_prev, &mut pre[..2 * hs]);
            for v in &mut pre[..2 * hs] {
                *v = sigmoid(*v);
            }
            let rh: Vec<f64> = (0..hs).map(|j| pre[j] * h_prev[j]).collect();
            p.w_hidden.matvec_rows_acc(2 * hs..3 * hs, &rh, &mut pre[2 * hs..]);
            for v in &mut pre[2 * hs..] {
                *v = v.tanh();
            }
            let h = (0..hs)
                .map(|j| {
                    let (z, n) = (pre[hs + j], pre[2 * hs + j]);
                    (1.0 - z) * h_prev[j] + z * n
                })
                .collect();
            (pre, Vec::new(), h)
        }
    };
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        h,
    }
}

/// Backpropagate one step. `dh`/`dc` are the total gradients reaching this
/// step's outputs; returns the gradients for the previous state.
fn step_backward(p: &CellParams, s: &StepCache, dh: &[f64], dc: &[f64], grad: &mut CellParams) -> (Vec<f64>, Vec<f64>) {
    let hs = p.hidden;
    let gh = p.kind.gates() * hs;
    let mut dpre = vec![0.0; gh];
    let mut dh_prev = vec![0.0; hs];
    let mut dc_prev = Vec::new();
    match p.kind {
        CellKind::Rnn => {
            for j in 0..hs {
                dpre[j] = dh[j] * (1.0 - s.h[j] * s.h[j]);
            }
        }
        CellKind::IdentityRnn => dpre.copy_from_slice(dh),
        CellKind::Lstm => {
            dc_prev = vec![0.0; hs];
            let g = &s.gates;
            for j in 0..hs {
                let (i, f, cand, o) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
                let tc = s.c[j].tanh();
                let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
                dpre[j] = dct * cand * i * (1.0 - i);
                dpre[hs + j] = dct * s.c_prev[j] * f * (1.0 - f);
                dpre[2 * hs + j] = dct * i * (1.0 - cand * cand);
                dpre[3 * hs + j] = dh[j] * tc * o * (1.0 - o);
                dc_prev[j] = dct * f;
            }
        }
        CellKind::Gru => {
            let g = &s.gates;
            let mut rh = vec![0.0; hs];
            for j in 0..hs {
                let (r, z, n) = (g[j], g[hs + j], g[2 * hs + j]);
                rh[j] = r * s.h_prev[j];
                dpre[2 * hs + j] = dh[j] * z * (1.0 - n * n);
                dpre[hs + j] = dh[j] * (n - s.h_prev[j]) * z * (1.0 - z);
                dh_prev[j] = dh[j] * (1.0 - z);
            }
            let mut drh = vec![0.0; hs];
            p.w_hidden.matvec_t_rows_acc(2 * hs..3 * hs, &dpre[2 * hs..], &mut drh);
            for j in 0..hs {
                let r = g[j];
                dpre[j] = drh[j] * s.h_prev[j] * r * (1.0 - r);
                dh_prev[j] += drh[j] * r;
            }
            grad.w_hidden.outer_rows_acc(2 * hs..3 * hs, &dpre[2 * hs..], &rh);
            grad.w_hidden.outer_rows_acc(0..2 * hs, &dpre[..2 * hs], &s.h_prev);
            p.w_hidden.matvec_t_rows_acc(0..2 * hs, &dpre[..2 * hs], &mut dh_prev);
        }
    }
    if p.kind != CellKind::Gru {
        grad.w_hidden.outer_rows_acc(0..gh, &dpre, &s.h_prev);
        p.w_hidden.matvec_t_rows_acc(0..gh, &dpre, &mut dh_prev);
    }
    grad.w_input.outer_rows_acc(0..gh, &dpre, &s.x);
    for (b, d) in grad.bias.iter_mut().zip(&dpre) {
        *b += d;
    }
    (dh_prev, dc_prev)
}

/// One recurrent step. Returns the new state and the output vector.
pub fn cell_step(params: &CellParams, x: &[f64], state: &RecurrentState) -> Result<(RecurrentState, Vec<f64>)> {
    if x.len() != params.input_dim {
        return Err(Error::Dimension {
            expected: params.input_dim,
            actual: x.len(),
            context: "cell input",
        });
    }
    if state.h.len() != params.hidden {
        return Err(Error::Dimension {
            expected: params.hidden,
            actual: state.h.len(),
            context: "cell hidden state",
        });
    }
    let c_prev = if params.kind == CellKind::Lstm {
        if state.c.len() != params.hidden {
            return Err(Error::Dimension {
                expected: params.hidden,
                actual: state.c.len(),
                context: "lstm cell state",
            });
        }
        state.c.as_slice()
    } else {
        &[]
    };
    let s = step_cached(params, x, &state.h, c_prev);
    let out = s.h.clone();
    Ok((RecurrentState { h: s.h, c: s.c }, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub cell: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub seed: u64,
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub forward: CellParams,
    pub backward: CellParams,
    /// `|T| × 2h`; row `t` is `[p_{t,L} ; p_{t,R}]`.
    pub projection: Mat,
    pub bias: Vec<f64>,
    /// `(|T| + 1) × |T|`; row 0 holds start scores, row `a + 1` the scores of
    /// moving from tag `a`.
    pub transitions: Mat,
    pub hyper: HyperParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "L",
            Side::Right => "R",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" | "left" => Ok(Side::Left),
            "R" | "r" | "right" => Ok(Side::Right),
            other => Err(Error::invalid(format!("unknown side {other:?}"))),
        }
    }
}

impl ModelParams {
    /// Fresh model with every weight drawn from uniform(−0.25, 0.25).
    pub fn init(cell: CellKind, input_dim: usize, hidden: usize, num_tags: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed::derive(seed_value, seed::streams::INIT));
        let forward = CellParams::init(cell, input_dim, hidden, &mut rng);
        let backward = CellParams::init(cell, input_dim, hidden, &mut rng);
        let projection = Mat::uniform(num_tags, 2 * hidden, INIT_BOUND, &mut rng);
        let bias = Mat::uniform(1, num_tags, INIT_BOUND, &mut rng).as_slice().to_vec();
        let transitions = Mat::uniform(num_tags + 1, num_tags, INIT_BOUND, &mut rng);
        ModelParams {
            forward,
            backward,
            projection,
            bias,
            transitions,
            hyper: HyperParams {
                cell,
                input_dim,
                hidden,
                seed: seed_value,
                lr: 0.0,
                epochs: 0,
            },
        }
    }

    pub fn zeros(cell: CellKind, input_dim: usize, hidden: usize, num_tags: usize) -> Self {
        ModelParams {
            forward: CellParams::zeros(cell, input_dim, hidden),
            backward: CellParams::zeros(cell, input_dim, hidden),
            projection: Mat::zeros(num_tags, 2 * hidden),
            bias: vec![0.0; num_tags],
            transitions: Mat::zeros(num_tags + 1, num_tags),
            hyper: HyperParams {
                cell,
                input_dim,
                hidden,
                seed: 0,
                lr: 0.0,
                epochs: 0,
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
            projection: Mat::zeros(self.projection.rows(), self.projection.cols()),
            bias: vec![0.0; self.bias.len()],
            transitions: Mat::zeros(self.transitions.rows(), self.transitions.cols()),
            hyper: self.hyper.clone(),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.bias.len()
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim
    }

    /// `p_{t,K}`.
    pub fn side_weights(&self, tag: usize, side: Side) -> &[f64] {
        let h = self.hidden();
        let row = self.projection.row(tag);
        match side {
            Side::Left => &row[..h],
            Side::Right => &row[h..],
        }
    }

    /// Named parameter blocks in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("forward.w_input", self.forward.w_input.as_slice()),
            ("forward.w_hidden", self.forward.w_hidden.as_slice()),
            ("forward.bias", &self.forward.bias),
            ("backward.w_input", self.backward.w_input.as_slice()),
            ("backward.w_hidden", self.backward.w_hidden.as_slice()),
            ("backward.bias", &self.backward.bias),
            ("projection", self.projection.as_slice()),
            ("bias", &self.bias),
            ("transitions", self.transitions.as_slice()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("forward.w_input", self.forward.w_input.as_mut_slice()),
            ("forward.w_hidden", self.forward.w_hidden.as_mut_slice()),
            ("forward.bias", &mut self.forward.bias),
            ("backward.w_input", self.backward.w_input.as_mut_slice()),
            ("backward.w_hidden", self.backward.w_hidden.as_mut_slice()),
            ("backward.bias", &mut self.backward.bias),
            ("projection", self.projection.as_mut_slice()),
            ("bias", &mut self.bias),
            ("transitions", self.transitions.as_mut_slice()),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// L2 norm over every parameter.
    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += factor · other`, block by block.
    pub fn add_scaled(&mut self, other: &ModelParams, factor: f64) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += factor * s;
            }
        }
    }
}

/// Per-token left and right hidden vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl HiddenStates {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn side(&self, token: usize, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left[token],
            Side::Right => &self.right[token],
        }
    }
}

/// Forward pass with the caches needed for backpropagation.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub states: HiddenStates,
    forward_steps: Vec<StepCache>,
    /// In processing order, i.e. `backward_steps[k]` read token `n − 1 − k`.
    backward_steps: Vec<StepCache>,
}

fn run_direction<'a>(p: &CellParams, inputs: impl Iterator<Item = &'a Vec<f64>>) -> Vec<StepCache> {
    let zero = p.zero_state();
    let mut h = zero.h;
    let mut c = zero.c;
    let mut steps = Vec::new();
    for x in inputs {
        let s = step_cached(p, x, &h, &c);
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        steps.push(s);
    }
    steps
}

pub fn encode(model: &ModelParams, inputs: &[Vec<f64>]) -> Result<Encoded> {
    if inputs.is_empty() {
        return Err(Error::invalid("cannot encode an empty sentence"));
    }
    let d = model.input_dim();
    if let Some(x) = inputs.iter().find(|x| x.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            actual: x.len(),
            context: "word vector",
        });
    }
    let forward_steps = run_direction(&model.forward, inputs.iter());
    let backward_steps = run_direction(&model.backward, inputs.iter().rev());
    let left = forward_steps.iter().map(|s| s.h.clone()).collect();
    let right = backward_steps.iter().rev().map(|s| s.h.clone()).collect();
    Ok(Encoded {
        states: HiddenStates { left, right },
        forward_steps,
        backward_steps,
    })
}

pub fn encode_bidirectional(model: &ModelParams, inputs: &[Vec<f64>]) -> Result<HiddenStates> {
    Ok(encode(model, inputs)?.states)
}

/// `score(i, t) = p_{t,L}·h_L(i) + p_{t,R}·h_R(i) + bias_t`.
pub fn emissions(model: &ModelParams, states: &HiddenStates) -> Vec<Vec<f64>> {
    (0..states.len())
        .map(|i| {
            (0..model.num_tags())
                .map(|t| {
                    let (l, r) = split_emission(model, states, i, t);
                    l + r
                })
                .collect()
        })
        .collect()
}

/// `(p_{t,L}·h_L, p_{t,R}·h_R + bias_t)`. The two parts sum to the emission.
pub fn split_emission(model: &ModelParams, states: &HiddenStates, token: usize, tag: usize) -> (f64, f64) {
    let left = dot(model.side_weights(tag, Side::Left), &states.left[token]);
    let right = dot(model.side_weights(tag, Side::Right), &states.right[token]) + model.bias[tag];
    (left, right)
}

/// One side evaluated in isolation: `p_{t,K}·h_K + bias_t`.
pub fn side_score(model: &ModelParams, states: &HiddenStates, token: usize, tag: usize, side: Side) -> f64 {
    dot(model.side_weights(tag, side), states.side(token, side)) + model.bias[tag]
}

impl Encoded {
    /// Gradients of a loss whose derivative with respect to the emission
    /// scores is `d_emissions` (`n × |T|`). Transition gradients are left at
    /// zero; they do not flow through the encoder.
    pub fn backward(&self, model: &ModelParams, d_emissions: &[Vec<f64>]) -> ModelParams {
        let n = self.states.len();
        let h = model.hidden();
        let mut grad = model.zeros_like();
        let mut dh_left = vec![vec![0.0; h]; n];
        let mut dh_right = vec![vec![0.0; h]; n];
        for (i, de) in d_emissions.iter().enumerate() {
            let mut hcat = self.states.left[i].clone();
            hcat.extend_from_slice(&self.states.right[i]);
            grad.projection.outer_rows_acc(0..de.len(), de, &hcat);
            for (b, g) in grad.bias.iter_mut().zip(de) {
                *b += g;
            }
            let mut dcat = vec![0.0; 2 * h];
            model.projection.matvec_t_rows_acc(0..de.len(), de, &mut dcat);
            dh_left[i].copy_from_slice(&dcat[..h]);
            dh_right[i].copy_from_slice(&dcat[h..]);
        }
        bptt(&model.forward, &self.forward_steps, &dh_left, &mut grad.forward);
        let dh_right_processing: Vec<Vec<f64>> = dh_right.into_iter().rev().collect();
        bptt(&model.backward, &self.backward_steps, &dh_right_processing, &mut grad.backward);
        grad
    }
}

/// `dh_out[k]` is the external gradient on the output of step `k`.
fn bptt(p: &CellParams, steps: &[StepCache], dh_out: &[Vec<f64>], grad: &mut CellParams) {
    let hs = p.hidden;
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; if p.kind == CellKind::Lstm { hs } else { 0 }];
    for (s, ext) in steps.iter().zip(dh_out).rev() {
        let dh: Vec<f64> = ext.iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let (dh_prev, dc_prev) = step_backward(p, s, &dh, &dc_next, grad);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_vec(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let x = vec![0.3, -2.0, 1.0];
        for kind in [CellKind::Rnn, CellKind::Lstm, CellKind::Gru] {
            let p = CellParams::zeros(kind, 3, 4);
            let mut state = p.zero_state();
            for _ in 0..5 {
                let (next, out) = cell_step(&p, &x, &state).unwrap();
                assert!(out.iter().all(|v| *v == 0.0), "{kind}");
                state = next;
            }
        }
        let m = ModelParams::zeros(CellKind::Lstm, 3, 4, 3);
        let st = encode_bidirectional(&m, &[x.clone(), x]).unwrap();
        assert!(st.left.iter().chain(&st.right).flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let p = CellParams::zeros(CellKind::Gru, 3, 2);
        assert!(matches!(
            cell_step(&p, &[1.0, 2.0], &p.zero_state()),
            Err(Error::Dimension { .. })
        ));
        let m = ModelParams::zeros(CellKind::Gru, 3, 2, 2);
        assert!(encode(&m, &[]).is_err());
    }

    /// Scalar-by-scalar re-implementation of the three cells.
    fn naive_step(p: &CellParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hs = p.hidden;
        let d = p.input_dim;
        let lin = |row: usize, hv: &[f64]| {
            let mut s = p.bias[row];
            for k in 0..d {
                s += p.w_input.get(row, k) * x[k];
            }
            for k in 0..hs {
                s += p.w_hidden.get(row, k) * hv[k];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        match p.kind {
            CellKind::Rnn => ((0..hs).map(|j| lin(j, h).tanh()).collect(), vec![]),
            CellKind::IdentityRnn => ((0..hs).map(|j| lin(j, h)).collect(), vec![]),
            CellKind::Lstm => {
                let mut hn = vec![0.0; hs];
                let mut cn = vec![0.0; hs];
                for j in 0..hs {
                    let i = sig(lin(j, h));
                    let f = sig(lin(hs + j, h));
                    let g = lin(2 * hs + j, h).tanh();
                    let o = sig(lin(3 * hs + j, h));
                    cn[j] = f * c[j] + i * g;
                    hn[j] = o * cn[j].tanh();
                }
                (hn, cn)
            }
            CellKind::Gru => {
                let r: Vec<f64> = (0..hs).map(|j| sig(lin(j, h))).collect();
                let z: Vec<f64> = (0..hs).map(|j| sig(lin(hs + j, h))).collect();
                let rh: Vec<f64> = (0..hs).map(|j| r[j] * h[j]).collect();
                let mut hn = vec![0.0; hs];
                for j in 0..hs {
                    let mut s = p.bias[2 * hs + j];
                    for k in 0..d {
                        s += p.w_input.get(2 * hs + j, k) * x[k];
                    }
                    for k in 0..hs {
                        s += p.w_hidden.get(2 * hs + j, k) * rh[k];
                    }
                    hn[j] = (1.0 - z[j]) * h[j] + z[j] * s.tanh();
                }
                (hn, vec![])
            }
        }
    }

    #[test]
    fn cell_matches_naive_oracle() {
        let mut rng = seed::rng(42);
        for kind in [CellKind::Rnn, CellKind::Lstm, CellKind::Gru, CellKind::IdentityRnn] {
            let p = CellParams::init(kind, 4, 4, &mut rng);
            let mut state = p.zero_state();
            let (mut h, mut c) = (state.h.clone(), state.c.clone());
            for _ in 0..6 {
                let x = rand_vec(4, &mut rng);
                let (next, out) = cell_step(&p, &x, &state).unwrap();
                let (hn, cn) = naive_step(&p, &x, &h, &c);
                for (a, b) in out.iter().zip(&hn) {
                    assert!((a - b).abs() < 1e-12, "{kind}: {a} vs {b}");
                }
                for (a, b) in next.c.iter().zip(&cn) {
                    assert!((a - b).abs() < 1e-12);
                }
                state = next;
                h = hn;
                c = cn;
            }
        }
    }

    #[test]
    fn single_token_reads_one_step_each_way() {
        let m = ModelParams::init(CellKind::Gru, 3, 2, 3, 5);
        let x = vec![0.1, 0.2, -0.3];
        let st = encode_bidirectional(&m, &[x.clone()]).unwrap();
        let (_, l) = cell_step(&m.forward, &x, &m.forward.zero_state()).unwrap();
        let (_, r) = cell_step(&m.backward, &x, &m.backward.zero_state()).unwrap();
        assert_eq!(st.left[0], l);
        assert_eq!(st.right[0], r);
    }

    #[test]
    fn palindrome_symmetry() {
        for kind in CellKind::ALL {
            let mut m = ModelParams::init(kind, 3, 4, 3, 9);
            m.backward = m.forward.clone();
            let a = vec![0.2, -0.1, 0.4];
            let b = vec![-0.3, 0.25, 0.05];
            let st = encode_bidirectional(&m, &[a.clone(), b, a]).unwrap();
            for i in 0..3 {
                assert_eq!(st.left[i], st.right[2 - i], "{kind}");
            }
        }
    }

    fn hand_model() -> (ModelParams, HiddenStates) {
        let mut m = ModelParams::zeros(CellKind::Rnn, 2, 2, 1);
        m.projection = Mat::from_rows(&[vec![1.0, 0.0, 0.0, 2.0]]);
        m.bias = vec![0.5];
        let st = HiddenStates {
            left: vec![vec![3.0, 1.0]],
            right: vec![vec![1.0, 4.0]],
        };
        (m, st)
    }

    #[test]
    fn emission_hand_example() {
        let (m, st) = hand_model();
        assert_eq!(emissions(&m, &st), vec![vec![11.5]]);
        assert_eq!(split_emission(&m, &st, 0, 0), (3.0, 8.5));
        assert_eq!(side_score(&m, &st, 0, 0, Side::Left), 3.5);
    }

    #[test]
    fn zero_states_emit_bias() {
        let m = ModelParams::init(CellKind::Lstm, 2, 3, 4, 1);
        let st = HiddenStates {
            left: vec![vec![0.0; 3]; 2],
            right: vec![vec![0.0; 3]; 2],
        };
        for row in emissions(&m, &st) {
            assert_eq!(row, m.bias);
        }
        assert_eq!(split_emission(&m, &st, 0, 1).0, 0.0);
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let a = ModelParams::init(CellKind::Lstm, 5, 4, 3, 77);
        let b = ModelParams::init(CellKind::Lstm, 5, 4, 3, 77);
        assert_eq!(a, b);
        assert_ne!(a, ModelParams::init(CellKind::Lstm, 5, 4, 3, 78));
        for cell in [&a.forward, &a.backward] {
            assert!(cell.bias[4..8].iter().all(|v| *v == LSTM_FORGET_BIAS));
            assert!(cell.bias.iter().all(|v| v.abs() < INIT_BOUND || *v == LSTM_FORGET_BIAS));
        }
        for (name, t) in a.tensors() {
            if name.ends_with(".bias") {
                continue;
            }
            assert!(t.iter().all(|v| v.abs() < INIT_BOUND), "{name}");
        }
    }

    #[test]
    fn hidden_states_stay_finite_for_large_inputs() {
        for kind in CellKind::ALL {
            let m = ModelParams::init(kind, 3, 4, 2, 3);
            let xs = vec![vec![1e6, -1e6, 1e3]; 20];
            let st = encode_bidirectional(&m, &xs).unwrap();
            assert!(st.left.iter().chain(&st.right).flatten().all(|v| v.is_finite()));
        }
    }
}
