//! Sentence-level log-likelihood over tag paths: path scores, the forward
//! recursion, its gradient via forward-backward marginals, and Viterbi.
//!
//! Transitions are an `(|T| + 1) × |T|` matrix whose row 0 scores the first
//! tag and row `a + 1` scores the move `a → b`. There is no stop transition.

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, Mat};
use crate::nn::{self, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct PathScore {
    pub sentence: usize,
    pub tags: Vec<usize>,
    pub score: f64,
    pub nll: f64,
}

fn check_shapes(emissions: &[Vec<f64>], transitions: &Mat) -> Result<usize> {
    let t = transitions.cols();
    if transitions.rows() != t + 1 {
        return Err(Error::Dimension {
            expected: t + 1,
            actual: transitions.rows(),
            context: "transition rows",
        });
    }
    if let Some(row) = emissions.iter().find(|r| r.len() != t) {
        return Err(Error::Dimension {
            expected: t,
            actual: row.len(),
            context: "emission row",
        });
    }
    Ok(t)
}

/// Unnormalized score of one tag path.
pub fn sequence_score(emissions: &[Vec<f64>], transitions: &Mat, tags: &[usize]) -> Result<f64> {
    let t = check_shapes(emissions, transitions)?;
    if tags.len() != emissions.len() {
        return Err(Error::Dimension {
            expected: emissions.len(),
            actual: tags.len(),
            context: "tag sequence length",
        });
    }
    if let Some(&bad) = tags.iter().find(|&&y| y >= t) {
        return Err(Error::UnknownTag(bad));
    }
    let mut score = 0.0;
    let mut prev_row = 0;
    for (e, &y) in emissions.iter().zip(tags) {
        score += e[y] + transitions.get(prev_row, y);
        prev_row = y + 1;
    }
    Ok(score)
}

/// Log-space forward variables `alpha[i][t]`.
fn forward_vars(emissions: &[Vec<f64>], transitions: &Mat) -> Vec<Vec<f64>> {
    let t = transitions.cols();
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(emissions.len());
    for (i, e) in emissions.iter().enumerate() {
        let row = (0..t)
            .map(|b| {
                let incoming = if i == 0 {
                    transitions.get(0, b)
                } else {
                    let prev = &alpha[i - 1];
                    log_sum_exp((0..t).map(|a| prev[a] + transitions.get(a + 1, b)))
                };
                incoming + e[b]
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

fn backward_vars(emissions: &[Vec<f64>], transitions: &Mat) -> Vec<Vec<f64>> {
    let n = emissions.len();
    let t = transitions.cols();
    let mut beta = vec![vec![0.0; t]; n];
    for i in (0..n.saturating_sub(1)).rev() {
        for a in 0..t {
            beta[i][a] = log_sum_exp(
                (0..t).map(|b| transitions.get(a + 1, b) + emissions[i + 1][b] + beta[i + 1][b]),
            );
        }
    }
    beta
}

/// `log Σ_paths exp(score)` by the forward recursion.
pub fn log_partition(emissions: &[Vec<f64>], transitions: &Mat) -> Result<f64> {
    check_shapes(emissions, transitions)?;
    if emissions.is_empty() {
        return Err(Error::invalid("log partition of an empty sentence"));
    }
    let alpha = forward_vars(emissions, transitions);
    Ok(log_sum_exp(alpha.last().unwrap().iter().copied()))
}

/// `log Z − score(tags)`.
pub fn path_nll(emissions: &[Vec<f64>], transitions: &Mat, tags: &[usize]) -> Result<f64> {
    let score = sequence_score(emissions, transitions, tags)?;
    Ok(log_partition(emissions, transitions)? - score)
}

/// Negative log-likelihood with its gradient with respect to the emission
/// scores (`n × |T|`) and the transition matrix.
pub fn path_nll_grad(emissions: &[Vec<f64>], transitions: &Mat, tags: &[usize]) -> Result<(f64, Vec<Vec<f64>>, Mat)> {
    let score = sequence_score(emissions, transitions, tags)?;
    if emissions.is_empty() {
        return Err(Error::invalid("gradient of an empty sentence"));
    }
    let n = emissions.len();
    let t = transitions.cols();
    let alpha = forward_vars(emissions, transitions);
    let beta = backward_vars(emissions, transitions);
    let log_z = log_sum_exp(alpha[n - 1].iter().copied());

    let mut d_em = vec![vec![0.0; t]; n];
    let mut d_tr = Mat::zeros(t + 1, t);
    for i in 0..n {
        for b in 0..t {
            let p = (alpha[i][b] + beta[i][b] - log_z).exp();
            d_em[i][b] = p;
            if i == 0 {
                d_tr.set(0, b, d_tr.get(0, b) + p);
            }
        }
        if i > 0 {
            for a in 0..t {
                for b in 0..t {
                    let p = (alpha[i - 1][a] + transitions.get(a + 1, b) + emissions[i][b] + beta[i][b] - log_z).exp();
                    d_tr.set(a + 1, b, d_tr.get(a + 1, b) + p);
                }
            }
        }
    }
    let mut prev_row = 0;
    for (i, &y) in tags.iter().enumerate() {
        d_em[i][y] -= 1.0;
        d_tr.set(prev_row, y, d_tr.get(prev_row, y) - 1.0);
        prev_row = y + 1;
    }
    Ok((log_z - score, d_em, d_tr))
}

/// Highest-scoring path; ties go to the lower tag id.
pub fn viterbi(emissions: &[Vec<f64>], transitions: &Mat) -> Result<Vec<usize>> {
    let t = check_shapes(emissions, transitions)?;
    if emissions.is_empty() {
        return Err(Error::invalid("viterbi on an empty sentence"));
    }
    let n = emissions.len();
    let mut delta: Vec<f64> = (0..t).map(|b| transitions.get(0, b) + emissions[0][b]).collect();
    let mut back = vec![vec![0usize; t]; n];
    for i in 1..n {
        let mut next = vec![f64::NEG_INFINITY; t];
        for b in 0..t {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (a, d) in delta.iter().enumerate() {
                let v = d + transitions.get(a + 1, b);
                if v > best {
                    best = v;
                    arg = a;
                }
            }
            next[b] = best + emissions[i][b];
            back[i][b] = arg;
        }
        delta = next;
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for (b, d) in delta.iter().enumerate() {
        if *d > best {
            best = *d;
            last = b;
        }
    }
    let mut path = vec![last; n];
    for i in (1..n).rev() {
        path[i - 1] = back[i][path[i]];
    }
    Ok(path)
}

/// Training loss of a sentence: encode, project, and score the gold path.
pub fn sentence_nll(model: &ModelParams, inputs: &[Vec<f64>], tags: &[usize]) -> Result<f64> {
    let states = nn::encode_bidirectional(model, inputs)?;
    path_nll(&nn::emissions(model, &states), &model.transitions, tags)
}

/// Loss and exact gradient with respect to every model parameter.
pub fn sentence_nll_grad(model: &ModelParams, inputs: &[Vec<f64>], tags: &[usize]) -> Result<(f64, ModelParams)> {
    let enc = nn::encode(model, inputs)?;
    let em = nn::emissions(model, &enc.states);
    let (nll, d_em, d_tr) = path_nll_grad(&em, &model.transitions, tags)?;
    let mut grad = enc.backward(model, &d_em);
    grad.transitions = d_tr;
    Ok((nll, grad))
}

pub fn decode(model: &ModelParams, inputs: &[Vec<f64>]) -> Result<Vec<usize>> {
    let states = nn::encode_bidirectional(model, inputs)?;
    viterbi(&nn::emissions(model, &states), &model.transitions)
}
