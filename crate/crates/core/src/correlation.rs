//! Similarity between a tag's weight half `p_{t,K}` and a hidden half `h_K`:
//! dot product, KL divergence of their softmax-normalized forms, and Pearson
//! correlation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::nn::{side_score, HiddenStates, ModelParams, Side};

const SUM_TOLERANCE: f64 = 1e-9;

/// `Σ a_i ln(a_i / b_i)` with `0 · ln(0 / b) = 0`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
            context: "kl divergence operands",
        });
    }
    for (name, v) in [("A", a), ("B", b)] {
        if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!("{name} has a negative or non-finite entry")));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("{name} sums to {s}, not 1")));
        }
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        if *x == 0.0 {
            continue;
        }
        if *y == 0.0 {
            return Err(Error::Degenerate("infinite divergence: B is zero where A is positive".into()));
        }
        total += x * (x / y).ln();
    }
    Ok(total)
}

/// Pearson correlation with population moments.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
            context: "pearson operands",
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("pearson of a constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Softmax with the max shift.
pub fn normalize_distribution(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// `D_KL(softmax(weights) ‖ softmax(hidden))`.
pub fn normalized_kl(weights: &[f64], hidden: &[f64]) -> Result<f64> {
    kl_divergence(&normalize_distribution(weights), &normalize_distribution(hidden))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTriple {
    pub tag: usize,
    /// `p_{t,K}·h_K + bias_t`
    pub dot: f64,
    pub kl: f64,
    /// Missing when either vector is constant.
    pub pcc: Option<f64>,
}

/// Per-tag similarity between `h_K` of one token and every `p_{t,K}`,
/// sorted by dot product, highest first (ties by tag id).
pub fn correlate_instance(model: &ModelParams, states: &HiddenStates, token: usize, side: Side) -> Result<Vec<CorrelationTriple>> {
    if token >= states.len() {
        return Err(Error::invalid(format!("token {token} out of range")));
    }
    let h = states.side(token, side);
    let mut out = (0..model.num_tags())
        .map(|t| {
            let p = model.side_weights(t, side);
            Ok(CorrelationTriple {
                tag: t,
                dot: side_score(model, states, token, t, side),
                kl: normalized_kl(p, h)?,
                pcc: pearson(p, h).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.dot.total_cmp(&a.dot).then(a.tag.cmp(&b.tag)));
    Ok(out)
}

/// Raw dot product without the bias, for callers that want it.
pub fn plain_dot(model: &ModelParams, states: &HiddenStates, token: usize, tag: usize, side: Side) -> f64 {
    dot(model.side_weights(tag, side), states.side(token, side))
}

/// `tag,dot,kl,pcc` with an empty `pcc` cell when missing.
pub fn write_correlation_csv<W: Write>(out: W, rows: &[CorrelationTriple], tag_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tag", "dot", "kl", "pcc"])?;
    for r in rows {
        let name = tag_names.get(r.tag).map_or_else(|| r.tag.to_string(), Clone::clone);
        w.write_record([
            name,
            r.dot.to_string(),
            r.kl.to_string(),
            r.pcc.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::nn::CellKind;
    use proptest::prelude::*;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        // 0.5 ln 2 + 0.5 ln(2/3)
        let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((v - 0.143_841_036_225_890_3).abs() < 1e-12, "{v}");
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(kl_divergence(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.5];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let yn: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y2).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &yn).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(normalize_distribution(&[2.0; 4]), vec![0.25; 4]);
        let p = normalize_distribution(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_hidden_state_degenerates_cleanly() {
        let mut m = crate::nn::ModelParams::init(CellKind::Rnn, 2, 3, 3, 4);
        m.bias = vec![0.1, 0.2, 0.3];
        let st = HiddenStates {
            left: vec![vec![0.0; 3]],
            right: vec![vec![0.0; 3]],
        };
        let rows = correlate_instance(&m, &st, 0, Side::Left).unwrap();
        let dots: Vec<f64> = rows.iter().map(|r| r.dot).collect();
        assert_eq!(dots, vec![0.3, 0.2, 0.1]);
        for r in &rows {
            assert!(r.pcc.is_none());
            let uniform = vec![1.0 / 3.0; 3];
            let expected = kl_divergence(&normalize_distribution(m.side_weights(r.tag, Side::Left)), &uniform).unwrap();
            assert_eq!(r.kl, expected);
        }
    }

    #[test]
    fn two_dim_scalar_oracle() {
        let mut m = crate::nn::ModelParams::zeros(CellKind::Rnn, 1, 2, 2);
        m.projection = Mat::from_rows(&[vec![1.0, 2.0, 0.0, 0.0], vec![-1.0, 0.5, 0.0, 0.0]]);
        m.bias = vec![0.25, -0.5];
        let st = HiddenStates {
            left: vec![vec![0.3, 0.9]],
            right: vec![vec![0.0, 0.0]],
        };
        let rows = correlate_instance(&m, &st, 0, Side::Left).unwrap();
        // tag 0: 0.3 + 1.8 + 0.25 = 2.35 ; tag 1: -0.3 + 0.45 - 0.5 = -0.35
        assert_eq!(rows[0].tag, 0);
        assert!((rows[0].dot - 2.35).abs() < 1e-15);
        assert!((rows[1].dot + 0.35).abs() < 1e-15);
        // softmax of two values (a, b) is (1/(1+e^{b-a}), …).
        let sm = |a: f64, b: f64| {
            let p = 1.0 / (1.0 + (b - a).exp());
            (p, 1.0 - p)
        };
        let (a0, a1) = sm(1.0, 2.0);
        let (b0, b1) = sm(0.3, 0.9);
        let kl = a0 * (a0 / b0).ln() + a1 * (a1 / b1).ln();
        assert!((rows[0].kl - kl).abs() < 1e-12);
        // Two points are always perfectly (anti-)correlated.
        assert_eq!(rows[0].pcc, Some(1.0));
        assert_eq!(rows[1].pcc, Some(1.0));
    }

    fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, len).prop_map(|v| normalize_distribution(&v))
    }

    proptest! {
        #[test]
        fn gibbs_inequality((a, b) in (2usize..12).prop_flat_map(|n| (distribution(n), distribution(n)))) {
            prop_assert!(kl_divergence(&a, &b).unwrap() >= -1e-12);
            prop_assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn pearson_affine_invariance(
            x in prop::collection::vec(-10.0f64..10.0, 3..20),
            seed_y in prop::collection::vec(-10.0f64..10.0, 20),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let y = &seed_y[..x.len()];
            prop_assume!(pearson(&x, y).is_ok());
            let r = pearson(&x, y).unwrap();
            let xt: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            prop_assert!((pearson(&xt, y).unwrap() - r).abs() < 1e-9);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((pearson(&neg, y).unwrap() + r).abs() < 1e-9);
        }

        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in prop::collection::vec(-30.0f64..30.0, 1..30),
            c in -100.0f64..100.0,
        ) {
            let p = normalize_distribution(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            for (a, b) in p.iter().zip(normalize_distribution(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
