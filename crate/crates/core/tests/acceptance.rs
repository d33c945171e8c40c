//! Acceptance suite. One PASS / FAIL line per criterion; exits non-zero on
//! any failure that is not listed in `KNOWN_FAILURES`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ctxrel::analysis::{positional_probe, probe_sentence, real_sentence_probe, Filler, ProbeResult};
use ctxrel::corpus::{parse_conll, ParseOptions, Sentence, Token};
use ctxrel::correlation::{correlate_instance, kl_divergence, normalize_distribution, pearson};
use ctxrel::embeddings::EmbeddingTable;
use ctxrel::likelihood::{log_partition, path_nll, sentence_nll, sentence_nll_grad, sequence_score, viterbi};
use ctxrel::linalg::{dot, Mat};
use ctxrel::nn::{emissions, encode_bidirectional, split_emission, CellKind, ModelParams, Side};
use ctxrel::relevance::{score_lrc, score_sll, score_wf, Erasure, Measure, Replacement, WfOptions};
use ctxrel::seed;
use ctxrel::synthetic::{gen_synthetic, SyntheticData, SyntheticSpec};
use ctxrel::trainer::{evaluate, train, TrainConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the sub-check that fails.
const KNOWN_FAILURES: &[(u32, &str)] = &[(7, "7b")];

struct Outcome {
    pass: bool,
    detail: String,
    /// Failing sub-checks, e.g. "7b".
    failed_parts: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into(), failed_parts: Vec::new() }
    }

    fn skipped(detail: impl Into<String>) -> Option<Self> {
        println!("SKIP   {}", detail.into());
        None
    }
}

fn rng(k: u64) -> ChaCha8Rng {
    seed::rng(seed::derive(0xacce, k))
}

fn c1_gradients() -> Option<Outcome> {
    const STEP: f64 = 1e-4;
    let mut worst: f64 = 0.0;
    for kind in CellKind::ALL {
        for k in 0..20u64 {
            let mut r = rng(100 + k);
            let model = ModelParams::init(kind, 5, 4, 3, 500 + k);
            let n = r.gen_range(1..=6);
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let tags: Vec<usize> = (0..n).map(|_| r.gen_range(0..3)).collect();
            let (_, grad) = sentence_nll_grad(&model, &xs, &tags).unwrap();
            let analytic: Vec<f64> = grad.tensors().iter().flat_map(|(_, t)| t.to_vec()).collect();
            for (flat, a) in analytic.iter().enumerate() {
                let at = |delta: f64| {
                    let mut m = model.clone();
                    let mut off = 0;
                    for (_, t) in m.tensors_mut() {
                        if flat < off + t.len() {
                            t[flat - off] += delta;
                            break;
                        }
                        off += t.len();
                    }
                    sentence_nll(&m, &xs, &tags).unwrap()
                };
                let num = (at(STEP) - at(-STEP)) / (2.0 * STEP);
                worst = worst.max((a - num).abs() / (a.abs() + num.abs()).max(1e-6));
            }
        }
    }
    Some(Outcome::new(worst < 1e-4, format!("max relative error {worst:.2e} over 60 instances (< 1e-4)")))
}

fn all_paths(t: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..t).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn c2_likelihood() -> Option<Outcome> {
    let mut worst: f64 = 0.0;
    let mut viterbi_ok = 0;
    for k in 0..100u64 {
        let mut r = rng(200 + k);
        let t = r.gen_range(1..=4);
        let n = r.gen_range(1..=5);
        let em: Vec<Vec<f64>> = (0..n).map(|_| (0..t).map(|_| r.gen_range(-3.0..3.0)).collect()).collect();
        let tr = Mat::from_vec(t + 1, t, (0..(t + 1) * t).map(|_| r.gen_range(-2.0..2.0)).collect());
        // Path score written out directly: start row 0, then row prev + 1.
        let score = |p: &[usize]| -> f64 {
            let mut s = tr.get(0, p[0]) + em[0][p[0]];
            for i in 1..n {
                s += tr.get(p[i - 1] + 1, p[i]) + em[i][p[i]];
            }
            s
        };
        let paths = all_paths(t, n);
        let scores: Vec<f64> = paths.iter().map(|p| score(p)).collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        worst = worst.max((log_partition(&em, &tr).unwrap() - log_z).abs());
        let gold = &paths[r.gen_range(0..paths.len())];
        worst = worst.max((path_nll(&em, &tr, gold).unwrap() - (log_z - score(gold))).abs());
        worst = worst.max((sequence_score(&em, &tr, gold).unwrap() - score(gold)).abs());
        let best = paths
            .iter()
            .zip(&scores)
            .fold((None, f64::NEG_INFINITY), |acc, (p, s)| if *s > acc.1 { (Some(p), *s) } else { acc })
            .0
            .unwrap();
        if viterbi(&em, &tr).unwrap() == *best {
            viterbi_ok += 1;
        }
    }
    Some(Outcome::new(
        worst < 1e-8 && viterbi_ok == 100,
        format!("max |error| {worst:.2e} (< 1e-8), viterbi matched {viterbi_ok}/100"),
    ))
}

type Fixture = (String, Vec<(Vec<String>, Vec<(usize, usize, &'static str)>)>);

/// Random CoNLL text together with the spans it was built from.
fn wf_fixture(k: u64) -> Fixture {
    const WORDS: [&str; 8] = ["in", "the", "of", "said", "mr", "to", "at", "club"];
    const TYPES: [&str; 3] = ["PER", "LOC", "ORG"];
    let mut r = rng(300 + k);
    let mut text = String::new();
    let mut sents = Vec::new();
    for _ in 0..r.gen_range(1..=6) {
        let len = r.gen_range(1..=15);
        let mut words = Vec::new();
        let mut tags = Vec::new();
        let mut spans = Vec::new();
        while words.len() < len {
            if r.gen_bool(0.3) {
                let etype = TYPES[r.gen_range(0..3)];
                let w = r.gen_range(1..=3);
                spans.push((words.len(), words.len() + w - 1, etype));
                for j in 0..w {
                    words.push(format!("name{}", r.gen_range(0..5)));
                    tags.push(format!("{}-{etype}", if j == 0 { "B" } else { "I" }));
                }
            } else {
                words.push(WORDS[r.gen_range(0..WORDS.len())].to_string());
                tags.push("O".into());
            }
        }
        for (w, t) in words.iter().zip(&tags) {
            writeln!(text, "{w} {t}").unwrap();
        }
        text.push('\n');
        sents.push((words, spans));
    }
    (text, sents)
}

fn c3_wf() -> Option<Outcome> {
    let mut problems = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..25u64 {
        let (text, sents) = wf_fixture(k);
        let corpus = parse_conll(&text, &ParseOptions::default(), None).unwrap();
        let h = 1 + (k as usize % 5);
        // Recount: an O word pairs with a span when it lies within h positions
        // outside the span's ends.
        let mut a: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (words, spans) in &sents {
            let is_entity = |j: usize| spans.iter().any(|&(s, e, _)| s <= j && j <= e);
            for &(s, e, etype) in spans {
                for (j, w) in words.iter().enumerate() {
                    let near = (j < s && s - j <= h) || (j > e && j - e <= h);
                    if near && !is_entity(j) {
                        *a.entry((w.clone(), etype.to_string())).or_default() += 1;
                    }
                }
            }
        }
        let mut per_type: BTreeMap<&str, u64> = BTreeMap::new();
        let mut per_word: BTreeMap<&str, u64> = BTreeMap::new();
        for ((w, e), c) in &a {
            *per_type.entry(e).or_default() += c;
            *per_word.entry(w).or_default() += c;
        }
        let grand: u64 = per_type.values().sum();
        for inverse in [false, true] {
            let kk = if k % 2 == 0 { 1.0 } else { 0.5 };
            let table = score_wf(&corpus.sentences, &corpus.tagset, WfOptions { halfwidth: h, inverse, k: kk }).unwrap();
            if table.len() != a.len() {
                problems.push(format!("fixture {k}: {} entries, recount has {}", table.len(), a.len()));
                continue;
            }
            for ((w, e), c) in &a {
                let Some(entry) = table.get(w, e) else {
                    problems.push(format!("fixture {k}: missing ({w}, {e})"));
                    continue;
                };
                if entry.support as u64 != *c {
                    problems.push(format!("fixture {k}: count of ({w}, {e}) {} != {c}", entry.support));
                }
                let mut expect = *c as f64 / per_type[e.as_str()] as f64;
                if inverse {
                    expect *= grand as f64 / (per_word[w.as_str()] as f64 + kk);
                }
                worst = worst.max((entry.score - expect).abs());
            }
        }
    }
    let john = parse_conll("John B-PER\nlives O\nin O\nParis B-LOC\n. O\n", &ParseOptions::default(), None).unwrap();
    let plain = score_wf(&john.sentences, &john.tagset, WfOptions::default()).unwrap();
    let inv = score_wf(&john.sentences, &john.tagset, WfOptions { inverse: true, ..WfOptions::default() }).unwrap();
    let (p, i) = (plain.score("in", "PER").unwrap(), inv.score("in", "PER").unwrap());
    let hand = (p - 1.0 / 3.0).abs() < 1e-12 && (i - 2.0 / 3.0).abs() < 1e-12;
    if !hand {
        problems.push(format!("hand case gave {p} and {i}"));
    }
    let detail = format!(
        "25 fixtures x 2 variants, max score error {worst:.1e} (< 1e-12), I(in, PER) = {p:.6} / {i:.6}{}",
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    Some(Outcome::new(problems.is_empty() && worst < 1e-12, detail))
}

fn c4_noop() -> Option<Outcome> {
    let spec = SyntheticSpec { sentences: 120, ..SyntheticSpec::default() };
    let data = gen_synthetic(&spec, 4).unwrap();
    let mut sents = data.train.clone();
    sents.extend(data.test.iter().cloned().map(|mut s| {
        s.id += 10_000;
        s
    }));
    let er = Erasure::new(4).with_policy(Replacement::Original);
    let mut nonzero = 0;
    let mut entries = 0;
    for (i, kind) in CellKind::ALL.into_iter().enumerate() {
        let model = ModelParams::init(kind, spec.dim, 8, data.tagset.len(), 40 + i as u64);
        let mut tables = vec![score_sll(&model, &sents, &data.tagset, &data.embeddings, &er).unwrap()];
        for m in Measure::ALL {
            tables.push(score_lrc(&model, &sents, &data.tagset, &data.embeddings, &er, m).unwrap());
        }
        for t in &tables {
            entries += t.len();
            nonzero += t.entries.values().filter(|e| e.score != 0.0).count();
        }
    }
    Some(Outcome::new(
        nonzero == 0 && entries > 0,
        format!("{nonzero} non-zero among {entries} SLL / LRC-dot/kl/pcc entries, 3 cells"),
    ))
}

fn c5_decomposition() -> Option<Outcome> {
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let mut r = rng(500 + k);
        let kind = CellKind::ALL[k as usize % 3];
        let (d, h, t) = (r.gen_range(1..8), r.gen_range(1..8), r.gen_range(2..6));
        let model = ModelParams::init(kind, d, h, t, 700 + k);
        let n = r.gen_range(1..10);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let st = encode_bidirectional(&model, &xs).unwrap();
        let em = emissions(&model, &st);
        for i in 0..n {
            let joined: Vec<f64> = st.left[i].iter().chain(&st.right[i]).copied().collect();
            for tag in 0..t {
                let full = dot(model.projection.row(tag), &joined) + model.bias[tag];
                let (l, rr) = split_emission(&model, &st, i, tag);
                worst = worst.max((l + rr - full).abs()).max((em[i][tag] - full).abs());
            }
        }
    }
    Some(Outcome::new(worst < 1e-12, format!("max |left + right - emission| {worst:.1e} over 100 models (< 1e-12)")))
}

fn c6_correlation() -> Option<Outcome> {
    let mut r = rng(600);
    let mut min_kl = f64::INFINITY;
    let mut self_kl: f64 = 0.0;
    let mut sum_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.gen_range(2..12);
        let raw_a: Vec<f64> = (0..n).map(|_| r.gen_range(-4.0..4.0)).collect();
        let raw_b: Vec<f64> = (0..n).map(|_| r.gen_range(-4.0..4.0)).collect();
        let (a, b) = (normalize_distribution(&raw_a), normalize_distribution(&raw_b));
        sum_err = sum_err.max((a.iter().sum::<f64>() - 1.0).abs()).max((b.iter().sum::<f64>() - 1.0).abs());
        min_kl = min_kl.min(kl_divergence(&a, &b).unwrap());
        self_kl = self_kl.max(kl_divergence(&a, &a).unwrap().abs());
    }
    let mut affine: f64 = 0.0;
    for _ in 0..200 {
        let n = r.gen_range(3..20);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let (s, c) = (r.gen_range(0.1..10.0), r.gen_range(-10.0..10.0));
        let x2: Vec<f64> = x.iter().map(|v| s * v + c).collect();
        affine = affine.max((pearson(&x2, &y).unwrap() - pearson(&x, &y).unwrap()).abs());
    }
    let hand = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    let pass = min_kl >= 0.0 && self_kl == 0.0 && affine < 1e-12 && (hand - 0.5).abs() < 1e-12 && sum_err < 1e-12;
    Some(Outcome::new(
        pass,
        format!(
            "min KL {min_kl:.2e} (>= 0), max |KL(A,A)| {self_kl:.1e}, affine drift {affine:.1e}, \
             pcc([1,2,3],[1,3,2]) = {hand}, softmax sum error {sum_err:.1e}"
        ),
    ))
}

fn synthetic_config(cell: CellKind) -> TrainConfig {
    TrainConfig { hidden: 16, epochs: 10, lr: 0.05, seed: 1, cell, ..TrainConfig::default() }
}

fn c7_synthetic(data: &SyntheticData, lstm: &ModelParams) -> Option<Outcome> {
    let ts = &data.tagset;
    let emb = &data.embeddings;
    let acc = evaluate(lstm, &data.test, ts, emb).unwrap().token_accuracy;
    let mut all: Vec<Sentence> = data.train.clone();
    for (offset, part) in [(10_000, &data.dev), (20_000, &data.test)] {
        all.extend(part.iter().cloned().map(|mut s| {
            s.id += offset;
            s
        }));
    }
    let mut parts = Vec::new();
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool, text: String| {
        println!("       {name} {} {text}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(name.to_string());
        }
        parts.push(format!("{name}={}", if ok { "ok" } else { "fail" }));
    };
    check("7acc", acc >= 0.95, format!("test token accuracy {:.2}% (>= 95%)", 100.0 * acc));

    let wf = score_wf(&all, ts, WfOptions::default()).unwrap();
    let wfi = score_wf(&all, ts, WfOptions { inverse: true, ..WfOptions::default() }).unwrap();
    let (r1, r2) = (wf.rank_of("ttl", "PER"), wfi.rank_of("ttl", "PER"));
    let n = wf.ranking("PER").len();
    check("7a", r1 == Some(1) && r2 == Some(1), format!("ttl rank for PER: wf {r1:?}, wf_inv {r2:?} of {n}"));

    let er = Erasure::new(1);
    let lrc = score_lrc(lstm, &all, ts, emb, &er, Measure::Dot).unwrap();
    let rank = lrc.rank_of("ttl", "PER");
    let top: Vec<String> = lrc.ranking("PER").iter().take(3).map(|(w, v)| format!("{w} {v:.3}")).collect();
    let others: Vec<String> = [Measure::Kl, Measure::Pcc]
        .iter()
        .map(|&m| {
            let t = score_lrc(lstm, &all, ts, emb, &er, m).unwrap();
            format!("{m} {:?}", t.rank_of("ttl", "PER"))
        })
        .collect();
    check(
        "7b",
        rank.is_some_and(|r| r <= 3),
        format!(
            "ttl rank for PER under lrc-dot: {rank:?} of {} (<= 3); score {:.3}; top {}; for reference {}",
            lrc.ranking("PER").len(),
            lrc.score("ttl", "PER").unwrap_or(f64::NAN),
            top.join(", "),
            others.join(", ")
        ),
    );

    let (mut hits_l, mut hits_r, mut total) = (0, 0, 0);
    for s in &all {
        let st = encode_bidirectional(lstm, &emb.sentence_vectors(s)).unwrap();
        for (i, t) in s.tokens.iter().enumerate() {
            if t.gold_tag == ts.outside() {
                continue;
            }
            total += 1;
            hits_l += usize::from(correlate_instance(lstm, &st, i, Side::Left).unwrap()[0].tag == t.gold_tag);
            hits_r += usize::from(correlate_instance(lstm, &st, i, Side::Right).unwrap()[0].tag == t.gold_tag);
        }
    }
    let frac = hits_l as f64 / total as f64;
    check(
        "7c",
        frac >= 0.9,
        format!(
            "true tag has the top left-side dot product at {hits_l}/{total} entity tokens ({:.1}%, >= 90%); right side {hits_r}/{total}",
            100.0 * frac
        ),
    );

    let per = ts.entity_type_id("PER").unwrap();
    let lacking: Vec<Sentence> = all
        .iter()
        .filter(|s| !s.entity_types_present(ts).unwrap().contains(&per))
        .cloned()
        .collect();
    let probe = real_sentence_probe(&[("lstm".into(), lstm)], &lacking, ts, "ttl", "PER", emb, &er, Measure::Dot).unwrap();
    let zeros = probe.rows.iter().filter(|r| r.scores[0] == 0.0).count();
    check(
        "7d",
        !probe.rows.is_empty() && zeros == probe.rows.len(),
        format!("{zeros}/{} sentences with ttl and no PER entity score exactly 0", probe.rows.len()),
    );
    let mut out = Outcome::new(failed.is_empty(), parts.join(" "));
    out.failed_parts = failed;
    Some(out)
}

fn probe_csv(models: &[(String, ModelParams)], data: &SyntheticData) -> (Vec<u8>, ProbeResult) {
    let refs: Vec<(String, &ModelParams)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let er = Erasure::new(1);
    let res = positional_probe(&refs, &data.tagset, "ttl", "josef", "PER", 10, Filler::FixedOov, &data.embeddings, &er, Measure::Dot)
        .unwrap();
    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    (buf, res)
}

fn train_three(data: &SyntheticData) -> Vec<(String, ModelParams)> {
    CellKind::ALL
        .iter()
        .map(|&c| {
            let out = train(&data.train, None, &data.tagset, &data.embeddings, &synthetic_config(c)).unwrap();
            (c.to_string(), out.model)
        })
        .collect()
}

fn c8_probe(data: &SyntheticData, first: &[(String, ModelParams)]) -> Option<Outcome> {
    let tag = data.tagset.id("B-PER").unwrap();
    let oov = data.embeddings.oov_row();
    let mut shape_ok = true;
    for n in 1..=10 {
        let fillers = (1..n)
            .map(|_| {
                let mut t = Token::new("R", 0);
                t.vocab_index = Some(oov);
                t
            })
            .collect();
        let s = probe_sentence("ttl", "josef", tag, fillers);
        let mut gold = vec![0; n + 2];
        gold[n] = tag;
        shape_ok &= s.len() == n + 2 && s.gold_tags() == gold;
    }
    let (a, res) = probe_csv(first, data);
    let second = train_three(data);
    let (b, _) = probe_csv(&second, data);
    let complete = res.models.len() == 3 && res.scores.iter().all(|s| s.len() == 10 && s.iter().all(|v| v.is_finite()));
    Some(Outcome::new(
        shape_ok && complete && a == b,
        format!(
            "shapes {}, {} models x {} distances, rerun byte-identical: {}",
            if shape_ok { "ok" } else { "wrong" },
            res.models.len(),
            res.distances.len(),
            a == b
        ),
    ))
}

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["ctxrel"];
    argv.extend_from_slice(args);
    ctxrel::cli::run(argv)
}

fn pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let syn = root.join("syn");
    let run = root.join("lstm");
    let hm = root.join("hm");
    assert_eq!(cli(&["gen-synthetic", "--seed", "9", "--sentences", "200", "--out", &s(&syn)]), 0);
    let code = cli(&[
        "train", "--train", &s(&syn.join("train.conll")), "--dev", &s(&syn.join("dev.conll")), "--emb",
        &s(&syn.join("vectors.txt")), "--cell", "lstm", "--hidden", "8", "--epochs", "3", "--seed", "9", "--out", &s(&run),
    ]);
    assert_eq!(code, 0);
    let code = cli(&[
        "score-lrc", "--model", &s(&run.join("model.ckpt")), "--data", &s(&syn.join("test.conll")), "--emb",
        &s(&syn.join("vectors.txt")), "--measure", "dot,kl,pcc", "--out", &s(&run),
    ]);
    assert_eq!(code, 0);
    let table = format!("lstm={}", run.join("lrc.csv").display());
    let code = cli(&["heatmap", "--tables", &table, "--fix", "model=lstm,entity=PER", "--rows", "word", "--cols", "measure", "--out", &s(&hm)]);
    assert_eq!(code, 0);
    let mut files = Vec::new();
    for p in [
        syn.join("train.conll"),
        syn.join("vectors.txt"),
        run.join("model.ckpt"),
        run.join("trace.csv"),
        run.join("lrc.csv"),
        hm.join("heatmap.csv"),
        hm.join("heatmap.svg"),
    ] {
        files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
    }
    files
}

fn c9_determinism() -> Option<Outcome> {
    let dir = tempfile::tempdir().unwrap();
    let a = pipeline(&dir.path().join("a"));
    let b = pipeline(&dir.path().join("b"));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    Some(Outcome::new(
        differing.is_empty(),
        format!(
            "{} files compared across two runs; differing: {}",
            a.len(),
            if differing.is_empty() { "none".into() } else { differing.join(", ") }
        ),
    ))
}

/// Needs CTXREL_CONLL_TRAIN, CTXREL_CONLL_DEV and CTXREL_EMB (50-dimensional).
fn c10_real_data() -> Option<Outcome> {
    let vars: Vec<Option<String>> = ["CTXREL_CONLL_TRAIN", "CTXREL_CONLL_DEV", "CTXREL_EMB"]
        .iter()
        .map(|v| std::env::var(v).ok().filter(|p| Path::new(p).exists()))
        .collect();
    let [Some(train_path), Some(dev_path), Some(emb_path)] = vars.as_slice() else {
        return Outcome::skipped("10 real-data smoke: set CTXREL_CONLL_TRAIN, CTXREL_CONLL_DEV and CTXREL_EMB to run");
    };
    let opts = ParseOptions::default();
    let train_set = parse_conll(&fs::read_to_string(train_path).unwrap(), &opts, None).unwrap();
    let dev = parse_conll(&fs::read_to_string(dev_path).unwrap(), &opts, Some(&train_set.tagset)).unwrap();
    let emb = EmbeddingTable::from_text(&fs::read_to_string(emb_path).unwrap(), seed::derive(1, seed::streams::OOV)).unwrap();
    let subset: Vec<Sentence> = train_set.sentences.into_iter().take(3000).collect();
    let cfg = TrainConfig { epochs: 5, hidden: 50, ..TrainConfig::default() };
    let out = train(&subset, None, &train_set.tagset, &emb, &cfg).unwrap();
    let f1 = evaluate(&out.model, &dev.sentences, &train_set.tagset, &emb).unwrap().overall.f1;
    Some(Outcome::new(f1 >= 55.0, format!("dev span F1 {f1:.2} (>= 55), {} train sentences, d={}", subset.len(), emb.dim())))
}

fn main() {
    let start = Instant::now();
    let spec = SyntheticSpec::default();
    let data = gen_synthetic(&spec, 1).unwrap();
    let mut models: Option<Vec<(String, ModelParams)>> = None;

    let mut results: Vec<(u32, &str, Option<Outcome>, f64)> = Vec::new();
    let names: [(u32, &str); 10] = [
        (1, "gradient correctness"),
        (2, "likelihood oracle"),
        (3, "frequency relevance oracle"),
        (4, "erasure no-op"),
        (5, "decomposition identity"),
        (6, "correlation measures"),
        (7, "synthetic end-to-end"),
        (8, "positional probe structure"),
        (9, "pipeline determinism"),
        (10, "real-data smoke"),
    ];
    for (id, name) in names {
        let t0 = Instant::now();
        if id == 7 {
            println!("       criterion 7 parts:");
        }
        let outcome = match id {
            1 => c1_gradients(),
            2 => c2_likelihood(),
            3 => c3_wf(),
            4 => c4_noop(),
            5 => c5_decomposition(),
            6 => c6_correlation(),
            7 => {
                let trained = models.get_or_insert_with(|| train_three(&data));
                let lstm = &trained.iter().find(|(n, _)| n == "lstm").unwrap().1;
                c7_synthetic(&data, lstm)
            }
            8 => {
                let trained = models.get_or_insert_with(|| train_three(&data));
                c8_probe(&data, trained)
            }
            9 => c9_determinism(),
            10 => c10_real_data(),
            _ => unreachable!(),
        };
        let secs = t0.elapsed().as_secs_f64();
        if let Some(o) = &outcome {
            println!("{}   {id:>2} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        }
        results.push((id, name, outcome, secs));
    }

    let mut passed = 0;
    let mut known = Vec::new();
    let mut unexpected = Vec::new();
    let mut skipped = 0;
    for (id, _, outcome, _) in &results {
        match outcome {
            None => skipped += 1,
            Some(o) if o.pass => {
                passed += 1;
                if KNOWN_FAILURES.iter().any(|(k, _)| k == id) {
                    println!("XPASS  {id}: listed as a known failure but passed");
                }
            }
            Some(o) => {
                let expected: Vec<&str> = KNOWN_FAILURES.iter().filter(|(k, _)| k == id).map(|(_, p)| *p).collect();
                let covered = !expected.is_empty()
                    && (o.failed_parts.is_empty() || o.failed_parts.iter().all(|p| expected.contains(&p.as_str())));
                if covered {
                    known.push(format!("{id} ({})", o.failed_parts.join(", ")));
                } else {
                    unexpected.push(id.to_string());
                }
            }
        }
    }
    println!(
        "acceptance: {passed} passed, {} failed, {skipped} skipped; known failures: {}; unexpected: {} [{:.1}s]",
        known.len() + unexpected.len(),
        if known.is_empty() { "none".into() } else { known.join(", ") },
        if unexpected.is_empty() { "none".into() } else { unexpected.join(", ") },
        start.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
