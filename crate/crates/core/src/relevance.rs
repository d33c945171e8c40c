//! Context-word relevance tables `I(w_c, e)`.
//!
//! * `WF`: share of the windowed co-occurrence counts of an entity type that
//!   fall on a word, optionally weighted by inverse overall frequency.
//! * `SLL`: mean relative increase of the gold path NLL when the word's
//!   vector is replaced by a random one, over sentences that contain the
//!   entity type.
//! * `LRC`: relative change, under the same erasure, of the margin between
//!   the true tag's side score and the mean false-tag side score at an entity
//!   token, reading the left half of the hidden state when the context word
//!   is on the left and the right half otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::corpus::{context_windows, extract_spans, Sentence, TagKind, TagSet};
use crate::correlation::{normalized_kl, pearson};
use crate::embeddings::{random_replacement, EmbeddingTable};
use crate::error::{Error, Result};
use crate::likelihood;
use crate::nn::{self, side_score, HiddenStates, ModelParams, Side};
use crate::seed;

/// Denominators smaller than this in magnitude are replaced by `±EPSILON`.
pub const EPSILON: f64 = 1e-8;

/// Default window half-width: 5 words each side, 11 in total.
pub const DEFAULT_HALFWIDTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Wf,
    WfInv,
    Sll,
    Lrc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Wf => "wf",
            Method::WfInv => "wf_inv",
            Method::Sll => "sll",
            Method::Lrc => "lrc",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wf" => Ok(Method::Wf),
            "wf_inv" | "wf-inv" => Ok(Method::WfInv),
            "sll" => Ok(Method::Sll),
            "lrc" => Ok(Method::Lrc),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Dot,
    Kl,
    Pcc,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Dot, Measure::Kl, Measure::Pcc];
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Dot => "dot",
            Measure::Kl => "kl",
            Measure::Pcc => "pcc",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(Measure::Dot),
            "kl" => Ok(Measure::Kl),
            "pcc" => Ok(Measure::Pcc),
            other => Err(Error::invalid(format!("unknown measure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub score: f64,
    pub support: usize,
}

/// `(word, entity type) → score` for one method (and measure, for LRC).
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceTable {
    pub method: Method,
    pub measure: Option<Measure>,
    /// Erasure seed; `None` for the frequency methods.
    pub seed: Option<u64>,
    pub entries: BTreeMap<(String, String), Entry>,
}

impl RelevanceTable {
    pub fn new(method: Method, measure: Option<Measure>, seed: Option<u64>) -> Self {
        RelevanceTable {
            method,
            measure,
            seed,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, word: &str, etype: &str) -> Option<Entry> {
        self.entries.get(&(word.to_string(), etype.to_string())).copied()
    }

    pub fn score(&self, word: &str, etype: &str) -> Option<f64> {
        self.get(word, etype).map(|e| e.score)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entity types with at least one entry.
    pub fn entity_types(&self) -> BTreeSet<String> {
        self.entries.keys().map(|(_, e)| e.clone()).collect()
    }

    /// Words scored for `etype`, best first; ties by word.
    pub fn ranking(&self, etype: &str) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self
            .entries
            .iter()
            .filter(|((_, e), _)| e == etype)
            .map(|((w, _), en)| (w.clone(), en.score))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// 1-based rank of `word` for `etype`.
    pub fn rank_of(&self, word: &str, etype: &str) -> Option<usize> {
        self.ranking(etype).iter().position(|(w, _)| w == word).map(|p| p + 1)
    }

    fn measure_label(&self) -> String {
        self.measure.map(|m| m.to_string()).unwrap_or_default()
    }

    pub fn write_csv_records<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let method = self.method.to_string();
        let measure = self.measure_label();
        for ((word, etype), e) in &self.entries {
            w.write_record([
                method.as_str(),
                measure.as_str(),
                word.as_str(),
                etype.as_str(),
                &e.score.to_string(),
                &e.support.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 6] = ["method", "measure", "word", "entity_type", "score", "support"];

/// `method,measure,word,entity_type,score,support`; several tables may share
/// one file.
pub fn write_tables_csv<W: Write>(out: W, tables: &[&RelevanceTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for t in tables {
        t.write_csv_records(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_tables_csv`]; one table per `(method, measure)` in
/// order of first appearance.
pub fn read_tables_csv<R: Read>(input: R) -> Result<Vec<RelevanceTable>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected relevance header {headers:?}")));
    }
    let mut tables: Vec<RelevanceTable> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |m: String| Error::Parse { line, message: m };
        let method: Method = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let measure = if rec[1].is_empty() {
            None
        } else {
            Some(rec[1].parse::<Measure>().map_err(|e| bad(e.to_string()))?)
        };
        let score: f64 = rec[4].parse().map_err(|_| bad(format!("bad score {:?}", &rec[4])))?;
        let support: usize = rec[5].parse().map_err(|_| bad(format!("bad support {:?}", &rec[5])))?;
        let pos = match tables.iter().position(|t| t.method == method && t.measure == measure) {
            Some(p) => p,
            None => {
                tables.push(RelevanceTable::new(method, measure, None));
                tables.len() - 1
            }
        };
        tables[pos]
            .entries
            .insert((rec[2].to_string(), rec[3].to_string()), Entry { score, support });
    }
    Ok(tables)
}

/// Windowed co-occurrence counts `A(w, e)` and sentence counts `F(w, e)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountTable {
    pub a: BTreeMap<(String, usize), u64>,
    pub f: BTreeMap<(String, usize), u64>,
}

impl CountTable {
    pub fn build(sentences: &[Sentence], tagset: &TagSet, halfwidth: usize) -> Result<Self> {
        let mut table = CountTable::default();
        for s in sentences {
            let spans = extract_spans(s, tagset)?;
            for (j, e) in context_windows(s, &spans, halfwidth) {
                *table.a.entry((s.tokens[j].normalized.clone(), e)).or_default() += 1;
            }
            let present = s.entity_types_present(tagset)?;
            let words: BTreeSet<&str> = s
                .tokens
                .iter()
                .filter(|t| t.gold_tag == tagset.outside())
                .map(|t| t.normalized.as_str())
                .collect();
            for w in words {
                for &e in &present {
                    *table.f.entry((w.to_string(), e)).or_default() += 1;
                }
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WfOptions {
    pub halfwidth: usize,
    pub inverse: bool,
    pub k: f64,
}

impl Default for WfOptions {
    fn default() -> Self {
        WfOptions {
            halfwidth: DEFAULT_HALFWIDTH,
            inverse: false,
            k: 1.0,
        }
    }
}

/// Frequency relevance, plain or inverse-frequency weighted.
pub fn score_wf(sentences: &[Sentence], tagset: &TagSet, opts: WfOptions) -> Result<RelevanceTable> {
    if sentences.is_empty() {
        return Err(Error::invalid("frequency scoring needs a nonempty dataset"));
    }
    let counts = CountTable::build(sentences, tagset, opts.halfwidth)?;
    let ntypes = tagset.entity_types().len();
    let mut per_type = vec![0u64; ntypes];
    let mut per_word: BTreeMap<&str, u64> = BTreeMap::new();
    for ((w, e), c) in &counts.a {
        per_type[*e] += c;
        *per_word.entry(w.as_str()).or_default() += c;
    }
    let grand: u64 = per_type.iter().sum();
    for (e, total) in per_type.iter().enumerate() {
        if *total == 0 {
            log::warn!("entity type {} has no context counts; omitted", tagset.entity_type_name(e));
        }
    }
    let method = if opts.inverse { Method::WfInv } else { Method::Wf };
    let mut table = RelevanceTable::new(method, None, None);
    for ((w, e), c) in &counts.a {
        let mut score = *c as f64 / per_type[*e] as f64;
        if opts.inverse {
            score *= grand as f64 / (per_word[w.as_str()] as f64 + opts.k);
        }
        table.entries.insert(
            (w.clone(), tagset.entity_type_name(*e).to_string()),
            Entry {
                score,
                support: *c as usize,
            },
        );
    }
    Ok(table)
}

/// How the erased word's vector is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    /// One random vector for the whole scoring run.
    PerRun,
    /// A fresh vector per sentence, seeded by the sentence id.
    PerSentence,
    /// A fresh vector per word form.
    PerWord,
    /// The word's own vector: erasure becomes a no-op.
    Original,
}

impl FromStr for Replacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "run" | "per-run" => Ok(Replacement::PerRun),
            "sentence" | "per-sentence" => Ok(Replacement::PerSentence),
            "word" | "per-word" => Ok(Replacement::PerWord),
            "original" => Ok(Replacement::Original),
            other => Err(Error::invalid(format!("unknown replacement policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Erasure {
    pub seed: u64,
    pub policy: Replacement,
    /// SLL only: erase every `O` occurrence of the word, not just the first.
    pub all_occurrences: bool,
}

impl Erasure {
    pub fn new(seed: u64) -> Self {
        Erasure {
            seed,
            policy: Replacement::PerRun,
            all_occurrences: true,
        }
    }

    pub fn with_policy(mut self, policy: Replacement) -> Self {
        self.policy = policy;
        self
    }

    /// Vector that stands in for `word` in sentence `sentence_id`.
    pub fn vector(&self, dim: usize, sentence_id: usize, word: &str, original: &[f64]) -> Result<Vec<f64>> {
        let base = seed::derive(self.seed, seed::streams::REPLACEMENT);
        match self.policy {
            Replacement::PerRun => random_replacement(dim, base),
            Replacement::PerSentence => random_replacement(dim, seed::derive(base, sentence_id as u64)),
            Replacement::PerWord => random_replacement(dim, seed::derive(base, seed::hash_str(word))),
            Replacement::Original => Ok(original.to_vec()),
        }
    }
}

fn guard(x: f64) -> f64 {
    if x.abs() < EPSILON {
        if x < 0.0 {
            -EPSILON
        } else {
            EPSILON
        }
    } else {
        x
    }
}

/// Mean NLL-based erasure effect `(L2 − L1) / L1` of every distinct context
/// word of one sentence, in order of first appearance. Sentences with
/// `L1 = 0` yield nothing.
fn sll_sentence(
    model: &ModelParams,
    sentence: &Sentence,
    tagset: &TagSet,
    emb: &EmbeddingTable,
    erasure: &Erasure,
) -> Result<Vec<(String, f64)>> {
    let inputs = emb.sentence_vectors(sentence);
    let tags = sentence.gold_tags();
    let l1 = likelihood::sentence_nll(model, &inputs, &tags)?;
    if l1 == 0.0 {
        log::warn!("sentence {}: gold path NLL is exactly 0; skipped", sentence.id);
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (j, tok) in sentence.tokens.iter().enumerate() {
        if tok.gold_tag != tagset.outside() || !seen.insert(tok.normalized.as_str()) {
            continue;
        }
        let mut erased = inputs.clone();
        let positions: Vec<usize> = if erasure.all_occurrences {
            sentence
                .tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.gold_tag == tagset.outside() && t.normalized == tok.normalized)
                .map(|(p, _)| p)
                .collect()
        } else {
            vec![j]
        };
        for p in positions {
            erased[p] = erasure.vector(emb.dim(), sentence.id, &tok.normalized, &inputs[p])?;
        }
        let l2 = likelihood::sentence_nll(model, &erased, &tags)?;
        out.push((tok.normalized.clone(), (l2 - l1) / l1));
    }
    Ok(out)
}

/// Sentence-likelihood erasure relevance.
pub fn score_sll(
    model: &ModelParams,
    sentences: &[Sentence],
    tagset: &TagSet,
    emb: &EmbeddingTable,
    erasure: &Erasure,
) -> Result<RelevanceTable> {
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for s in sentences {
        let present = s.entity_types_present(tagset)?;
        if present.is_empty() {
            continue;
        }
        for (word, ratio) in sll_sentence(model, s, tagset, emb, erasure)? {
            for &e in &present {
                let slot = sums
                    .entry((word.clone(), tagset.entity_type_name(e).to_string()))
                    .or_insert((0.0, 0));
                slot.0 += ratio;
                slot.1 += 1;
            }
        }
    }
    let mut table = RelevanceTable::new(Method::Sll, None, Some(erasure.seed));
    for (key, (sum, n)) in sums {
        table.entries.insert(
            key,
            Entry {
                score: sum / n as f64,
                support: n,
            },
        );
    }
    Ok(table)
}

/// The hidden half read for a context word relative to an entity token.
pub fn lrc_side(context: usize, entity: usize) -> Side {
    if context < entity {
        Side::Left
    } else {
        Side::Right
    }
}

/// Similarity of tag `tag` with the `side` half of token `token`:
/// `p·h + bias` (dot), `−KL(softmax p ‖ softmax h)` (kl) or `ρ(p, h)` (pcc).
pub fn side_similarity(
    model: &ModelParams,
    states: &HiddenStates,
    token: usize,
    tag: usize,
    side: Side,
    measure: Measure,
) -> Result<f64> {
    #[cfg(test)]
    tests::SIDE_TRACE.with(|t| t.borrow_mut().push(side));
    match measure {
        Measure::Dot => Ok(side_score(model, states, token, tag, side)),
        Measure::Kl => Ok(-normalized_kl(model.side_weights(tag, side), states.side(token, side))?),
        Measure::Pcc => pearson(model.side_weights(tag, side), states.side(token, side)),
    }
}

/// Mean similarity of the false tags at the entity token, on the side
/// selected by the context position.
pub fn avg_sum(
    model: &ModelParams,
    states: &HiddenStates,
    context: usize,
    entity: usize,
    true_tag: usize,
    measure: Measure,
) -> Result<f64> {
    let t = model.num_tags();
    if t < 2 {
        return Err(Error::invalid("AvgSum needs at least two tags"));
    }
    if true_tag >= t {
        return Err(Error::UnknownTag(true_tag));
    }
    if context == entity {
        return Err(Error::invalid("context and entity token coincide"));
    }
    let side = lrc_side(context, entity);
    let mut sum = 0.0;
    for f in (0..t).filter(|&f| f != true_tag) {
        sum += side_similarity(model, states, entity, f, side, measure)?;
    }
    Ok(sum / (t - 1) as f64)
}

/// `(s_t − AvgSum) / AvgSum` with a guarded denominator.
fn lrc_margin(
    model: &ModelParams,
    states: &HiddenStates,
    context: usize,
    entity: usize,
    true_tag: usize,
    measure: Measure,
) -> Result<f64> {
    let avg = avg_sum(model, states, context, entity, true_tag, measure)?;
    let own = side_similarity(model, states, entity, true_tag, lrc_side(context, entity), measure)?;
    Ok((own - avg) / guard(avg))
}

fn lrc_from_states(
    model: &ModelParams,
    intact: &HiddenStates,
    erased: &HiddenStates,
    context: usize,
    entity: usize,
    true_tag: usize,
    measure: Measure,
) -> Result<f64> {
    let l1 = lrc_margin(model, intact, context, entity, true_tag, measure)?;
    let l2 = lrc_margin(model, erased, context, entity, true_tag, measure)?;
    Ok((l1 - l2) / guard(l2))
}

fn check_instance(sentence: &Sentence, tagset: &TagSet, context: usize, entity: usize) -> Result<()> {
    let n = sentence.len();
    if context >= n || entity >= n {
        return Err(Error::invalid(format!("token index out of range for sentence {}", sentence.id)));
    }
    if context == entity {
        return Err(Error::invalid("context and entity token coincide"));
    }
    if sentence.tokens[context].gold_tag != tagset.outside() {
        return Err(Error::invalid("context token must carry the O tag"));
    }
    if tagset.kind(sentence.tokens[entity].gold_tag)? == TagKind::O {
        return Err(Error::invalid("entity token must carry an entity tag"));
    }
    Ok(())
}

/// Erasure score of one (context token, entity token) instance.
#[allow(clippy::too_many_arguments)]
pub fn lrc_instance_score(
    model: &ModelParams,
    sentence: &Sentence,
    tagset: &TagSet,
    context: usize,
    entity: usize,
    emb: &EmbeddingTable,
    erasure: &Erasure,
    measure: Measure,
) -> Result<f64> {
    check_instance(sentence, tagset, context, entity)?;
    let inputs = emb.sentence_vectors(sentence);
    let intact = nn::encode_bidirectional(model, &inputs)?;
    let erased = encode_erased(model, sentence, &inputs, context, emb, erasure)?;
    lrc_from_states(
        model,
        &intact,
        &erased,
        context,
        entity,
        sentence.tokens[entity].gold_tag,
        measure,
    )
}

fn encode_erased(
    model: &ModelParams,
    sentence: &Sentence,
    inputs: &[Vec<f64>],
    context: usize,
    emb: &EmbeddingTable,
    erasure: &Erasure,
) -> Result<HiddenStates> {
    let mut erased = inputs.to_vec();
    erased[context] = erasure.vector(
        emb.dim(),
        sentence.id,
        &sentence.tokens[context].normalized,
        &inputs[context],
    )?;
    nn::encode_bidirectional(model, &erased)
}

/// One scored instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LrcInstance {
    pub context: usize,
    pub entity: usize,
    pub etype: usize,
    pub score: f64,
}

/// Every (context, entity) instance of one sentence. Instances whose
/// similarity is undefined (constant vectors under PCC) are skipped.
pub fn lrc_sentence_instances(
    model: &ModelParams,
    sentence: &Sentence,
    tagset: &TagSet,
    emb: &EmbeddingTable,
    erasure: &Erasure,
    measure: Measure,
) -> Result<Vec<LrcInstance>> {
    let mut entities = Vec::new();
    for (i, t) in sentence.tokens.iter().enumerate() {
        if let Some(e) = tagset.etype(t.gold_tag)? {
            entities.push((i, e, t.gold_tag));
        }
    }
    if entities.is_empty() {
        return Ok(Vec::new());
    }
    let inputs = emb.sentence_vectors(sentence);
    let intact = nn::encode_bidirectional(model, &inputs)?;
    let mut out = Vec::new();
    for (c, tok) in sentence.tokens.iter().enumerate() {
        if tok.gold_tag != tagset.outside() {
            continue;
        }
        let erased = encode_erased(model, sentence, &inputs, c, emb, erasure)?;
        for &(ent, etype, tag) in &entities {
            match lrc_from_states(model, &intact, &erased, c, ent, tag, measure) {
                Ok(score) => out.push(LrcInstance {
                    context: c,
                    entity: ent,
                    etype,
                    score,
                }),
                Err(Error::Degenerate(msg)) => {
                    log::warn!("sentence {} instance ({c}, {ent}) skipped: {msg}", sentence.id);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Left/right-context erasure relevance, averaged over all instances.
pub fn score_lrc(
    model: &ModelParams,
    sentences: &[Sentence],
    tagset: &TagSet,
    emb: &EmbeddingTable,
    erasure: &Erasure,
    measure: Measure,
) -> Result<RelevanceTable> {
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for s in sentences {
        for inst in lrc_sentence_instances(model, s, tagset, emb, erasure, measure)? {
            let key = (
                s.tokens[inst.context].normalized.clone(),
                tagset.entity_type_name(inst.etype).to_string(),
            );
            let slot = sums.entry(key).or_insert((0.0, 0));
            slot.0 += inst.score;
            slot.1 += 1;
        }
    }
    let mut table = RelevanceTable::new(Method::Lrc, Some(measure), Some(erasure.seed));
    for (key, (sum, n)) in sums {
        table.entries.insert(
            key,
            Entry {
                score: sum / n as f64,
                support: n,
            },
        );
    }
    Ok(table)
}

/// Per-word, per-entity-type scores restricted to one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGrid {
    /// Distinct context words in order of first appearance.
    pub words: Vec<String>,
    pub entity_types: Vec<String>,
    /// `cells[word][etype]`; `None` when the method gives no value.
    pub cells: Vec<Vec<Option<Entry>>>,
}

impl SentenceGrid {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["word", "entity_type", "score", "support"])?;
        for (word, row) in self.words.iter().zip(&self.cells) {
            for (etype, cell) in self.entity_types.iter().zip(row) {
                if let Some(e) = cell {
                    w.write_record([word.as_str(), etype.as_str(), &e.score.to_string(), &e.support.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// SLL gives one value per context word for every type present in the
/// sentence; LRC averages the sentence's instances per type, with zero
/// support for types that do not occur.
pub fn sentence_report(
    model: &ModelParams,
    sentence: &Sentence,
    tagset: &TagSet,
    method: Method,
    measure: Measure,
    emb: &EmbeddingTable,
    erasure: &Erasure,
) -> Result<SentenceGrid> {
    let mut words: Vec<String> = Vec::new();
    for t in &sentence.tokens {
        if t.gold_tag == tagset.outside() && !words.contains(&t.normalized) {
            words.push(t.normalized.clone());
        }
    }
    match method {
        Method::Sll => {
            let present: Vec<usize> = sentence.entity_types_present(tagset)?.into_iter().collect();
            let scores: BTreeMap<String, f64> = sll_sentence(model, sentence, tagset, emb, erasure)?.into_iter().collect();
            let cells = words
                .iter()
                .map(|w| {
                    present
                        .iter()
                        .map(|_| scores.get(w).map(|&score| Entry { score, support: 1 }))
                        .collect()
                })
                .collect();
            Ok(SentenceGrid {
                words,
                entity_types: present.iter().map(|&e| tagset.entity_type_name(e).to_string()).collect(),
                cells,
            })
        }
        Method::Lrc => {
            let k = tagset.entity_types().len();
            let mut acc = vec![vec![(0.0, 0usize); k]; words.len()];
            for inst in lrc_sentence_instances(model, sentence, tagset, emb, erasure, measure)? {
                let wi = words
                    .iter()
                    .position(|w| *w == sentence.tokens[inst.context].normalized)
                    .expect("context word collected above");
                acc[wi][inst.etype].0 += inst.score;
                acc[wi][inst.etype].1 += 1;
            }
            let cells = acc
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|(sum, n)| {
                            Some(Entry {
                                score: if n == 0 { 0.0 } else { sum / n as f64 },
                                support: n,
                            })
                        })
                        .collect()
                })
                .collect();
            Ok(SentenceGrid {
                words,
                entity_types: tagset.entity_types().to_vec(),
                cells,
            })
        }
        other => Err(Error::invalid(format!("sentence reports support sll and lrc, not {other}"))),
    }
}
