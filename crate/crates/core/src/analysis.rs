//! Heatmaps over relevance tables, positional probes and error reports.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::corpus::{Sentence, TagKind, TagSet, Token};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::likelihood;
use crate::nn::ModelParams;
use crate::relevance::{lrc_instance_score, Erasure, Measure, RelevanceTable};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Word,
    Model,
    Entity,
    Method,
    Measure,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::Word, Axis::Model, Axis::Entity, Axis::Method, Axis::Measure];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Word => "word",
            Axis::Model => "model",
            Axis::Entity => "entity",
            Axis::Method => "method",
            Axis::Measure => "measure",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "word" => Ok(Axis::Word),
            "model" => Ok(Axis::Model),
            "entity" => Ok(Axis::Entity),
            "method" => Ok(Axis::Method),
            "measure" => Ok(Axis::Measure),
            other => Err(Error::invalid(format!("unknown axis {other:?}"))),
        }
    }
}

/// Parse `axis=value,axis=value`.
pub fn parse_bindings(s: &str) -> Result<Vec<(Axis, String)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("binding {p:?} is not axis=value")))?;
            Ok((k.parse()?, v.trim().to_string()))
        })
        .collect()
}

/// A relevance table tagged with the model it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub model: String,
    pub table: RelevanceTable,
}

/// Coordinates of every cell of one table entry.
fn coords(t: &LabeledTable, word: &str, etype: &str) -> [String; 5] {
    [
        word.to_string(),
        t.model.clone(),
        etype.to_string(),
        t.table.method.to_string(),
        t.table.measure.map(|m| m.to_string()).unwrap_or_default(),
    ]
}

fn axis_index(a: Axis) -> usize {
    Axis::ALL.iter().position(|x| *x == a).expect("listed")
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub row_axis: Axis,
    pub col_axis: Axis,
    pub fixed: Vec<(Axis, String)>,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `cells[row][col]`; `None` when no table supplies the value.
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Lay out scores with `rows` × `cols` while holding the `fixed` axes.
/// Labels are collected from every table, so a value that no table holds
/// shows up as a missing cell rather than vanishing.
pub fn build_heatmap(tables: &[LabeledTable], fixed: &[(Axis, String)], rows: Axis, cols: Axis) -> Result<HeatmapGrid> {
    if rows == cols {
        return Err(Error::invalid(format!("rows and columns both use axis {rows}")));
    }
    for (a, _) in fixed {
        if *a == rows || *a == cols {
            return Err(Error::invalid(format!("axis {a} is both fixed and laid out")));
        }
    }
    let mut seen: BTreeSet<Axis> = BTreeSet::new();
    for (a, _) in fixed {
        if !seen.insert(*a) {
            return Err(Error::invalid(format!("axis {a} fixed twice")));
        }
    }
    let (ri, ci) = (axis_index(rows), axis_index(cols));
    let mut row_labels: Vec<String> = Vec::new();
    let mut col_labels: Vec<String> = Vec::new();
    for t in tables {
        for (word, etype) in t.table.entries.keys() {
            let c = coords(t, word, etype);
            if !row_labels.contains(&c[ri]) {
                row_labels.push(c[ri].clone());
            }
            if !col_labels.contains(&c[ci]) {
                col_labels.push(c[ci].clone());
            }
        }
    }
    let mut cells: Vec<Vec<Option<f64>>> = vec![vec![None; col_labels.len()]; row_labels.len()];
    let mut origin: Vec<Vec<Option<[String; 5]>>> = vec![vec![None; col_labels.len()]; row_labels.len()];
    for t in tables {
        for ((word, etype), entry) in &t.table.entries {
            let c = coords(t, word, etype);
            if fixed.iter().any(|(a, v)| c[axis_index(*a)] != *v) {
                continue;
            }
            let r = row_labels.iter().position(|l| *l == c[ri]).expect("collected");
            let k = col_labels.iter().position(|l| *l == c[ci]).expect("collected");
            if let Some(prev) = &origin[r][k] {
                let free: Vec<String> = Axis::ALL
                    .iter()
                    .filter(|a| **a != rows && **a != cols && !fixed.iter().any(|(f, _)| f == *a))
                    .map(|a| a.to_string())
                    .collect();
                return Err(Error::invalid(format!(
                    "cell ({}, {}) is ambiguous between {prev:?} and {c:?}; fix one of: {}",
                    c[ri],
                    c[ci],
                    free.join(", ")
                )));
            }
            origin[r][k] = Some(c);
            cells[r][k] = Some(entry.score);
        }
    }
    Ok(HeatmapGrid {
        row_axis: rows,
        col_axis: cols,
        fixed: fixed.to_vec(),
        rows: row_labels,
        cols: col_labels,
        cells,
    })
}

impl HeatmapGrid {
    fn corner(&self) -> String {
        format!("{}\\{}", self.row_axis, self.col_axis)
    }

    /// Column labels in the first row, row labels in the first column,
    /// missing cells empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.corner()];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.rows.iter().zip(&self.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| Error::invalid("empty heatmap file"))??;
        let corner = header.get(0).unwrap_or_default();
        let (ra, ca) = corner
            .split_once('\\')
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("corner cell {corner:?} is not rows\\cols"),
            })?;
        let cols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            if rec.len() != cols.len() + 1 {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("{} fields, expected {}", rec.len(), cols.len() + 1),
                });
            }
            rows.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse().map(Some).map_err(|_| Error::Parse {
                            line: i + 2,
                            message: format!("bad value {f:?}"),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(row);
        }
        Ok(HeatmapGrid {
            row_axis: ra.parse()?,
            col_axis: ca.parse()?,
            fixed: Vec::new(),
            rows,
            cols,
            cells,
        })
    }

    /// Standalone SVG: one rect per cell, five colour steps from the grid
    /// minimum (blue) to its maximum (red), value printed in the cell.
    pub fn to_svg(&self) -> String {
        const PALETTE: [&str; 5] = ["#2166ac", "#92c5de", "#f7f7f7", "#f4a582", "#b2182b"];
        const CELL_W: usize = 84;
        const CELL_H: usize = 28;
        let label_w = 12 + 8 * self.rows.iter().map(|r| r.chars().count()).max().unwrap_or(4).max(4);
        let top = 64;
        let width = label_w + CELL_W * self.cols.len() + 20;
        let height = top + CELL_H * self.rows.len() + 56;
        let values: Vec<f64> = self.cells.iter().flatten().flatten().copied().collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bin = |v: f64| -> usize {
            if hi <= lo {
                return 2;
            }
            (((v - lo) / (hi - lo) * 5.0).floor() as usize).min(4)
        };
        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        s.push_str(&format!("<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"));
        let title = if self.fixed.is_empty() {
            format!("{} by {}", self.row_axis, self.col_axis)
        } else {
            let f: Vec<String> = self.fixed.iter().map(|(a, v)| format!("{a}={v}")).collect();
            format!("{} by {} ({})", self.row_axis, self.col_axis, f.join(", "))
        };
        s.push_str(&format!("<text x=\"10\" y=\"20\" font-size=\"14\">{}</text>\n", xml_escape(&title)));
        for (j, c) in self.cols.iter().enumerate() {
            let x = label_w + j * CELL_W + CELL_W / 2;
            s.push_str(&format!(
                "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                top - 8,
                xml_escape(c)
            ));
        }
        for (i, (label, row)) in self.rows.iter().zip(&self.cells).enumerate() {
            let y = top + i * CELL_H;
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                label_w - 6,
                y + CELL_H / 2 + 4,
                xml_escape(label)
            ));
            for (j, cell) in row.iter().enumerate() {
                let x = label_w + j * CELL_W;
                let (fill, text) = match cell {
                    Some(v) => (PALETTE[bin(*v)], format!("{v:.3}")),
                    None => ("#d9d9d9", "n/a".to_string()),
                };
                s.push_str(&format!(
                    "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" height=\"{CELL_H}\" fill=\"{fill}\" stroke=\"white\"/>\n"
                ));
                s.push_str(&format!(
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{text}</text>\n",
                    x + CELL_W / 2,
                    y + CELL_H / 2 + 4
                ));
            }
        }
        let ly = top + CELL_H * self.rows.len() + 16;
        for (k, colour) in PALETTE.iter().enumerate() {
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{ly}\" width=\"24\" height=\"12\" fill=\"{colour}\"/>\n",
                label_w + 24 * k
            ));
        }
        if hi >= lo {
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\">{lo:.3} .. {hi:.3}</text>\n",
                label_w + 24 * 5 + 8,
                ly + 11
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// How the `R` slots of a probe sentence are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filler {
    /// Every slot reads the embedding table's OOV row.
    #[default]
    FixedOov,
    /// Each slot draws an in-vocabulary word; the score is averaged over
    /// `draws` independent fillings.
    Random { draws: usize },
}

impl FromStr for Filler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oov" | "fixed" => Ok(Filler::FixedOov),
            "random" => Ok(Filler::Random { draws: 10 }),
            other => Err(Error::invalid(format!("unknown filler policy {other:?}"))),
        }
    }
}

/// `[context, fillers…, entity, "."]`; the entity token carries
/// `entity_tag`, every other token `O`.
pub fn probe_sentence(context: &str, entity: &str, entity_tag: usize, fillers: Vec<Token>) -> Sentence {
    let mut tokens = vec![Token::new(context, 0)];
    tokens.extend(fillers);
    tokens.push(Token::new(entity, entity_tag));
    tokens.push(Token::new(".", 0));
    Sentence { id: 0, tokens }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub context: String,
    pub entity: String,
    pub entity_type: String,
    pub models: Vec<String>,
    pub distances: Vec<usize>,
    /// `scores[model][k]` belongs to `distances[k]`.
    pub scores: Vec<Vec<f64>>,
}

impl ProbeResult {
    /// Each model's curve divided by its largest magnitude.
    pub fn normalized(&self) -> ProbeResult {
        let mut out = self.clone();
        for row in &mut out.scores {
            let m = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                row.iter_mut().for_each(|v| *v /= m);
            }
        }
        out
    }

    /// `distance,<model>,<model>,…`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["distance".to_string()];
        header.extend(self.models.iter().cloned());
        w.write_record(&header)?;
        for (k, d) in self.distances.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.scores.iter().map(|s| s[k].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// LRC score of `context` with respect to `entity` when the two are
/// `1..=max_distance` positions apart.
#[allow(clippy::too_many_arguments)]
pub fn positional_probe(
    models: &[(String, &ModelParams)],
    tagset: &TagSet,
    context: &str,
    entity: &str,
    entity_type: &str,
    max_distance: usize,
    filler: Filler,
    emb: &EmbeddingTable,
    erasure: &Erasure,
    measure: Measure,
) -> Result<ProbeResult> {
    if max_distance == 0 {
        return Err(Error::invalid("maximum distance must be at least 1"));
    }
    let etype = tagset
        .entity_type_id(entity_type)
        .ok_or_else(|| Error::UnknownTagName(format!("B-{entity_type}")))?;
    let tag = tagset.begin_tag(etype)?;
    for (name, m) in models {
        if m.num_tags() != tagset.len() {
            return Err(Error::invalid(format!("model {name} does not match the tag set")));
        }
    }
    let exclude = [crate::corpus::normalize_token(context), crate::corpus::normalize_token(entity)];
    let pool: Vec<usize> = (0..emb.vocab_len())
        .filter(|&i| !exclude.contains(&emb.words()[i]))
        .collect();
    let base = seed::derive(erasure.seed, seed::streams::FILLER);
    let distances: Vec<usize> = (1..=max_distance).collect();
    let mut scores = vec![Vec::with_capacity(max_distance); models.len()];
    for &n in &distances {
        let fillings: Vec<Vec<Token>> = match filler {
            Filler::FixedOov => vec![(1..n).map(|_| oov_token(emb.oov_row())).collect()],
            Filler::Random { draws } => {
                if pool.is_empty() {
                    return Err(Error::invalid("no vocabulary words available as fillers"));
                }
                (0..draws.max(1))
                    .map(|k| {
                        let mut rng = seed::rng(seed::derive(seed::derive(base, n as u64), k as u64));
                        (1..n)
                            .map(|_| {
                                use rand::Rng;
                                let i = pool[rng.gen_range(0..pool.len())];
                                let mut t = Token::new(&emb.words()[i], 0);
                                t.vocab_index = Some(i);
                                t
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        for (slot, (_, model)) in scores.iter_mut().zip(models) {
            let mut total = 0.0;
            for f in &fillings {
                let s = probe_sentence(context, entity, tag, f.clone());
                total += lrc_instance_score(model, &s, tagset, 0, n, emb, erasure, measure)?;
            }
            slot.push(total / fillings.len() as f64);
        }
    }
    Ok(ProbeResult {
        context: context.to_string(),
        entity: entity.to_string(),
        entity_type: entity_type.to_string(),
        models: models.iter().map(|(n, _)| n.clone()).collect(),
        distances,
        scores,
    })
}

fn oov_token(row: usize) -> Token {
    let mut t = Token::new("R", 0);
    t.vocab_index = Some(row);
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceProbeRow {
    pub sentence: usize,
    pub text: String,
    /// One score per model.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceProbe {
    pub word: String,
    pub entity_type: String,
    pub models: Vec<String>,
    pub rows: Vec<SentenceProbeRow>,
}

impl SentenceProbe {
    /// `sentence,text,<model>,…`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sentence".to_string(), "text".to_string()];
        header.extend(self.models.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.sentence.to_string(), r.text.clone()];
            rec.extend(r.scores.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-sentence LRC score of `word` for `entity_type`: the mean over every
/// (occurrence, entity token of that type) pair, or 0 when the sentence has
/// no such entity. Sentences without the word are left out.
#[allow(clippy::too_many_arguments)]
pub fn real_sentence_probe(
    models: &[(String, &ModelParams)],
    sentences: &[Sentence],
    tagset: &TagSet,
    word: &str,
    entity_type: &str,
    emb: &EmbeddingTable,
    erasure: &Erasure,
    measure: Measure,
) -> Result<SentenceProbe> {
    let etype = tagset
        .entity_type_id(entity_type)
        .ok_or_else(|| Error::invalid(format!("unknown entity type {entity_type:?}")))?;
    let word = crate::corpus::normalize_token(word);
    let mut rows = Vec::new();
    for s in sentences {
        let contexts: Vec<usize> = (0..s.len())
            .filter(|&i| s.tokens[i].gold_tag == tagset.outside() && s.tokens[i].normalized == word)
            .collect();
        if contexts.is_empty() {
            continue;
        }
        let mut entities = Vec::new();
        for (i, t) in s.tokens.iter().enumerate() {
            if tagset.etype(t.gold_tag)? == Some(etype) {
                entities.push(i);
            }
        }
        let mut scores = Vec::with_capacity(models.len());
        for (_, m) in models {
            let (mut sum, mut n) = (0.0, 0usize);
            for &c in &contexts {
                for &e in &entities {
                    match lrc_instance_score(m, s, tagset, c, e, emb, erasure, measure) {
                        Ok(v) => {
                            sum += v;
                            n += 1;
                        }
                        Err(Error::Degenerate(msg)) => log::warn!("sentence {}: {msg}", s.id),
                        Err(e) => return Err(e),
                    }
                }
            }
            scores.push(if n == 0 { 0.0 } else { sum / n as f64 });
        }
        rows.push(SentenceProbeRow {
            sentence: s.id,
            text: s.tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
            scores,
        });
    }
    Ok(SentenceProbe {
        word,
        entity_type: entity_type.to_string(),
        models: models.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suspect {
    pub word: String,
    /// Corpus-level score for the gold entity type (0 when absent).
    pub gold_score: f64,
    /// Best corpus-level score among the other entity types.
    pub false_score: Option<f64>,
    pub false_type: Option<String>,
    /// In-sentence LRC score for the gold type.
    pub instance_score: Option<f64>,
}

impl Suspect {
    fn gap(&self) -> f64 {
        self.false_score.map_or(f64::NEG_INFINITY, |f| f - self.gold_score)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCase {
    pub sentence: usize,
    pub token: usize,
    pub word: String,
    pub gold_tag: String,
    pub predicted_tag: String,
    pub suspects: Vec<Suspect>,
}

/// Decode every sentence and, for each mis-tagged entity token, list the
/// context words that favour another entity type in `table` or whose
/// in-sentence score for the gold type is negative.
pub fn error_report(
    model: &ModelParams,
    sentences: &[Sentence],
    tagset: &TagSet,
    table: &RelevanceTable,
    emb: &EmbeddingTable,
    erasure: &Erasure,
    measure: Measure,
) -> Result<Vec<ErrorCase>> {
    let types = tagset.entity_types();
    let score = |w: &str, e: &str| table.score(w, e).unwrap_or(0.0);
    let mut out = Vec::new();
    for s in sentences {
        let predicted = likelihood::decode(model, &emb.sentence_vectors(s))?;
        for (i, tok) in s.tokens.iter().enumerate() {
            if tagset.kind(tok.gold_tag)? == TagKind::O || predicted[i] == tok.gold_tag {
                continue;
            }
            let gold_type = tagset.etype(tok.gold_tag)?.expect("entity tag");
            let gold_name = &types[gold_type];
            let mut seen = BTreeSet::new();
            let mut suspects = Vec::new();
            for (c, ctx) in s.tokens.iter().enumerate() {
                if ctx.gold_tag != tagset.outside() || !seen.insert(ctx.normalized.as_str()) {
                    continue;
                }
                let w = ctx.normalized.as_str();
                let gold_score = score(w, gold_name);
                let mut best: Option<(f64, &str)> = None;
                for (e, name) in types.iter().enumerate() {
                    if e == gold_type {
                        continue;
                    }
                    let v = score(w, name);
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, name));
                    }
                }
                let instance = match lrc_instance_score(model, s, tagset, c, i, emb, erasure, measure) {
                    Ok(v) => Some(v),
                    Err(Error::Degenerate(_)) => None,
                    Err(e) => return Err(e),
                };
                let favours_other = best.is_some_and(|(b, _)| b > gold_score);
                let hurts = instance.is_some_and(|v| v < 0.0);
                if favours_other || hurts {
                    suspects.push(Suspect {
                        word: w.to_string(),
                        gold_score,
                        false_score: best.map(|b| b.0),
                        false_type: best.map(|b| b.1.to_string()),
                        instance_score: instance,
                    });
                }
            }
            suspects.sort_by(|a, b| b.gap().total_cmp(&a.gap()).then_with(|| a.word.cmp(&b.word)));
            out.push(ErrorCase {
                sentence: s.id,
                token: i,
                word: tok.surface.clone(),
                gold_tag: tagset.name(tok.gold_tag)?.to_string(),
                predicted_tag: tagset.name(predicted[i])?.to_string(),
                suspects,
            });
        }
    }
    Ok(out)
}

/// One row per suspect; cases without suspects get a row with empty
/// suspect fields.
pub fn write_error_csv<W: Write>(out: W, cases: &[ErrorCase]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sentence",
        "token",
        "word",
        "gold",
        "predicted",
        "suspect",
        "gold_score",
        "false_score",
        "false_type",
        "instance_score",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cases {
        let head = [
            c.sentence.to_string(),
            c.token.to_string(),
            c.word.clone(),
            c.gold_tag.clone(),
            c.predicted_tag.clone(),
        ];
        if c.suspects.is_empty() {
            let mut rec = head.to_vec();
            rec.extend(std::iter::repeat_n(String::new(), 5));
            w.write_record(&rec)?;
        }
        for s in &c.suspects {
            let mut rec = head.to_vec();
            rec.extend([
                s.word.clone(),
                s.gold_score.to_string(),
                opt(s.false_score),
                s.false_type.clone().unwrap_or_default(),
                opt(s.instance_score),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
