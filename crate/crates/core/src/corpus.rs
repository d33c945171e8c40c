//! CoNLL column files, BIO tag sets, entity spans and context windows.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Lowercase and fold each maximal run of ASCII digits to a single `0`.
pub fn normalize_token(surface: &str) -> String {
    normalize_token_with(surface, true)
}

pub fn normalize_token_with(surface: &str, fold_digits: bool) -> String {
    let mut out = String::with_capacity(surface.len());
    let mut in_digits = false;
    for ch in surface.chars() {
        if fold_digits && ch.is_ascii_digit() {
            if !in_digits {
                out.push('0');
            }
            in_digits = true;
            continue;
        }
        in_digits = false;
        out.extend(ch.to_lowercase());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagScheme {
    /// `B-X` only separates adjacent phrases of the same type.
    Iob1,
    /// Every phrase starts with `B-X`.
    Bio2,
}

impl FromStr for TagScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iob1" | "iob" => Ok(TagScheme::Iob1),
            "bio2" | "bio" | "iob2" => Ok(TagScheme::Bio2),
            other => Err(Error::invalid(format!("unknown tag scheme {other:?}"))),
        }
    }
}

impl fmt::Display for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagScheme::Iob1 => "iob1",
            TagScheme::Bio2 => "bio2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    B,
    I,
    O,
}

/// Tag inventory. Tag id 0 is always `O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    tags: Vec<String>,
    entity_types: Vec<String>,
    scheme: TagScheme,
}

pub const OUTSIDE: &str = "O";

fn split_tag(name: &str) -> Result<(TagKind, Option<&str>)> {
    if name == OUTSIDE {
        return Ok((TagKind::O, None));
    }
    let (prefix, etype) = name
        .split_once('-')
        .ok_or_else(|| Error::UnknownTagName(name.to_string()))?;
    if etype.is_empty() {
        return Err(Error::UnknownTagName(name.to_string()));
    }
    match prefix {
        "B" => Ok((TagKind::B, Some(etype))),
        "I" => Ok((TagKind::I, Some(etype))),
        _ => Err(Error::UnknownTagName(name.to_string())),
    }
}

impl TagSet {
    /// Build a tag set from tag names. `O` is added if missing and always
    /// receives id 0; the remaining tags are ordered by entity type, `B`
    /// before `I`.
    pub fn from_names<S: AsRef<str>>(names: &[S], scheme: TagScheme) -> Result<Self> {
        let mut seen: BTreeSet<(String, u8)> = BTreeSet::new();
        for n in names {
            match split_tag(n.as_ref())? {
                (TagKind::O, _) => {}
                (TagKind::B, Some(e)) => {
                    seen.insert((e.to_string(), 0));
                }
                (TagKind::I, Some(e)) => {
                    seen.insert((e.to_string(), 1));
                }
                _ => unreachable!(),
            }
        }
        let mut tags = vec![OUTSIDE.to_string()];
        let mut entity_types: Vec<String> = Vec::new();
        for (etype, kind) in &seen {
            if entity_types.last() != Some(etype) {
                entity_types.push(etype.clone());
            }
            tags.push(format!("{}-{}", if *kind == 0 { "B" } else { "I" }, etype));
        }
        Ok(TagSet {
            tags,
            entity_types,
            scheme,
        })
    }

    /// Full BIO inventory over `entity_types`: `2·|E| + 1` tags.
    pub fn bio<S: AsRef<str>>(entity_types: &[S], scheme: TagScheme) -> Self {
        let names: Vec<String> = entity_types
            .iter()
            .flat_map(|e| [format!("B-{}", e.as_ref()), format!("I-{}", e.as_ref())])
            .collect();
        TagSet::from_names(&names, scheme).expect("generated names are well formed")
    }

    /// Add the missing `B-`/`I-` partner of every entity type.
    pub fn completed(&self) -> Self {
        TagSet::bio(&self.entity_types, self.scheme)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn scheme(&self) -> TagScheme {
        self.scheme
    }

    pub fn with_scheme(mut self, scheme: TagScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn names(&self) -> &[String] {
        &self.tags
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn outside(&self) -> usize {
        0
    }

    pub fn name(&self, tag: usize) -> Result<&str> {
        self.tags
            .get(tag)
            .map(String::as_str)
            .ok_or(Error::UnknownTag(tag))
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.tags
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownTagName(name.to_string()))
    }

    pub fn kind(&self, tag: usize) -> Result<TagKind> {
        Ok(split_tag(self.name(tag)?)?.0)
    }

    /// Entity type index of a non-`O` tag.
    pub fn etype(&self, tag: usize) -> Result<Option<usize>> {
        match split_tag(self.name(tag)?)? {
            (_, None) => Ok(None),
            (_, Some(e)) => Ok(self.entity_type_id(e)),
        }
    }

    pub fn entity_type_id(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|e| e == name)
    }

    pub fn entity_type_name(&self, etype: usize) -> &str {
        &self.entity_types[etype]
    }

    /// Tag that opens a one-word phrase of `etype`: `B-X`, or `I-X` when the
    /// inventory has no `B-X` (IOB1 data where every phrase starts with `I`).
    pub fn begin_tag(&self, etype: usize) -> Result<usize> {
        let e = self
            .entity_types
            .get(etype)
            .ok_or_else(|| Error::invalid(format!("entity type index {etype}")))?;
        self.id(&format!("B-{e}"))
            .or_else(|_| self.id(&format!("I-{e}")))
    }

    pub fn inside_tag(&self, etype: usize) -> Result<usize> {
        let e = self
            .entity_types
            .get(etype)
            .ok_or_else(|| Error::invalid(format!("entity type index {etype}")))?;
        self.id(&format!("I-{e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    /// Row in the embedding table. `None` means "look up `normalized`".
    pub vocab_index: Option<usize>,
    pub gold_tag: usize,
}

impl Token {
    pub fn new(surface: &str, gold_tag: usize) -> Self {
        Token {
            surface: surface.to_string(),
            normalized: normalize_token(surface),
            vocab_index: None,
            gold_tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub id: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gold_tags(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.gold_tag).collect()
    }

    /// Entity types carried by at least one gold tag.
    pub fn entity_types_present(&self, tagset: &TagSet) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for t in &self.tokens {
            if let Some(e) = tagset.etype(t.gold_tag)? {
                out.insert(e);
            }
        }
        Ok(out)
    }

    /// Under BIO2 an `I-X` must follow `B-X` or `I-X`.
    pub fn is_consistent(&self, tagset: &TagSet) -> bool {
        if tagset.scheme() != TagScheme::Bio2 {
            return true;
        }
        let mut prev: Option<usize> = None;
        for t in &self.tokens {
            let (Ok(kind), Ok(etype)) = (tagset.kind(t.gold_tag), tagset.etype(t.gold_tag)) else {
                return false;
            };
            if kind == TagKind::I && prev != etype {
                return false;
            }
            prev = etype;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub tagset: TagSet,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Tag column; `None` selects the last column of each line.
    pub column: Option<usize>,
    pub scheme: TagScheme,
    pub fold_digits: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            column: None,
            scheme: TagScheme::Bio2,
            fold_digits: true,
        }
    }
}

/// Parse whitespace-separated CoNLL columns. The first column is the token.
///
/// When `hint` is given every tag must belong to it; otherwise the tag set is
/// inferred from the observed tags (and completed to a full `B`/`I` inventory
/// under BIO2). `-DOCSTART-` lines are treated as sentence separators.
pub fn parse_conll(text: &str, opts: &ParseOptions, hint: Option<&TagSet>) -> Result<Corpus> {
    let mut raw: Vec<Vec<(String, String)>> = Vec::new();
    let mut current: Vec<(String, String)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || fields[0] == "-DOCSTART-" {
            if !current.is_empty() {
                raw.push(std::mem::take(&mut current));
            }
            continue;
        }
        let col = opts.column.unwrap_or(fields.len() - 1);
        if col == 0 || col >= fields.len() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!(
                    "tag column {col} not available ({} columns, column 0 is the token)",
                    fields.len()
                ),
            });
        }
        current.push((fields[0].to_string(), fields[col].to_string()));
    }
    if !current.is_empty() {
        raw.push(current);
    }

    let tagset = match hint {
        Some(t) => t.clone(),
        None => {
            let names: BTreeSet<&str> = raw.iter().flatten().map(|(_, t)| t.as_str()).collect();
            let names: Vec<&str> = names.into_iter().collect();
            let ts = TagSet::from_names(&names, opts.scheme)?;
            match opts.scheme {
                TagScheme::Bio2 => ts.completed(),
                TagScheme::Iob1 => ts,
            }
        }
    };

    let mut sentences = Vec::with_capacity(raw.len());
    for (id, rows) in raw.into_iter().enumerate() {
        let tokens = rows
            .into_iter()
            .map(|(surface, tag)| {
                Ok(Token {
                    normalized: normalize_token_with(&surface, opts.fold_digits),
                    gold_tag: tagset.id(&tag)?,
                    vocab_index: None,
                    surface,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sentence = Sentence { id, tokens };
        if !sentence.is_consistent(&tagset) {
            log::warn!("sentence {id} is not BIO2-consistent");
        }
        sentences.push(sentence);
    }
    Ok(Corpus { sentences, tagset })
}

/// Two-column `token tag` serialization, readable by [`parse_conll`].
pub fn write_conll(sentences: &[Sentence], tagset: &TagSet) -> Result<String> {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in &s.tokens {
            out.push_str(&t.surface);
            out.push(' ');
            out.push_str(tagset.name(t.gold_tag)?);
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntitySpan {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub etype: usize,
}

/// Maximal entity phrases of a tag sequence.
///
/// `B-X` always opens a phrase. `I-X` continues a phrase of type `X` and
/// otherwise opens one, which is the IOB1 reading and the lenient BIO2
/// reading of a stray `I-X`.
pub fn extract_spans_from_tags(tags: &[usize], tagset: &TagSet) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    let mut open: Option<EntitySpan> = None;
    for (i, &tag) in tags.iter().enumerate() {
        let kind = tagset.kind(tag)?;
        let etype = tagset.etype(tag)?;
        match (kind, etype) {
            (TagKind::O, _) | (_, None) => {
                spans.extend(open.take());
            }
            (TagKind::I, Some(e)) if open.is_some_and(|s| s.etype == e) => {
                if let Some(s) = open.as_mut() {
                    s.end = i;
                }
            }
            (_, Some(e)) => {
                spans.extend(open.take());
                open = Some(EntitySpan {
                    start: i,
                    end: i,
                    etype: e,
                });
            }
        }
    }
    spans.extend(open);
    Ok(spans)
}

pub fn extract_spans(sentence: &Sentence, tagset: &TagSet) -> Result<Vec<EntitySpan>> {
    extract_spans_from_tags(&sentence.gold_tags(), tagset)
}

/// Tag sequence that encodes `spans` under the tag set's scheme.
pub fn tags_from_spans(len: usize, spans: &[EntitySpan], tagset: &TagSet) -> Result<Vec<usize>> {
    let mut tags = vec![tagset.outside(); len];
    let mut prev_end: Option<(usize, usize)> = None;
    for s in spans {
        let inside = tagset.inside_tag(s.etype)?;
        let adjacent_same = prev_end.is_some_and(|(end, e)| end + 1 == s.start && e == s.etype);
        let first = match tagset.scheme() {
            TagScheme::Bio2 => tagset.begin_tag(s.etype)?,
            TagScheme::Iob1 if adjacent_same => tagset.begin_tag(s.etype)?,
            TagScheme::Iob1 => inside,
        };
        tags[s.start] = first;
        for t in &mut tags[s.start + 1..=s.end] {
            *t = inside;
        }
        prev_end = Some((s.end, s.etype));
    }
    Ok(tags)
}

/// `(context token index, entity type)` for every `O` token within
/// `halfwidth` positions of a phrase boundary, one pair per (token, span).
pub fn context_windows(
    sentence: &Sentence,
    spans: &[EntitySpan],
    halfwidth: usize,
) -> Vec<(usize, usize)> {
    let n = sentence.len();
    let mut out = Vec::new();
    for span in spans {
        let left = span.start.saturating_sub(halfwidth)..span.start;
        let right = (span.end + 1)..(span.end + 1 + halfwidth).min(n);
        for j in left.chain(right) {
            if sentence.tokens[j].gold_tag == 0 {
                out.push((j, span.etype));
            }
        }
    }
    out
}
