//! Trigger-word corpora with a known cue, for end-to-end checks.
//!
//! Every entity phrase of a type is preceded by that type's trigger word;
//! phrases are one token long unless configured otherwise.
//! Entity words come from one shared pool, so only the trigger tells the
//! types apart. Distractor sentences carry no entity; some of them end in a
//! stray trigger.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_conll, Sentence, TagScheme, TagSet, Token};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed;

const FILLERS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "was", "said", "on", "for", "with", "by", "at", "from", "after", "before",
    "market", "team", "report", "group", "city", "week", "year", "plan", "talks", "deal", "match", "vote", "office",
    "season", "price", "share", "game", "river", "north", "early", "late", "new", "old", "again",
];

const ENTITY_WORDS: &[&str] = &[
    "Zorvek", "Amalin", "Brusk", "Coveny", "Dalmar", "Elvin", "Fenwick", "Garrow", "Halden", "Istvan", "Jorrel",
    "Kestin", "Lomax", "Marrick", "Norvel", "Ostrem", "Pellan", "Quorin", "Rasko", "Selwyn", "Tamsin", "Ulbrek",
    "Varne", "Wendal", "Yorick", "Zanthe", "Corvin", "Belaro", "Draven", "Helmsa",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub sentences: usize,
    /// `(entity type, trigger word)`.
    pub types: Vec<(String, String)>,
    pub fillers: Vec<String>,
    pub entity_words: Vec<String>,
    /// Chance that an entity phrase is preceded by its trigger.
    pub trigger_prob: f64,
    /// Chance that a sentence holds a second entity phrase.
    pub second_entity_prob: f64,
    pub distractor_prob: f64,
    /// Chance that a distractor ends in a stray trigger.
    pub decoy_prob: f64,
    pub max_entity_len: usize,
    /// Dimension of the generated vectors.
    pub dim: usize,
    /// Word vectors are drawn from (−bound, bound).
    pub vector_bound: f64,
    /// Fractions of sentences put in the dev and test splits.
    pub dev_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            sentences: 500,
            types: vec![("PER".into(), "ttl".into()), ("LOC".into(), "lcx".into())],
            fillers: FILLERS.iter().map(|s| s.to_string()).collect(),
            entity_words: ENTITY_WORDS.iter().map(|s| s.to_string()).collect(),
            trigger_prob: 1.0,
            second_entity_prob: 0.25,
            distractor_prob: 0.2,
            decoy_prob: 0.5,
            max_entity_len: 1,
            dim: 16,
            vector_bound: 1.0,
            dev_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.fillers.is_empty() || self.entity_words.is_empty() {
            return Err(Error::invalid("synthetic vocabulary is empty"));
        }
        if self.types.is_empty() {
            return Err(Error::invalid("synthetic spec names no entity type"));
        }
        if self.max_entity_len == 0 || self.dim == 0 || !(self.vector_bound > 0.0) {
            return Err(Error::invalid("entity length, dimension and vector bound must be positive"));
        }
        for p in [
            self.trigger_prob,
            self.second_entity_prob,
            self.distractor_prob,
            self.decoy_prob,
            self.dev_fraction,
            self.test_fraction,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.dev_fraction + self.test_fraction >= 1.0 {
            return Err(Error::invalid("dev and test fractions leave no training data"));
        }
        Ok(())
    }

    pub fn tagset(&self) -> TagSet {
        let names: Vec<&str> = self.types.iter().map(|(e, _)| e.as_str()).collect();
        TagSet::bio(&names, TagScheme::Bio2)
    }

    /// Every word form the generator can emit, lowercased.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self.fillers.iter().map(|w| w.to_lowercase()).collect();
        v.extend(self.types.iter().map(|(_, t)| t.to_lowercase()));
        v.extend(self.entity_words.iter().map(|w| w.to_lowercase()));
        v.push(".".into());
        v
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub tagset: TagSet,
    pub embeddings: EmbeddingTable,
}

fn push_fillers(tokens: &mut Vec<Token>, spec: &SyntheticSpec, n: usize, rng: &mut ChaCha8Rng) {
    for _ in 0..n {
        tokens.push(Token::new(spec.fillers.choose(rng).expect("nonempty"), 0));
    }
}

fn push_entity(tokens: &mut Vec<Token>, spec: &SyntheticSpec, tagset: &TagSet, etype: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    if rng.gen_bool(spec.trigger_prob) {
        tokens.push(Token::new(&spec.types[etype].1, 0));
    } else {
        push_fillers(tokens, spec, 1, rng);
    }
    let len = rng.gen_range(1..=spec.max_entity_len);
    for k in 0..len {
        let tag = if k == 0 { tagset.begin_tag(etype)? } else { tagset.inside_tag(etype)? };
        tokens.push(Token::new(spec.entity_words.choose(rng).expect("nonempty"), tag));
    }
    Ok(())
}

/// All sentences, in generation order.
pub fn generate(spec: &SyntheticSpec, seed_value: u64) -> Result<(Vec<Sentence>, TagSet)> {
    spec.validate()?;
    let tagset = spec.tagset();
    // Entity type ids follow the sorted order of the tag set.
    let order: Vec<usize> = spec
        .types
        .iter()
        .map(|(e, _)| tagset.entity_type_id(e).expect("type was registered"))
        .collect();
    let mut by_id = spec.clone();
    for (i, &id) in order.iter().enumerate() {
        by_id.types[id] = spec.types[i].clone();
    }
    let spec = &by_id;
    let mut rng = seed::rng(seed::derive(seed_value, seed::streams::SYNTHETIC));
    let mut out = Vec::with_capacity(spec.sentences);
    for id in 0..spec.sentences {
        let mut tokens = Vec::new();
        if rng.gen_bool(spec.distractor_prob) {
            let n = rng.gen_range(4..=12);
            push_fillers(&mut tokens, spec, n, &mut rng);
            if rng.gen_bool(spec.decoy_prob) {
                let t = rng.gen_range(0..spec.types.len());
                tokens.push(Token::new(&spec.types[t].1, 0));
            }
        } else {
            let first = rng.gen_range(0..spec.types.len());
            let n = rng.gen_range(0..=6);
            push_fillers(&mut tokens, spec, n, &mut rng);
            push_entity(&mut tokens, spec, &tagset, first, &mut rng)?;
            if rng.gen_bool(spec.second_entity_prob) {
                let n = rng.gen_range(1..=4);
                push_fillers(&mut tokens, spec, n, &mut rng);
                let second = if rng.gen_bool(0.75) {
                    first
                } else {
                    rng.gen_range(0..spec.types.len())
                };
                push_entity(&mut tokens, spec, &tagset, second, &mut rng)?;
            }
            let n = rng.gen_range(2..=8);
            push_fillers(&mut tokens, spec, n, &mut rng);
        }
        tokens.push(Token::new(".", 0));
        out.push(Sentence { id, tokens });
    }
    Ok((out, tagset))
}

/// Generate, split into train / dev / test and draw vectors for the
/// vocabulary.
pub fn gen_synthetic(spec: &SyntheticSpec, seed_value: u64) -> Result<SyntheticData> {
    let (all, tagset) = generate(spec, seed_value)?;
    let n = all.len();
    let n_dev = (n as f64 * spec.dev_fraction).round() as usize;
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    let n_train = n - n_dev - n_test;
    let mut it = all.into_iter();
    let train: Vec<Sentence> = it.by_ref().take(n_train).collect();
    let renumber = |v: Vec<Sentence>| -> Vec<Sentence> {
        v.into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.id = i;
                s
            })
            .collect()
    };
    let dev = renumber(it.by_ref().take(n_dev).collect());
    let test = renumber(it.collect());
    let embeddings = EmbeddingTable::random_in(
        &spec.vocabulary(),
        spec.dim,
        spec.vector_bound,
        seed::derive(seed_value, seed::streams::SYNTHETIC_VECTORS),
    )?;
    Ok(SyntheticData {
        train,
        dev,
        test,
        tagset,
        embeddings,
    })
}

impl SyntheticData {
    /// `train.conll`, `dev.conll`, `test.conll` and `vectors.txt` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, part) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            fs::write(dir.join(format!("{name}.conll")), write_conll(part, &self.tagset)?)?;
        }
        let mut buf = Vec::new();
        self.embeddings.save(&mut buf)?;
        fs::write(dir.join("vectors.txt"), buf)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_spans, parse_conll, ParseOptions};

    fn one_type() -> SyntheticSpec {
        SyntheticSpec {
            types: vec![("PER".into(), "ttl".into())],
            ..Default::default()
        }
    }

    #[test]
    fn every_entity_follows_its_trigger() {
        let spec = SyntheticSpec::default();
        let (sents, ts) = generate(&spec, 1).unwrap();
        assert_eq!(sents.len(), 500);
        let mut entities = 0;
        for s in &sents {
            for span in extract_spans(s, &ts).unwrap() {
                entities += 1;
                let trigger = &spec.types.iter().find(|(e, _)| e == ts.entity_type_name(span.etype)).unwrap().1;
                assert!(span.start > 0);
                assert_eq!(&s.tokens[span.start - 1].normalized, trigger);
            }
        }
        assert!(entities > 400);
        let multi = SyntheticSpec {
            max_entity_len: 3,
            ..Default::default()
        };
        let (sents, ts) = generate(&multi, 1).unwrap();
        assert!(sents.iter().any(|s| extract_spans(s, &ts).unwrap().iter().any(|sp| sp.end > sp.start)));
        assert!(sents.iter().all(|s| s.is_consistent(&ts)));
    }

    #[test]
    fn one_type_corpus_is_consistent() {
        let (sents, ts) = generate(&one_type(), 3).unwrap();
        assert_eq!(ts.entity_types(), &["PER".to_string()]);
        assert!(sents.iter().all(|s| s.is_consistent(&ts)));
    }

    #[test]
    fn seed_changes_tokens_not_shape() {
        let spec = SyntheticSpec::default();
        let (a, _) = generate(&spec, 1).unwrap();
        let (b, _) = generate(&spec, 2).unwrap();
        let (a2, _) = generate(&spec, 1).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn empty_vocabulary_is_rejected() {
        let spec = SyntheticSpec {
            fillers: vec![],
            ..Default::default()
        };
        assert!(generate(&spec, 1).is_err());
    }

    #[test]
    fn written_files_parse_back() {
        let data = gen_synthetic(&SyntheticSpec::default(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write_to(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("train.conll")).unwrap();
        let back = parse_conll(&text, &ParseOptions::default(), Some(&data.tagset)).unwrap();
        assert_eq!(back.sentences.len(), data.train.len());
        assert_eq!(back.sentences, data.train);
        let vecs = fs::read_to_string(dir.path().join("vectors.txt")).unwrap();
        let emb = EmbeddingTable::from_text(&vecs, 0).unwrap();
        assert_eq!(emb.dim(), 16);
        for s in &data.train {
            for t in &s.tokens {
                assert!(emb.index_of(&t.normalized).is_some(), "{}", t.normalized);
            }
        }
    }
}
