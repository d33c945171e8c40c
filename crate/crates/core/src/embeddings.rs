//! Pretrained word vectors in the whitespace text format (`word v1 … vd`).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::corpus::{Sentence, Token};
use crate::error::{Error, Result};
use crate::seed;

/// Half-width of the uniform range used for OOV and replacement vectors.
pub const UNIFORM_BOUND: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    /// `(words.len() + 1) × dim`, the last row being the shared OOV row.
    matrix: Vec<f64>,
    duplicates: Vec<String>,
}

/// `dim` values drawn from uniform(−0.25, 0.25) with a ChaCha8 stream.
pub fn uniform_vector(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    uniform_vector_in(dim, UNIFORM_BOUND, rng)
}

/// `dim` values from the open interval (−bound, bound).
pub fn uniform_vector_in(dim: usize, bound: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    (0..dim)
        .map(|_| loop {
            let v = rng.gen_range(-bound..bound);
            if v != -bound {
                break v;
            }
        })
        .collect()
}

/// Random word representation used by erasure.
pub fn random_replacement(dim: usize, rng_seed: u64) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::invalid("replacement dimension must be positive"));
    }
    Ok(uniform_vector(dim, &mut seed::rng(rng_seed)))
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

impl EmbeddingTable {
    /// Parse vectors from a reader. A leading `count dim` line is skipped.
    /// The OOV row is drawn from `oov_seed`. Duplicate words keep their first
    /// vector.
    pub fn load<R: BufRead>(reader: R, oov_seed: u64) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut vocab = HashMap::new();
        let mut words = Vec::new();
        let mut matrix = Vec::new();
        let mut duplicates = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 0 && is_header(&fields) {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let d = fields.len() - 1;
            if d == 0 {
                return Err(parse_err("word without vector".into()));
            }
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(parse_err(format!(
                        "expected {expected} components, found {d}"
                    )));
                }
                _ => {}
            }
            let word = fields[0];
            if vocab.contains_key(word) {
                log::warn!("duplicate vector for {word:?} on line {}, keeping the first", lineno + 1);
                duplicates.push(word.to_string());
                continue;
            }
            let start = matrix.len();
            for f in &fields[1..] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(format!("non-numeric component {f:?}")))?;
                if !v.is_finite() {
                    matrix.truncate(start);
                    return Err(parse_err(format!("non-finite component {f:?}")));
                }
                matrix.push(v);
            }
            vocab.insert(word.to_string(), words.len());
            words.push(word.to_string());
        }
        let dim = dim.ok_or_else(|| Error::invalid("vector file holds no vectors"))?;
        matrix.extend(random_replacement(dim, oov_seed)?);
        Ok(EmbeddingTable {
            dim,
            vocab,
            words,
            matrix,
            duplicates,
        })
    }

    pub fn from_text(text: &str, oov_seed: u64) -> Result<Self> {
        Self::load(text.as_bytes(), oov_seed)
    }

    /// Random vectors for a word list, one independent stream per word.
    pub fn random(words: &[String], dim: usize, seed_value: u64) -> Result<Self> {
        Self::random_in(words, dim, UNIFORM_BOUND, seed_value)
    }

    /// As [`EmbeddingTable::random`] with word rows drawn from
    /// (−bound, bound). The OOV row keeps the default range.
    pub fn random_in(words: &[String], dim: usize, bound: f64, seed_value: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::invalid(format!("vector bound must be positive, got {bound}")));
        }
        let mut vocab = HashMap::new();
        let mut kept = Vec::new();
        let mut matrix = Vec::new();
        for w in words {
            if vocab.contains_key(w) {
                continue;
            }
            vocab.insert(w.clone(), kept.len());
            kept.push(w.clone());
            matrix.extend(uniform_vector_in(dim, bound, &mut seed::rng(seed::derive(seed_value, seed::hash_str(w)))));
        }
        matrix.extend(random_replacement(dim, seed::derive(seed_value, seed::streams::OOV))?);
        Ok(EmbeddingTable {
            dim,
            vocab,
            words: kept,
            matrix,
            duplicates: Vec::new(),
        })
    }

    /// Writes every in-vocabulary row with shortest round-trip decimals. The
    /// OOV row is not written; it is regenerated from the seed on load.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}")?;
            for v in self.row(i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of in-vocabulary words.
    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    pub fn rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn oov_row(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    /// Row index for a token: explicit index, then normalized form, then
    /// surface form, then OOV.
    pub fn resolve(&self, token: &Token) -> usize {
        if let Some(i) = token.vocab_index {
            if i < self.rows() {
                return i;
            }
        }
        self.index_of(&token.normalized)
            .or_else(|| self.index_of(&token.surface))
            .unwrap_or_else(|| self.oov_row())
    }

    pub fn lookup(&self, token: &Token) -> &[f64] {
        self.row(self.resolve(token))
    }

    /// Input vectors for a sentence.
    pub fn sentence_vectors(&self, sentence: &Sentence) -> Vec<Vec<f64>> {
        sentence
            .tokens
            .iter()
            .map(|t| self.lookup(t).to_vec())
            .collect()
    }

    /// Resolve and store `vocab_index` on every token.
    pub fn attach(&self, sentences: &mut [Sentence]) {
        for s in sentences {
            for t in &mut s.tokens {
                t.vocab_index = Some(self.resolve(t));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_three_dim_lines() {
        let t = EmbeddingTable::from_text("a 1 2 3\nb 4 5 6\n", 0).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.vocab_len(), 2);
        assert_eq!(t.rows(), 3);
    }

    #[test]
    fn header_is_skipped() {
        let t = EmbeddingTable::from_text("2 3\na 1 2 3\nb 4 5 6\n", 0).unwrap();
        assert_eq!(t.vocab_len(), 2);
    }

    #[test]
    fn duplicate_first_wins() {
        let t = EmbeddingTable::from_text("a 1 2\na 3 4\n", 0).unwrap();
        assert_eq!(t.vocab_len(), 1);
        assert_eq!(t.row(0), &[1.0, 2.0]);
        assert_eq!(t.duplicates(), &["a".to_string()]);
    }

    #[test]
    fn inconsistent_dimension_names_line() {
        match EmbeddingTable::from_text("a 1 2\nb 1 2 3\n", 0) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            EmbeddingTable::from_text("a 1 x\n", 0),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn lookup_hits_and_oov() {
        let t = EmbeddingTable::from_text("paris 0.5 -0.125\n", 9).unwrap();
        assert_eq!(t.lookup(&Token::new("Paris", 0)), &[0.5, -0.125]);
        let a = t.lookup(&Token::new("zzz", 0)).to_vec();
        let b = t.lookup(&Token::new("qqq", 0)).to_vec();
        assert_eq!(a, b);
        assert_eq!(t.resolve(&Token::new("zzz", 0)), t.oov_row());
    }

    #[test]
    fn replacement_determinism_and_range() {
        assert_eq!(random_replacement(50, 7).unwrap(), random_replacement(50, 7).unwrap());
        assert_ne!(random_replacement(50, 7).unwrap(), random_replacement(50, 8).unwrap());
        assert!(random_replacement(0, 7).is_err());
        let draws = random_replacement(10_000, 11).unwrap();
        assert!(draws.iter().all(|v| *v > -0.25 && *v < 0.25));
        let big = random_replacement(100_000, 12).unwrap();
        let mean = big.iter().sum::<f64>() / big.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        let var = big.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / big.len() as f64;
        // uniform(−a, a) has variance a²/3.
        assert!((var - 0.25f64.powi(2) / 3.0).abs() < 1e-3, "var {var}");
    }

    #[test]
    fn save_load_round_trip() {
        let words: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let t = EmbeddingTable::random(&words, 5, 3).unwrap();
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();
        let back = EmbeddingTable::load(buf.as_slice(), seed::derive(3, seed::streams::OOV)).unwrap();
        assert_eq!(back, t);
    }
}
