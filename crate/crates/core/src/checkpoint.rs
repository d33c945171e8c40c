//! Versioned plain-text model checkpoints.
//!
//! ```text
//! ctxrel-checkpoint 1
//! cell      lstm
//! input_dim 50
//! ...
//! tags      O B-LOC I-LOC
//! tensor    forward.w_input 10000
//! 0.013 -0.2 ...
//! end
//! ```
//!
//! Fields are tab-separated. Floats use Rust's shortest round-trip
//! formatting, so a save / load cycle reproduces every parameter bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{TagScheme, TagSet};
use crate::error::{Error, Result};
use crate::nn::{CellKind, ModelParams};

pub const MAGIC: &str = "ctxrel-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub tagset: TagSet,
    /// SHA-256 of the embedding file the model was trained with.
    pub fingerprint: Option<String>,
}

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn fingerprint_file(path: &Path) -> Result<String> {
    Ok(fingerprint_bytes(&fs::read(path)?))
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let m = &self.model;
        writeln!(w, "{MAGIC} {VERSION}")?;
        writeln!(w, "cell\t{}", m.hyper.cell)?;
        writeln!(w, "input_dim\t{}", m.input_dim())?;
        writeln!(w, "hidden\t{}", m.hidden())?;
        writeln!(w, "seed\t{}", m.hyper.seed)?;
        writeln!(w, "lr\t{}", m.hyper.lr)?;
        writeln!(w, "epochs\t{}", m.hyper.epochs)?;
        writeln!(w, "scheme\t{}", self.tagset.scheme())?;
        writeln!(w, "tags\t{}", self.tagset.names().join("\t"))?;
        writeln!(w, "fingerprint\t{}", self.fingerprint.as_deref().unwrap_or("-"))?;
        for (name, values) in m.tensors() {
            writeln!(w, "tensor\t{name}\t{}", values.len())?;
            let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |field: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Checkpoint(format!("unexpected end of file while reading {field}"))),
            }
        };
        let (_, header) = next("header")?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::Checkpoint("header: not a checkpoint file".into()))?;
        if version != VERSION.to_string() {
            return Err(Error::Checkpoint(format!(
                "header: unsupported version {version}, expected {VERSION}"
            )));
        }
        let mut field = |key: &str| -> Result<String> {
            let (line, text) = next(key)?;
            match text.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(Error::Checkpoint(format!("{key}: expected on line {line}, found {text:?}"))),
            }
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Checkpoint(format!("{key}: bad value {v:?}")))
        }
        let cell: CellKind = field("cell")?
            .parse()
            .map_err(|_| Error::Checkpoint("cell: unknown kind".into()))?;
        let input_dim: usize = num("input_dim", &field("input_dim")?)?;
        let hidden: usize = num("hidden", &field("hidden")?)?;
        let seed: u64 = num("seed", &field("seed")?)?;
        let lr: f64 = num("lr", &field("lr")?)?;
        let epochs: usize = num("epochs", &field("epochs")?)?;
        let scheme: TagScheme = field("scheme")?
            .parse()
            .map_err(|_| Error::Checkpoint("scheme: unknown scheme".into()))?;
        let names: Vec<String> = field("tags")?.split('\t').map(str::to_string).collect();
        let tagset = TagSet::from_names(&names, scheme).map_err(|e| Error::Checkpoint(format!("tags: {e}")))?;
        if tagset.names() != names.as_slice() {
            return Err(Error::Checkpoint("tags: not in canonical order".into()));
        }
        let fp = field("fingerprint")?;
        let fingerprint = (fp != "-").then_some(fp);

        let mut model = ModelParams::zeros(cell, input_dim, hidden, tagset.len());
        model.hyper.seed = seed;
        model.hyper.lr = lr;
        model.hyper.epochs = epochs;
        for (name, slot) in model.tensors_mut() {
            let (line, head) = next(name)?;
            let expected = format!("tensor\t{name}\t{}", slot.len());
            if head != expected {
                return Err(Error::Checkpoint(format!(
                    "{name}: expected header {expected:?} on line {line}, found {head:?}"
                )));
            }
            let (_, body) = next(name)?;
            let mut count = 0;
            for tok in body.split_ascii_whitespace() {
                if count == slot.len() {
                    return Err(Error::Checkpoint(format!("{name}: too many values")));
                }
                slot[count] = num(name, tok)?;
                count += 1;
            }
            if count != slot.len() {
                return Err(Error::Checkpoint(format!("{name}: {count} values, expected {}", slot.len())));
            }
        }
        let (_, end) = next("end")?;
        if end != "end" {
            return Err(Error::Checkpoint(format!("end: unexpected trailing content {end:?}")));
        }
        Ok(Checkpoint {
            model,
            tagset,
            fingerprint,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(fs::File::open(path)?))
    }

    /// Compare against the fingerprint of the embeddings about to be used.
    /// A mismatch is logged, not fatal. Returns whether they agree.
    pub fn check_fingerprint(&self, actual: &str) -> bool {
        match &self.fingerprint {
            Some(fp) if fp != actual => {
                log::warn!("embedding fingerprint mismatch: checkpoint has {fp}, file has {actual}");
                false
            }
            _ => true,
        }
    }
}
