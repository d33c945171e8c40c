//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export has a plain Rust twin returning `Result<String, String>` so
//! the logic is testable without a browser.

use ctxrel::analysis::{build_heatmap, positional_probe, Axis, Filler, LabeledTable};
use ctxrel::corpus::{parse_conll, ParseOptions};
use ctxrel::nn::{CellKind, ModelParams};
use ctxrel::relevance::{score_lrc, score_wf, Erasure, Measure, RelevanceTable, WfOptions};
use ctxrel::synthetic::{gen_synthetic, SyntheticData, SyntheticSpec};
use ctxrel::trainer::{evaluate, train, TrainConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

const TOP: usize = 10;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn top_words(table: &RelevanceTable, n: usize) -> serde_json::Value {
    let types: Vec<serde_json::Value> = table
        .entity_types()
        .iter()
        .map(|e| {
            let words: Vec<serde_json::Value> = table
                .ranking(e)
                .into_iter()
                .take(n)
                .map(|(w, s)| json!({ "word": w, "score": s, "support": table.get(&w, e).map_or(0, |x| x.support) }))
                .collect();
            json!({ "entity": e, "words": words })
        })
        .collect();
    json!(types)
}

/// Frequency relevance of pasted CoNLL text, top words per entity type.
pub fn wf_json(conll: &str, inverse: bool, window: usize) -> Result<String, String> {
    let corpus = parse_conll(conll, &ParseOptions::default(), None).map_err(err)?;
    let opts = WfOptions { halfwidth: window, inverse, ..WfOptions::default() };
    let table = score_wf(&corpus.sentences, &corpus.tagset, opts).map_err(err)?;
    Ok(json!({ "sentences": corpus.sentences.len(), "types": top_words(&table, TOP) }).to_string())
}

#[wasm_bindgen]
pub fn wf_table(conll: &str, inverse: bool, window: usize) -> Result<String, JsValue> {
    wf_json(conll, inverse, window).map_err(|e| JsValue::from_str(&e))
}

/// A tagger trained on a generated trigger-word corpus.
#[wasm_bindgen]
pub struct Lab {
    data: SyntheticData,
    model: ModelParams,
    trace: Vec<f64>,
    accuracy: f64,
    seed: u64,
}

impl Lab {
    pub fn train(cell: &str, sentences: usize, epochs: usize, seed: u64) -> Result<Lab, String> {
        let cell: CellKind = cell.parse().map_err(err)?;
        let spec = SyntheticSpec { sentences, ..SyntheticSpec::default() };
        let data = gen_synthetic(&spec, seed).map_err(err)?;
        let cfg = TrainConfig { cell, hidden: 16, epochs, lr: 0.05, seed, ..TrainConfig::default() };
        let out = train(&data.train, None, &data.tagset, &data.embeddings, &cfg).map_err(err)?;
        let accuracy = evaluate(&out.model, &data.test, &data.tagset, &data.embeddings)
            .map_err(err)?
            .token_accuracy;
        Ok(Lab {
            trace: out.trace.iter().map(|s| s.mean_nll).collect(),
            model: out.model,
            data,
            accuracy,
            seed,
        })
    }

    pub fn summary_json(&self) -> String {
        let example: Vec<&str> = self.data.test[0].tokens.iter().map(|t| t.surface.as_str()).collect();
        json!({
            "accuracy": self.accuracy,
            "nll": self.trace,
            "train": self.data.train.len(),
            "test": self.data.test.len(),
            "example": example.join(" "),
        })
        .to_string()
    }

    /// LRC scores on the test split as an SVG grid, words × entity types,
    /// restricted to each type's highest-scoring words.
    pub fn heatmap(&self, measure: &str, words: usize) -> Result<String, String> {
        let measure: Measure = measure.parse().map_err(err)?;
        let er = Erasure::new(self.seed);
        let full = score_lrc(&self.model, &self.data.test, &self.data.tagset, &self.data.embeddings, &er, measure)
            .map_err(err)?;
        let mut keep: Vec<String> = Vec::new();
        for e in full.entity_types() {
            for (w, _) in full.ranking(&e).into_iter().take(words) {
                if !keep.contains(&w) {
                    keep.push(w);
                }
            }
        }
        let mut table = full.clone();
        table.entries.retain(|(w, _), _| keep.contains(w));
        let grid = build_heatmap(&[LabeledTable { model: "lab".into(), table }], &[], Axis::Word, Axis::Entity)
            .map_err(err)?;
        Ok(json!({ "svg": grid.to_svg(), "types": top_words(&full, words) }).to_string())
    }

    pub fn probe_json(&self, context: &str, entity: &str, entity_type: &str, max_distance: usize) -> Result<String, String> {
        let er = Erasure::new(self.seed);
        let res = positional_probe(
            &[("lab".into(), &self.model)],
            &self.data.tagset,
            context,
            entity,
            entity_type,
            max_distance,
            Filler::FixedOov,
            &self.data.embeddings,
            &er,
            Measure::Dot,
        )
        .map_err(err)?;
        Ok(json!({ "distances": res.distances, "scores": res.scores[0] }).to_string())
    }
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(cell: &str, sentences: usize, epochs: usize, seed: u64) -> Result<Lab, JsValue> {
        Lab::train(cell, sentences, epochs, seed).map_err(|e| JsValue::from_str(&e))
    }

    pub fn summary(&self) -> String {
        self.summary_json()
    }

    pub fn lrc_heatmap(&self, measure: &str, words: usize) -> Result<String, JsValue> {
        self.heatmap(measure, words).map_err(|e| JsValue::from_str(&e))
    }

    pub fn probe(&self, context: &str, entity: &str, entity_type: &str, max_distance: usize) -> Result<String, JsValue> {
        self.probe_json(context, entity, entity_type, max_distance)
            .map_err(|e| JsValue::from_str(&e))
    }
}
