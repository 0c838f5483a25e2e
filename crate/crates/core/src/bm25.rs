//! Okapi BM25 over a small in-memory corpus.
//!
//! `score(q, d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))`
//! with `idf(t) = ln(1 + (N − df + 0.5) / (df + 0.5))`, which is always
//! positive, so only documents sharing at least one query term score above 0.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text::{is_stopword, tokenize};
use crate::types::EvidenceItem;

/// One corpus document (a JSON-lines row of the offline corpus).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

/// Terms indexed for a piece of text: tokens minus stopwords.
pub fn index_terms(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

#[derive(Debug, Clone)]
struct IndexedDoc {
    term_freqs: BTreeMap<String, u32>,
    len: usize,
}

/// Inverted statistics for BM25 ranking. Title and text are both indexed;
/// returned evidence carries the text.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    docs: Vec<CorpusDocument>,
    indexed: Vec<IndexedDoc>,
    doc_freq: BTreeMap<String, u32>,
    avg_len: f64,
}

impl Bm25Index {
    pub fn new(docs: Vec<CorpusDocument>) -> Self {
        Bm25Index::with_params(docs, Bm25Params::default())
    }

    pub fn with_params(docs: Vec<CorpusDocument>, params: Bm25Params) -> Self {
        let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
        let indexed: Vec<IndexedDoc> = docs
            .iter()
            .map(|d| {
                let mut full = String::with_capacity(d.title.len() + d.text.len() + 1);
                full.push_str(&d.title);
                full.push(' ');
                full.push_str(&d.text);
                let terms = index_terms(&full);
                let mut term_freqs = BTreeMap::new();
                for t in &terms {
                    *term_freqs.entry(t.clone()).or_insert(0) += 1;
                }
                for t in term_freqs.keys() {
                    *doc_freq.entry(t.clone()).or_insert(0) += 1;
                }
                IndexedDoc {
                    term_freqs,
                    len: terms.len(),
                }
            })
            .collect();
        let total: usize = indexed.iter().map(|d| d.len).sum();
        let avg_len = if indexed.is_empty() {
            0.0
        } else {
            total as f64 / indexed.len() as f64
        };
        Bm25Index {
            params,
            docs,
            indexed,
            doc_freq,
            avg_len,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[CorpusDocument] {
        &self.docs
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = f64::from(self.doc_freq.get(term).copied().unwrap_or(0));
        libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
    }

    /// BM25 score of every document for `query`, in corpus order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let terms = index_terms(query);
        let Bm25Params { k1, b } = self.params;
        self.indexed
            .iter()
            .map(|doc| {
                if self.avg_len == 0.0 {
                    return 0.0;
                }
                let norm = k1 * (1.0 - b + b * doc.len as f64 / self.avg_len);
                terms
                    .iter()
                    .map(|t| match doc.term_freqs.get(t) {
                        Some(&tf) => {
                            let tf = f64::from(tf);
                            self.idf(t) * tf * (k1 + 1.0) / (tf + norm)
                        }
                        None => 0.0,
                    })
                    .sum()
            })
            .collect()
    }

    /// Up to `top_k` passages with a positive score, best first; equal scores
    /// are ordered by ascending `source_id`.
    pub fn search(&self, query: &str, top_k: usize) -> Vec<EvidenceItem> {
        let mut hits: Vec<(f64, &CorpusDocument)> = self
            .scores(query)
            .into_iter()
            .zip(&self.docs)
            .filter(|(s, _)| *s > 0.0)
            .collect();
        hits.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        hits.truncate(top_k);
        hits.into_iter()
            .map(|(score, doc)| EvidenceItem {
                text: doc.text.clone(),
                source_id: doc.id.clone(),
                score,
            })
            .collect()
    }
}
