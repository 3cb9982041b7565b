//! Corpus ingestion, an immutable BM25 index, and the oracle retriever used
//! for synthetic tasks.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::normalize_answer;
use crate::sim::SyntheticTask;
use crate::trajectory::{from_json_str, read_jsonl_lines, JsonlError};

/// Default retriever fan-out.
pub const DEFAULT_K: usize = 3;

const BM25_K1: f64 = 1.2;
const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self { id: id.into(), title: title.into(), body: body.into() }
    }

    pub fn tokens(&self) -> Vec<String> {
        normalize_answer(&format!("{} {}", self.title, self.body))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Read(#[from] JsonlError),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has neither title nor text")]
    EmptyDocument(String),
}

/// Anything that can answer a query with an ordered document list.
pub trait Retriever: Sync {
    fn retrieve(&self, query: &str, k: usize) -> Vec<&Document>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexStats {
    pub documents: usize,
    pub terms: usize,
    pub postings: usize,
    pub mean_length: f64,
}

/// Inverted index over title and body tokens. Documents are held sorted by
/// id, so ingestion order never affects results.
#[derive(Debug, Clone, Default)]
pub struct RetrievalIndex {
    docs: Vec<Document>,
    lengths: Vec<u32>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    mean_length: f64,
}

impl RetrievalIndex {
    pub fn build(mut docs: Vec<Document>) -> Result<Self, CorpusError> {
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(CorpusError::DuplicateId(w[0].id.clone()));
        }
        if let Some(d) = docs.iter().find(|d| d.title.trim().is_empty() && d.body.trim().is_empty()) {
            return Err(CorpusError::EmptyDocument(d.id.clone()));
        }
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut lengths = Vec::with_capacity(docs.len());
        for (ord, doc) in docs.iter().enumerate() {
            let tokens = doc.tokens();
            lengths.push(tokens.len() as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for tok in tokens {
                *tf.entry(tok).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((ord as u32, count));
            }
        }
        // Documents were visited in id order, so every posting list is sorted.
        let total: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
        let mean_length = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Ok(Self { docs, lengths, postings, mean_length })
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            documents: self.docs.len(),
            terms: self.postings.len(),
            postings: self.postings.values().map(Vec::len).sum(),
            mean_length: self.mean_length,
        }
    }

    /// BM25 weight of one query term in one document.
    pub fn term_weight(&self, tf: u32, df: usize, doc_len: u32) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let tf = f64::from(tf);
        let norm = 1.0 - BM25_B + BM25_B * f64::from(doc_len) / self.mean_length.max(f64::MIN_POSITIVE);
        idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
    }

    /// Top-`k` documents by BM25 score; ties go to the smaller id.
    pub fn search(&self, query: &str, k: usize) -> Vec<(&Document, f64)> {
        // Sorted, so per-document sums are added in a fixed order.
        let terms: BTreeSet<String> = normalize_answer(query).into_iter().collect();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            for &(ord, tf) in list {
                *scores.entry(ord).or_default() += self.term_weight(tf, list.len(), self.lengths[ord as usize]);
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
        // Ordinals follow id order, so comparing them breaks ties by id.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .take(k)
            .map(|(ord, s)| (&self.docs[ord as usize], s))
            .collect()
    }
}

impl Retriever for RetrievalIndex {
    fn retrieve(&self, query: &str, k: usize) -> Vec<&Document> {
        self.search(query, k).into_iter().map(|(d, _)| d).collect()
    }
}

/// Reads a `{id, title, text}` JSON Lines corpus.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in read_jsonl_lines(path)? {
        let doc: Document = from_json_str(&line).map_err(|e| JsonlError::from(e.at_line(n)))?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn ingest_corpus(path: &Path) -> Result<RetrievalIndex, CorpusError> {
    RetrievalIndex::build(load_corpus(path)?)
}

/// Renders retrieved documents the way they are injected into a trajectory.
pub fn format_observation(docs: &[&Document]) -> String {
    docs.iter()
        .enumerate()
        .map(|(i, d)| format!("Doc {} (Title: {}) {}", i + 1, d.title, d.body))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Retriever with perfect recall for one synthetic task: a query that names
/// a chain entity gets that entity's hop document first; every other slot is
/// filled with the task's distractors, chosen by a hash of the query.
#[derive(Debug, Clone, Copy)]
pub struct OracleRetriever<'a> {
    task: &'a SyntheticTask,
}

impl<'a> OracleRetriever<'a> {
    pub fn new(task: &'a SyntheticTask) -> Self {
        Self { task }
    }
}

fn fnv1a(tokens: &[String]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for tok in tokens {
        for b in tok.bytes().chain(std::iter::once(b' ')) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn oracle_retrieve<'a>(task: &'a SyntheticTask, query: &str, k: usize) -> Vec<&'a Document> {
    let tokens = normalize_answer(query);
    let mut out: Vec<&Document> = Vec::with_capacity(k);
    let hop = task
        .entities
        .iter()
        .position(|e| normalize_answer(e).iter().all(|t| tokens.contains(t)));
    if let Some(j) = hop {
        out.push(&task.hop_docs[j]);
    }
    let mut pool: Vec<&Document> = task.distractors.iter().collect();
    let mut state = fnv1a(&tokens);
    while out.len() < k && !pool.is_empty() {
        state = crate::seed::splitmix64(state);
        let pick = (state % pool.len() as u64) as usize;
        out.push(pool.swap_remove(pick));
    }
    out
}

impl Retriever for OracleRetriever<'_> {
    fn retrieve(&self, query: &str, k: usize) -> Vec<&Document> {
        oracle_retrieve(self.task, query, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> Vec<Document> {
        vec![
            Document::new("d1", "Suits", "Suits is an American legal drama television series."),
            Document::new("d2", "History of suits", "The man's suit of clothes developed in England."),
            Document::new("d3", "Drama", "Drama is the specific mode of fiction represented in performance."),
        ]
    }

    /// Scores every document from its raw token list.
    fn brute_force(index: &RetrievalIndex, query: &str) -> Vec<(String, f64)> {
        // Sorted, so per-document sums are added in a fixed order.
        let terms: BTreeSet<String> = normalize_answer(query).into_iter().collect();
        let tokenised: Vec<Vec<String>> = index.documents().iter().map(Document::tokens).collect();
        let mut scored: Vec<(String, f64)> = index
            .documents()
            .iter()
            .zip(&tokenised)
            .filter_map(|(doc, toks)| {
                let mut score = 0.0;
                let mut hit = false;
                for term in &terms {
                    let tf = toks.iter().filter(|t| *t == term).count() as u32;
                    if tf == 0 {
                        continue;
                    }
                    hit = true;
                    let df = tokenised.iter().filter(|d| d.contains(term)).count();
                    score += index.term_weight(tf, df, toks.len() as u32);
                }
                hit.then(|| (doc.id.clone(), score))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
    }

    #[test]
    fn three_documents() {
        let index = RetrievalIndex::build(fixture()).unwrap();
        assert_eq!(index.len(), 3);
        assert_eq!(index.stats().documents, 3);
    }

    #[test]
    fn unique_term_ranks_its_document_first() {
        let index = RetrievalIndex::build(fixture()).unwrap();
        let hits = index.search("television", 3);
        assert_eq!(hits[0].0.id, "d1");
        assert_eq!(hits.len(), 1);
        let hits = index.search("England suit", 2);
        assert_eq!(hits[0].0.id, "d2");
    }

    #[test]
    fn unknown_terms_give_nothing() {
        let index = RetrievalIndex::build(fixture()).unwrap();
        assert!(index.search("zebra quantum", 3).is_empty());
        assert!(index.search("", 3).is_empty());
        assert_eq!(index.search("drama", 3), index.search("drama", 3));
    }

    #[test]
    fn empty_corpus_searches_empty() {
        let index = RetrievalIndex::build(vec![]).unwrap();
        assert!(index.search("anything", 3).is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut docs = fixture();
        docs.push(Document::new("d2", "x", "y"));
        assert!(matches!(RetrievalIndex::build(docs), Err(CorpusError::DuplicateId(id)) if id == "d2"));
    }

    #[test]
    fn corpus_file_errors_carry_line_and_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"title\":\"t\",\"text\":\"x\"}\n{\"id\":\"a\",\"title\":\"t\",\"text\":\"y\"}\n").unwrap();
        let err = ingest_corpus(&path).unwrap_err().to_string();
        assert!(err.contains("duplicate id") && err.contains("\"a\""), "{err}");
        std::fs::write(&path, "{\"id\":\"a\",\"title\":\"t\",\"text\":\"x\"}\n{\"id\":\"b\",\"title\":\"t\"}\n").unwrap();
        let err = ingest_corpus(&path).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("text"), "{err}");
        std::fs::write(&path, "").unwrap();
        assert!(ingest_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn observation_format() {
        let docs = fixture();
        let text = format_observation(&[&docs[0], &docs[2]]);
        assert!(text.starts_with("Doc 1 (Title: Suits) Suits is"));
        assert!(text.contains("\nDoc 2 (Title: Drama) Drama"));
    }

    fn corpus() -> impl Strategy<Value = Vec<Document>> {
        prop::collection::vec(prop::collection::vec("[a-f]{1,2}", 1..8), 0..40).prop_map(|bodies| {
            bodies
                .into_iter()
                .enumerate()
                .map(|(i, words)| Document::new(format!("doc{i:03}"), "", words.join(" ")))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(docs in corpus(), query in "[a-f]{1,2}( [a-f]{1,2}){0,3}", k in 1usize..6) {
            let index = RetrievalIndex::build(docs).unwrap();
            let got: Vec<(String, f64)> = index.search(&query, k).into_iter().map(|(d, s)| (d.id.clone(), s)).collect();
            let want = brute_force(&index, &query);
            prop_assert_eq!(got.len(), want.len().min(k));
            for (g, w) in got.iter().zip(&want) {
                prop_assert_eq!(&g.0, &w.0);
                prop_assert!((g.1 - w.1).abs() < 1e-9);
            }
        }

        #[test]
        fn ingestion_order_is_irrelevant(docs in corpus(), query in "[a-f]{1,2}( [a-f]{1,2}){0,3}", seed: u64) {
            let forward = RetrievalIndex::build(docs.clone()).unwrap();
            let mut shuffled = docs;
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = crate::seed::splitmix64(s);
                shuffled.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let backward = RetrievalIndex::build(shuffled).unwrap();
            let a: Vec<_> = forward.search(&query, 5).into_iter().map(|(d, s)| (d.id.clone(), s.to_bits())).collect();
            let b: Vec<_> = backward.search(&query, 5).into_iter().map(|(d, s)| (d.id.clone(), s.to_bits())).collect();
            prop_assert_eq!(a, b);
        }
    }
}
