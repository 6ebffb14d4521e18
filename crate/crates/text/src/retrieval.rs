//! Hybrid lexical/vector retrieval over statute provisions, and the
//! supplementary-article expansion built on it.
//!
//! Scoring: Okapi BM25 (k1 = 1.2, b = 0.75) on the lexical side, cosine
//! similarity on the vector side. The hybrid score maps similarity to [0, 1]
//! by (s + 1) / 2 and min-max normalizes BM25 over the merged candidate set.

use std::collections::{HashMap, HashSet};
use std::hash::Hasher;
use std::io::BufRead;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::tokenize::{content_words, Tokenizer};

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Doc {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub law: String,
    #[serde(default)]
    pub article: String,
}

impl Doc {
    pub fn new(doc_id: &str, text: &str) -> Self {
        Doc { doc_id: doc_id.into(), text: text.into(), law: String::new(), article: String::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub bm25: f64,
    pub sim_vec: f64,
    /// Set by hybrid search only.
    pub hybrid: Option<f64>,
    /// Set by a reranker that scores.
    pub rerank: Option<f64>,
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    /// A unit vector of length `dim()` (all zeros for text with no tokens).
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Feature-hashed bag of words: each token adds ±1 to one of `dim` buckets.
#[derive(Clone, Debug)]
pub struct HashEmbedder {
    dim: usize,
    tokenizer: Tokenizer,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim, tokenizer: Tokenizer::default() }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(64)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in self.tokenizer.tokens(text) {
            let mut h = fnv::FnvHasher::default();
            h.write(token.as_bytes());
            let h = h.finish();
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        normalize(&mut v);
        v
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate doc_id `{0}`")]
    DuplicateId(String),
    #[error("embedding of `{doc_id}` has {got} dimensions, expected {expected}")]
    DimensionMismatch { doc_id: String, expected: usize, got: usize },
}

/// Immutable after build; searches take `&self` and may run concurrently.
#[derive(Clone)]
pub struct Index {
    docs: Vec<Doc>,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_len: Vec<usize>,
    avgdl: f64,
    vectors: Vec<Vec<f64>>,
    embedder: Arc<dyn Embedder>,
    tokenizer: Tokenizer,
}

impl std::fmt::Debug for Index {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Index").field("docs", &self.docs.len()).field("terms", &self.postings.len()).finish()
    }
}

fn rank(hits: &mut [ScoredDoc], key: impl Fn(&ScoredDoc) -> f64) {
    hits.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.doc_id.cmp(&b.doc_id)));
}

/// α-weighted combination of already-normalized components.
pub fn hybrid_score(alpha: f64, sim_norm: f64, bm25_norm: f64) -> f64 {
    alpha * sim_norm + (1.0 - alpha) * bm25_norm
}

impl Index {
    pub fn build(docs: Vec<Doc>, embedder: Arc<dyn Embedder>) -> Result<Self, IndexError> {
        Self::build_with(docs, embedder, Tokenizer::default())
    }

    pub fn build_with(docs: Vec<Doc>, embedder: Arc<dyn Embedder>, tokenizer: Tokenizer) -> Result<Self, IndexError> {
        let mut by_id = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        let mut vectors = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.doc_id.clone(), i).is_some() {
                return Err(IndexError::DuplicateId(d.doc_id.clone()));
            }
            let tokens = tokenizer.tokens(&d.text);
            doc_len.push(tokens.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((i, n));
            }
            let v = embedder.embed(&d.text);
            if v.len() != embedder.dim() {
                return Err(IndexError::DimensionMismatch { doc_id: d.doc_id.clone(), expected: embedder.dim(), got: v.len() });
            }
            vectors.push(v);
        }
        let avgdl = if docs.is_empty() { 0.0 } else { doc_len.iter().sum::<usize>() as f64 / docs.len() as f64 };
        Ok(Index { docs, by_id, postings, doc_len, avgdl, vectors, embedder, tokenizer })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Doc] {
        &self.docs
    }

    pub fn doc(&self, doc_id: &str) -> Option<&Doc> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    /// Number of distinct documents reachable from the inverted index.
    pub fn posting_targets(&self) -> usize {
        self.postings.values().flatten().map(|(d, _)| *d).collect::<HashSet<_>>().len()
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    /// BM25 score of every document, indexed like [`Index::docs`].
    pub fn bm25_scores(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.docs.len()];
        let n = self.docs.len() as f64;
        let mut seen = HashSet::new();
        for term in self.tokenizer.tokens(query) {
            // Repeated query terms count once.
            if !seen.insert(term.clone()) {
                continue;
            }
            let Some(list) = self.postings.get(&term) else { continue };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for &(d, tf) in list {
                let tf = tf as f64;
                let norm = 1.0 - BM25_B + BM25_B * self.doc_len[d] as f64 / self.avgdl;
                scores[d] += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
            }
        }
        scores
    }

    /// Cosine similarity of every document to the query.
    pub fn similarities(&self, query: &str) -> Vec<f64> {
        let q = self.embedder.embed(query);
        self.vectors.iter().map(|v| cosine(&q, v)).collect()
    }

    fn scored(&self, i: usize, bm25: &[f64], sims: &[f64]) -> ScoredDoc {
        ScoredDoc { doc_id: self.docs[i].doc_id.clone(), bm25: bm25[i], sim_vec: sims[i], hybrid: None, rerank: None }
    }

    /// Documents containing at least one query term, best first.
    pub fn bm25_search(&self, query: &str, k: usize) -> Vec<ScoredDoc> {
        let (bm25, sims) = (self.bm25_scores(query), self.similarities(query));
        let mut hits: Vec<ScoredDoc> = (0..self.docs.len()).filter(|&i| bm25[i] > 0.0).map(|i| self.scored(i, &bm25, &sims)).collect();
        rank(&mut hits, |h| h.bm25);
        hits.truncate(k);
        hits
    }

    pub fn vector_search(&self, query: &str, k: usize) -> Vec<ScoredDoc> {
        let (bm25, sims) = (self.bm25_scores(query), self.similarities(query));
        let mut hits: Vec<ScoredDoc> = (0..self.docs.len()).map(|i| self.scored(i, &bm25, &sims)).collect();
        rank(&mut hits, |h| h.sim_vec);
        hits.truncate(k);
        hits
    }

    /// Top-`k` of the union of the BM25 and vector top-`k` lists by hybrid score.
    pub fn hybrid_search(&self, query: &str, k: usize, alpha: f64) -> Vec<ScoredDoc> {
        assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1], got {alpha}");
        let mut merged = self.bm25_search(query, k);
        let seen: HashSet<String> = merged.iter().map(|h| h.doc_id.clone()).collect();
        merged.extend(self.vector_search(query, k).into_iter().filter(|h| !seen.contains(&h.doc_id)));
        let (lo, hi) = merged.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h.bm25), hi.max(h.bm25)));
        for h in &mut merged {
            let bm25_norm = if hi > lo { (h.bm25 - lo) / (hi - lo) } else { 1.0 };
            h.hybrid = Some(hybrid_score(alpha, (h.sim_vec + 1.0) / 2.0, bm25_norm));
        }
        // Equal hybrid scores fall back to the more heavily weighted signal:
        // (s + 1) / 2 and min-max can merge values a few ulps apart.
        let dominant = |h: &ScoredDoc| if alpha >= 0.5 { h.sim_vec } else { h.bm25 };
        merged.sort_by(|a, b| {
            let hybrid = |h: &ScoredDoc| h.hybrid.unwrap_or(0.0);
            hybrid(b)
                .total_cmp(&hybrid(a))
                .then_with(|| dominant(b).total_cmp(&dominant(a)))
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        merged.truncate(k);
        merged
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{port} failed: {message}")]
pub struct PortError {
    pub port: String,
    pub message: String,
}

impl PortError {
    pub fn new(port: &str, message: impl Into<String>) -> Self {
        PortError { port: port.into(), message: message.into() }
    }
}

pub trait QueryGenerator: Send + Sync {
    fn gen_queries(&self, base: &Doc) -> Result<Vec<String>, PortError>;
}

/// Must return a permutation of `hits`.
pub trait RerankerPort: Send + Sync {
    fn rerank(&self, query: &str, hits: Vec<ScoredDoc>, corpus: &Index) -> Result<Vec<ScoredDoc>, PortError>;
}

/// Returns the ids of the hits worth keeping; ids not among `hits` are ignored.
pub trait FilterPort: Send + Sync {
    fn filter_useful(&self, hits: &[ScoredDoc], base: &Doc, corpus: &Index) -> Result<Vec<String>, PortError>;
}

/// The base article's own text as the single query.
pub struct EchoQuery;

impl QueryGenerator for EchoQuery {
    fn gen_queries(&self, base: &Doc) -> Result<Vec<String>, PortError> {
        Ok(vec![base.text.clone()])
    }
}

pub struct IdentityReranker;

impl RerankerPort for IdentityReranker {
    fn rerank(&self, _query: &str, hits: Vec<ScoredDoc>, _corpus: &Index) -> Result<Vec<ScoredDoc>, PortError> {
        Ok(hits)
    }
}

/// Orders by the share of the query's content words found in each document.
pub struct OverlapReranker;

impl RerankerPort for OverlapReranker {
    fn rerank(&self, query: &str, mut hits: Vec<ScoredDoc>, corpus: &Index) -> Result<Vec<ScoredDoc>, PortError> {
        let q: HashSet<String> = content_words(query).into_iter().collect();
        for h in &mut hits {
            let words: HashSet<String> = corpus.doc(&h.doc_id).map(|d| content_words(&d.text).into_iter().collect()).unwrap_or_default();
            h.rerank = Some(if q.is_empty() { 0.0 } else { q.intersection(&words).count() as f64 / q.len() as f64 });
        }
        // Stable: equal overlap keeps the hybrid order.
        hits.sort_by(|a, b| b.rerank.unwrap_or(0.0).total_cmp(&a.rerank.unwrap_or(0.0)));
        Ok(hits)
    }
}

pub struct AcceptAll;

impl FilterPort for AcceptAll {
    fn filter_useful(&self, hits: &[ScoredDoc], _base: &Doc, _corpus: &Index) -> Result<Vec<String>, PortError> {
        Ok(hits.iter().map(|h| h.doc_id.clone()).collect())
    }
}

pub struct Ports<'a> {
    pub query_gen: &'a dyn QueryGenerator,
    pub reranker: &'a dyn RerankerPort,
    pub filter: &'a dyn FilterPort,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExpandError {
    #[error("query generation: {0}")]
    QueryGeneration(PortError),
    #[error("query `{query}`: {source}")]
    Port { query: String, source: PortError },
    #[error("query `{query}`: reranker added or dropped documents")]
    NotAPermutation { query: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub query: String,
    /// After reranking.
    pub hits: Vec<ScoredDoc>,
    pub kept: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub docs: Vec<Doc>,
    pub queries: Vec<QueryTrace>,
}

/// Whether `after` holds exactly the documents of `before`.
pub fn is_permutation(before: &[ScoredDoc], after: &[ScoredDoc]) -> bool {
    let mut a: Vec<&str> = before.iter().map(|h| h.doc_id.as_str()).collect();
    let mut b: Vec<&str> = after.iter().map(|h| h.doc_id.as_str()).collect();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Supplementary provisions for `base`: per generated query, hybrid top-`k`,
/// rerank, filter; results merged in first-seen order without duplicates.
pub fn expand_article(base: &Doc, index: &Index, ports: &Ports<'_>, alpha: f64, k: usize) -> Result<Expansion, ExpandError> {
    let queries = ports.query_gen.gen_queries(base).map_err(ExpandError::QueryGeneration)?;
    let mut out = Expansion { docs: Vec::new(), queries: Vec::new() };
    let mut seen = HashSet::new();
    for query in queries {
        let hits = index.hybrid_search(&query, k, alpha);
        let reranked = ports
            .reranker
            .rerank(&query, hits.clone(), index)
            .map_err(|source| ExpandError::Port { query: query.clone(), source })?;
        if !is_permutation(&hits, &reranked) {
            return Err(ExpandError::NotAPermutation { query });
        }
        let wanted: HashSet<String> = ports
            .filter
            .filter_useful(&reranked, base, index)
            .map_err(|source| ExpandError::Port { query: query.clone(), source })?
            .into_iter()
            .collect();
        let kept: Vec<String> = reranked.iter().filter(|h| wanted.contains(&h.doc_id)).map(|h| h.doc_id.clone()).collect();
        for id in &kept {
            if seen.insert(id.clone()) {
                out.docs.push(index.doc(id).expect("hit comes from the index").clone());
            }
        }
        out.queries.push(QueryTrace { query, hits: reranked, kept });
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One [`Doc`] per non-blank line.
pub fn read_corpus_jsonl(reader: impl BufRead) -> Result<Vec<Doc>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(serde_json::from_str(&line).map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_embedding_is_unit_or_zero() {
        let e = HashEmbedder::default();
        let v = e.embed("capital adequacy ratio");
        assert_eq!(v.len(), 64);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(e.embed("  ,. ").iter().all(|&x| x == 0.0));
    }

    #[test]
    fn corpus_lines() {
        let src = "{\"doc_id\":\"a\",\"text\":\"x\",\"law\":\"L\",\"article\":\"1\"}\n\n{\"doc_id\":\"b\",\"text\":\"y\"}\n";
        let docs = read_corpus_jsonl(src.as_bytes()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].law, "");
        let err = read_corpus_jsonl("{\"doc_id\":1}".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
    }
}
