//! Generative steps of article expansion: query generation and usefulness
//! filtering, plus adapters that plug them into the retrieval pipeline.

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;

use lexverify_text::{Doc, FilterPort, Index, QueryGenerator, ScoredDoc};

use crate::article::BaseArticle;
use crate::json::extract_json;
use crate::port::{CompletionParams, CompletionPort, PortError};
use crate::prompts::{FILTER_USEFUL, GEN_QUERIES};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AssistError {
    #[error(transparent)]
    Port(#[from] PortError),
    #[error("no usable queries generated for `{0}` (after one retry)")]
    EmptyGeneration(String),
    #[error("filter reply is not a JSON array of ids: {0}")]
    UnparseableFilter(String),
}

fn string_list(reply: &str) -> Option<Vec<String>> {
    let v = extract_json(reply, '[')?;
    Some(v.as_array()?.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
}

fn dedup(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect()
}

/// Nonempty, deduplicated search queries for `base`. An empty or unparseable
/// reply is retried once before giving up.
pub fn gen_queries(base: &BaseArticle, port: &dyn CompletionPort, params: &CompletionParams) -> Result<Vec<String>, AssistError> {
    let article = serde_json::to_string_pretty(base).expect("article serializes");
    let prompt = GEN_QUERIES.render(&[("article", &article)]);
    for attempt in 0..2 {
        let prompt = if attempt == 0 {
            prompt.clone()
        } else {
            format!("{prompt}\nYour previous reply contained no queries. Reply with a nonempty JSON array of strings.\n")
        };
        let reply = port.complete(&prompt, params)?;
        let queries = dedup(string_list(&reply).unwrap_or_default());
        if !queries.is_empty() {
            return Ok(queries);
        }
    }
    Err(AssistError::EmptyGeneration(base.doc_id.clone()))
}

#[derive(Serialize)]
struct Candidate<'a> {
    doc_id: &'a str,
    law: &'a str,
    article: &'a str,
    text: &'a str,
}

/// The candidates worth keeping as context for `base`, in input order.
/// Ids the port invents are ignored.
pub fn filter_useful(
    docs: &[Doc],
    base: &BaseArticle,
    port: &dyn CompletionPort,
    params: &CompletionParams,
) -> Result<Vec<Doc>, AssistError> {
    if docs.is_empty() {
        return Ok(Vec::new());
    }
    let candidates: Vec<Candidate<'_>> = docs
        .iter()
        .map(|d| Candidate { doc_id: &d.doc_id, law: &d.law, article: &d.article, text: &d.text })
        .collect();
    let prompt = FILTER_USEFUL.render(&[
        ("article", &serde_json::to_string_pretty(base).expect("article serializes")),
        ("candidates", &serde_json::to_string_pretty(&candidates).expect("candidates serialize")),
    ]);
    let reply = port.complete(&prompt, params)?;
    let keep: HashSet<String> = string_list(&reply)
        .ok_or_else(|| AssistError::UnparseableFilter(reply.chars().take(200).collect()))?
        .into_iter()
        .collect();
    Ok(docs.iter().filter(|d| keep.contains(&d.doc_id)).cloned().collect())
}

fn to_port_error(stage: &str, e: AssistError) -> lexverify_text::PortError {
    lexverify_text::PortError::new(stage, e.to_string())
}

/// [`gen_queries`] as the retrieval pipeline's query generator.
pub struct LlmQueries {
    pub port: Arc<dyn CompletionPort>,
    pub params: CompletionParams,
}

impl QueryGenerator for LlmQueries {
    fn gen_queries(&self, base: &Doc) -> Result<Vec<String>, lexverify_text::PortError> {
        gen_queries(&BaseArticle::from_doc(base), self.port.as_ref(), &self.params).map_err(|e| to_port_error("query generator", e))
    }
}

/// [`filter_useful`] as the retrieval pipeline's filter.
pub struct LlmFilter {
    pub port: Arc<dyn CompletionPort>,
    pub params: CompletionParams,
}

impl FilterPort for LlmFilter {
    fn filter_useful(&self, hits: &[ScoredDoc], base: &Doc, corpus: &Index) -> Result<Vec<String>, lexverify_text::PortError> {
        let docs: Vec<Doc> = hits.iter().filter_map(|h| corpus.doc(&h.doc_id).cloned()).collect();
        let kept = filter_useful(&docs, &BaseArticle::from_doc(base), self.port.as_ref(), &self.params)
            .map_err(|e| to_port_error("filter", e))?;
        Ok(kept.into_iter().map(|d| d.doc_id).collect())
    }
}

/// Corpus documents as an article map keyed by doc id, the form synthesis takes.
pub fn articles_from_docs<'a>(docs: impl IntoIterator<Item = &'a Doc>) -> lexverify_text::ArticleMap {
    docs.into_iter()
        .map(|d| {
            let base = BaseArticle::from_doc(d);
            (d.doc_id.clone(), lexverify_text::Article { title: base.title, clauses: base.clauses, content: base.content })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExpandByIdError {
    #[error("no document `{0}` in the corpus")]
    UnknownDoc(String),
    #[error(transparent)]
    Expand(#[from] lexverify_text::ExpandError),
}

/// Article expansion with LLM query generation and filtering through `port`
/// and the lexical-overlap reranker.
pub fn expand_with_port(
    doc_id: &str,
    index: &Index,
    port: Arc<dyn CompletionPort>,
    params: &CompletionParams,
    alpha: f64,
    k: usize,
) -> Result<lexverify_text::Expansion, ExpandByIdError> {
    let base = index.doc(doc_id).ok_or_else(|| ExpandByIdError::UnknownDoc(doc_id.into()))?.clone();
    let queries = LlmQueries { port: port.clone(), params: params.clone() };
    let filter = LlmFilter { port, params: params.clone() };
    let ports = lexverify_text::Ports { query_gen: &queries, reranker: &lexverify_text::OverlapReranker, filter: &filter };
    Ok(lexverify_text::expand_article(&base, index, &ports, alpha, k)?)
}
