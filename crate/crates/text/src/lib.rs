//! Statute text handling: splitting raw legal documents into articles and
//! clauses, and finding related provisions with a hybrid lexical/vector index.

pub mod articles;
pub mod numerals;
pub mod retrieval;
pub mod tokenize;

pub use articles::{default_patterns, extract_articles, render_articles, Article, ArticleMap, Extraction, Language, PatternConfig, PatternError, PatternSet};
pub use retrieval::{
    expand_article, hybrid_score, read_corpus_jsonl, AcceptAll, CorpusError, Doc, EchoQuery, Embedder, ExpandError,
    Expansion, FilterPort, HashEmbedder, IdentityReranker, Index, IndexError, OverlapReranker, PortError, Ports,
    QueryGenerator, QueryTrace, RerankerPort, ScoredDoc, DEFAULT_ALPHA,
};
