use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use lexverify_gateway::{articles_from_docs, expand_with_port, synthesize_bundle, ExpandByIdError, SynthesisOptions};
use lexverify_store::Operation;
use lexverify_text::{ArticleMap, Index, ScoredDoc, DEFAULT_ALPHA};

use crate::{blocking, ApiError, Body, Shared};

fn corpus(app: &Shared) -> Result<&Index, ApiError> {
    app.index.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_corpus", "no retrieval corpus is loaded (start with --corpus)")
    })
}

fn check_alpha(alpha: f64) -> Result<f64, ApiError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(alpha)
    } else {
        Err(ApiError::bad_request(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_k() -> usize {
    10
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    query: String,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_k")]
    k: usize,
}

#[derive(Serialize)]
struct Hit<'a> {
    #[serde(flatten)]
    score: &'a ScoredDoc,
    law: &'a str,
    article: &'a str,
    text: &'a str,
}

/// Hybrid search; each hit carries its BM25, vector and hybrid scores.
pub async fn search(State(app): State<Shared>, Body(req): Body<SearchRequest>) -> Result<Json<Value>, ApiError> {
    let index = corpus(&app)?;
    let alpha = check_alpha(req.alpha)?;
    let hits = index.hybrid_search(&req.query, req.k, alpha);
    let hits: Vec<Hit<'_>> = hits
        .iter()
        .map(|h| {
            let doc = index.doc(&h.doc_id).expect("hit comes from the index");
            Hit { score: h, law: &doc.law, article: &doc.article, text: &doc.text }
        })
        .collect();
    Ok(Json(json!({ "query": req.query, "alpha": alpha, "k": req.k, "hits": hits })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandRequest {
    doc_id: String,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_k")]
    k: usize,
}

pub async fn expand(State(app): State<Shared>, Body(req): Body<ExpandRequest>) -> Result<Json<Value>, ApiError> {
    corpus(&app)?;
    let alpha = check_alpha(req.alpha)?;
    let worker = app.clone();
    let expansion = blocking(move || {
        let index = worker.index.as_ref().expect("checked above");
        expand_with_port(&req.doc_id, index, worker.llm.clone(), &worker.llm_params, alpha, req.k)
    })
    .await?
    .map_err(|e| match e {
        ExpandByIdError::UnknownDoc(_) => ApiError::not_found(e.to_string()),
        ExpandByIdError::Expand(_) => ApiError::new(StatusCode::BAD_GATEWAY, "port_failure", e.to_string()),
    })?;
    Ok(Json(serde_json::to_value(expansion).expect("expansion serializes")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeRequest {
    case_text: String,
    /// Corpus document ids to use as the article context.
    #[serde(default)]
    article_ids: Vec<String>,
    /// Articles given inline, e.g. from `extract-articles`; merged after `article_ids`.
    #[serde(default)]
    articles: ArticleMap,
    #[serde(default)]
    max_repair_rounds: Option<usize>,
    /// Store the accepted bundle as a new case.
    #[serde(default)]
    store: bool,
    #[serde(default)]
    actor: Option<String>,
}

pub async fn synthesize(State(app): State<Shared>, Body(req): Body<SynthesizeRequest>) -> Result<Json<Value>, ApiError> {
    let mut articles: ArticleMap = if req.article_ids.is_empty() {
        ArticleMap::new()
    } else {
        let index = corpus(&app)?;
        let docs = req
            .article_ids
            .iter()
            .map(|id| index.doc(id).ok_or_else(|| ApiError::not_found(format!("no document `{id}` in the corpus"))))
            .collect::<Result<Vec<_>, _>>()?;
        articles_from_docs(docs)
    };
    articles.extend(req.articles);
    if articles.is_empty() {
        return Err(ApiError::bad_request("synthesis needs at least one article (article_ids or articles)"));
    }
    let mut options = SynthesisOptions { params: app.llm_params.clone(), ..Default::default() };
    if let Some(n) = req.max_repair_rounds {
        options.max_repair_rounds = n;
    }
    let worker = app.clone();
    let case_text = req.case_text;
    let synthesis =
        blocking(move || synthesize_bundle(&case_text, &articles, worker.llm.as_ref(), &worker.engine, &options)).await??;
    let mut body = serde_json::to_value(&synthesis).expect("synthesis serializes");
    if req.store {
        let actor = req.actor.unwrap_or_else(|| app.actor.clone());
        let version = app.store.put_case(&synthesis.bundle, 0, &actor, Operation::Create)?;
        body["case_version"] = version.into();
    }
    Ok(Json(body))
}
