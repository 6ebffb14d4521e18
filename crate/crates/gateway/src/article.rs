use serde::{Deserialize, Serialize};

use lexverify_text::articles::{extract_articles, Article};
use lexverify_text::{default_patterns, Doc, Language};

/// An article as generative prompts see it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseArticle {
    #[serde(default)]
    pub doc_id: String,
    #[serde(default)]
    pub law: String,
    #[serde(default)]
    pub article: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub clauses: Vec<String>,
    #[serde(default)]
    pub content: String,
}

impl BaseArticle {
    pub fn from_article(key: &str, article: &Article, law: &str) -> Self {
        BaseArticle {
            doc_id: key.into(),
            law: law.into(),
            article: key.into(),
            title: article.title.clone(),
            clauses: article.clauses.clone(),
            content: article.content.clone(),
        }
    }

    /// Splits a corpus document's text into content and numbered clauses. The
    /// title is taken from the document's law and article metadata.
    pub fn from_doc(doc: &Doc) -> Self {
        let patterns = default_patterns(Language::En);
        let parsed = extract_articles(&format!("Article 1\n{}", doc.text), &patterns).articles;
        let body = parsed.get("1").cloned().unwrap_or_default();
        let title = match (doc.law.trim(), doc.article.trim()) {
            ("", "") => String::new(),
            (law, "") => law.to_string(),
            ("", art) => format!("Article {art}"),
            (law, art) => format!("{law} Article {art}"),
        };
        BaseArticle {
            doc_id: doc.doc_id.clone(),
            law: doc.law.clone(),
            article: doc.article.clone(),
            title,
            clauses: body.clauses,
            content: body.content,
        }
    }

    pub fn full_text(&self) -> String {
        let mut parts = vec![self.title.as_str(), self.content.as_str()];
        parts.extend(self.clauses.iter().map(String::as_str));
        parts.retain(|p| !p.is_empty());
        parts.join("\n")
    }

    pub fn is_empty(&self) -> bool {
        self.title.trim().is_empty() && self.content.trim().is_empty() && self.clauses.iter().all(|c| c.trim().is_empty())
    }
}
