//! Rule-based extraction of articles and clauses from plain statute text.
//!
//! Lines are processed one at a time by a small state machine: headings are
//! skipped, an article header opens a new article and closes the open
//! clause, a clause line starts a new clause, and any other line continues
//! the open clause or, if none is open, the article's content.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::numerals::normalize_number;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub clauses: Vec<String>,
    pub content: String,
}

/// Article number → article, in order of first appearance.
pub type ArticleMap = IndexMap<String, Article>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Non-blank lines before the first article header.
    pub discarded_lines: usize,
    pub headings_skipped: usize,
    pub blank_lines: usize,
    /// Headers naming an article that was already open earlier; its text is
    /// appended rather than replaced.
    pub reopened_articles: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub articles: ArticleMap,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("unknown language `{0}` (expected en or zh)")]
    UnknownLanguage(String),
    #[error("pattern `{field}`: {message}")]
    BadRegex { field: String, message: String },
    #[error("article pattern needs a `num` capture group")]
    MissingNumGroup,
}

impl FromStr for Language {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::En),
            "zh" | "chinese" | "zh-tw" | "zh-hant" => Ok(Language::Zh),
            other => Err(PatternError::UnknownLanguage(other.into())),
        }
    }
}

/// Serialized form of a [`PatternSet`], as read from `--patterns cfg.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternConfig {
    /// Lines matching any of these are skipped.
    pub headings: Vec<String>,
    /// Article header. Named groups: `num` (required), `sub` and `title` (optional).
    pub article: String,
    pub clause: String,
    /// Inserted between a continuation line and the text it continues.
    #[serde(default = "space")]
    pub joiner: String,
    /// Written between `sub` and `num` in the article key.
    #[serde(default = "dash")]
    pub sub_separator: String,
    /// How [`render_articles`] writes a header; `{num}` is replaced by the key.
    #[serde(default = "en_header")]
    pub header_template: String,
}

fn space() -> String {
    " ".into()
}
fn dash() -> String {
    "-".into()
}
fn en_header() -> String {
    "Article {num}".into()
}

#[derive(Clone, Debug)]
pub struct PatternSet {
    config: PatternConfig,
    headings: Vec<Regex>,
    article: Regex,
    clause: Regex,
}

impl PartialEq for PatternSet {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
    }
}

impl PatternSet {
    pub fn new(config: PatternConfig) -> Result<Self, PatternError> {
        let compile = |field: &str, re: &str| {
            Regex::new(re).map_err(|e| PatternError::BadRegex { field: field.into(), message: e.to_string() })
        };
        let headings = config.headings.iter().map(|h| compile("headings", h)).collect::<Result<Vec<_>, _>>()?;
        let article = compile("article", &config.article)?;
        if !article.capture_names().any(|n| n == Some("num")) {
            return Err(PatternError::MissingNumGroup);
        }
        let clause = compile("clause", &config.clause)?;
        Ok(PatternSet { config, headings, article, clause })
    }

    pub fn from_json_str(s: &str) -> Result<Self, PatternError> {
        let config: PatternConfig =
            serde_json::from_str(s).map_err(|e| PatternError::BadRegex { field: "config".into(), message: e.to_string() })?;
        Self::new(config)
    }

    pub fn config(&self) -> &PatternConfig {
        &self.config
    }

    fn is_heading(&self, line: &str) -> bool {
        self.headings.iter().any(|h| h.is_match(line))
    }

    /// Article key and title of a header line.
    fn header(&self, line: &str) -> Option<(String, String)> {
        let caps = self.article.captures(line)?;
        let mut key = normalize_number(caps.name("num")?.as_str());
        if let Some(sub) = caps.name("sub") {
            key.push_str(&self.config.sub_separator);
            key.push_str(&normalize_number(sub.as_str()));
        }
        let title = caps.name("title").map_or("", |m| m.as_str()).trim().to_string();
        Some((key, title))
    }
}

const ZH_NUM: &str = "[0-9０-９零〇一二兩两三四五六七八九十百千]+";

pub fn default_patterns(language: Language) -> PatternSet {
    let config = match language {
        Language::En => PatternConfig {
            headings: vec![r"^(?i:chapter|section|part|division|subchapter)\s+[0-9IVXLCDMivxlcdm]+\b".into()],
            // A lower-case word after the number means a sentence citing the article, not a header.
            article: r"^Article\s+(?P<num>\d+(?:-\d+)*[A-Za-z]?)(?:\s+(?P<title>[^a-z].*))?$".into(),
            clause: r"^\d+\.\s".into(),
            joiner: space(),
            sub_separator: dash(),
            header_template: en_header(),
        },
        Language::Zh => PatternConfig {
            headings: vec![format!(r"^第\s*{ZH_NUM}\s*[章節节編编篇]")],
            // Rendered keys such as `143-4` come back in ASCII form.
            article: format!(r"^第\s*(?P<num>[0-9]+(?:-[0-9]+)+|{ZH_NUM})\s*[條条](?:\s*之\s*(?P<sub>{ZH_NUM}))?\s*(?P<title>.*)$"),
            clause: "^[一二三四五六七八九十]+、".into(),
            joiner: String::new(),
            sub_separator: dash(),
            header_template: "第{num}條".into(),
        },
    };
    PatternSet::new(config).expect("built-in patterns compile")
}

/// Strips and collapses all Unicode whitespace to single spaces.
pub fn normalize_line(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn append(target: &mut String, joiner: &str, line: &str) {
    if !target.is_empty() {
        target.push_str(joiner);
    }
    target.push_str(line);
}

pub fn extract_articles(text: &str, patterns: &PatternSet) -> Extraction {
    let joiner = patterns.config.joiner.as_str();
    let mut out = Extraction::default();
    let mut open: Option<String> = None;
    let mut in_clause = false;
    for raw in text.lines() {
        let line = normalize_line(raw);
        if line.is_empty() {
            out.diagnostics.blank_lines += 1;
            continue;
        }
        if patterns.is_heading(&line) {
            out.diagnostics.headings_skipped += 1;
            continue;
        }
        if let Some((key, title)) = patterns.header(&line) {
            match out.articles.get_mut(&key) {
                Some(existing) => {
                    out.diagnostics.reopened_articles.push(key.clone());
                    if !title.is_empty() {
                        append(&mut existing.title, joiner, &title);
                    }
                }
                None => {
                    out.articles.insert(key.clone(), Article { title, ..Article::default() });
                }
            }
            open = Some(key);
            in_clause = false;
            continue;
        }
        let Some(key) = &open else {
            out.diagnostics.discarded_lines += 1;
            continue;
        };
        let article = out.articles.get_mut(key).expect("open article exists");
        if patterns.clause.is_match(&line) {
            article.clauses.push(line);
            in_clause = true;
        } else if in_clause {
            let last = article.clauses.last_mut().expect("open clause exists");
            append(last, joiner, &line);
        } else {
            append(&mut article.content, joiner, &line);
        }
    }
    out
}

/// Plain text that extracts back to `articles` under the same patterns.
pub fn render_articles(articles: &ArticleMap, patterns: &PatternSet) -> String {
    let mut out = String::new();
    for (key, a) in articles {
        out.push_str(&patterns.config.header_template.replace("{num}", key));
        if !a.title.is_empty() {
            out.push(' ');
            out.push_str(&a.title);
        }
        out.push('\n');
        for line in std::iter::once(&a.content).filter(|c| !c.is_empty()).chain(&a.clauses) {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::En => "en",
            Language::Zh => "zh",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en(text: &str) -> ArticleMap {
        extract_articles(text, &default_patterns(Language::En)).articles
    }

    #[test]
    fn empty_and_headerless_text() {
        assert!(en("").is_empty());
        let e = extract_articles("1. a clause\n2. another", &default_patterns(Language::En));
        assert!(e.articles.is_empty());
        assert_eq!(e.diagnostics.discarded_lines, 2);
    }

    #[test]
    fn header_forms() {
        let p = default_patterns(Language::En);
        assert_eq!(p.header("Article 143-6"), Some(("143-6".into(), String::new())));
        assert_eq!(p.header("Article 12 Definitions"), Some(("12".into(), "Definitions".into())));
        assert_eq!(p.header("Article 12 of this Act applies"), None);
        assert!(p.is_heading("Chapter II"));
        assert!(p.header("Chapter II").is_none());
        let z = default_patterns(Language::Zh);
        assert_eq!(z.header("第一四三條之四"), Some(("143-4".into(), String::new())));
        assert!(z.is_heading("第五章 罰則"));
    }

    #[test]
    fn unknown_language() {
        assert_eq!("fr".parse::<Language>(), Err(PatternError::UnknownLanguage("fr".into())));
    }

    #[test]
    fn config_overrides() {
        let mut cfg = default_patterns(Language::En).config().clone();
        cfg.clause = r"^\(\w\)\s".into();
        let p = PatternSet::new(cfg).unwrap();
        let m = extract_articles("Article 1\n(a) first\n1. not a clause here", &p).articles;
        assert_eq!(m["1"].clauses, vec!["(a) first 1. not a clause here".to_string()]);
        let bad = PatternConfig { article: "^Article".into(), ..p.config().clone() };
        assert_eq!(PatternSet::new(bad).unwrap_err(), PatternError::MissingNumGroup);
    }

    #[test]
    fn reopened_article_keeps_earlier_text() {
        let e = extract_articles("Article 1\nfirst\nArticle 2\nx\nArticle 1\n1. later", &default_patterns(Language::En));
        assert_eq!(e.articles["1"].content, "first");
        assert_eq!(e.articles["1"].clauses, vec!["1. later".to_string()]);
        assert_eq!(e.diagnostics.reopened_articles, vec!["1".to_string()]);
    }
}
