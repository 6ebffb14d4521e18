//! Lower-cased Unicode word tokens. Runs of CJK characters carry no word
//! boundaries, so in bigram mode they become overlapping character pairs.

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub cjk_bigrams: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { cjk_bigrams: true }
    }
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F
        | 0x3040..=0x30FF | 0xAC00..=0xD7AF)
}

impl Tokenizer {
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        let mut out = Vec::new();
        // Consecutive CJK words (adjacent in the source) collected as one run.
        let mut run: Vec<char> = Vec::new();
        let mut run_end = usize::MAX;
        for (start, word) in lower.unicode_word_indices() {
            let cjk = self.cjk_bigrams && word.chars().all(is_cjk);
            if cjk {
                if start != run_end {
                    flush(&mut run, &mut out);
                }
                run.extend(word.chars());
                run_end = start + word.len();
            } else {
                flush(&mut run, &mut out);
                out.push(word.to_string());
            }
        }
        flush(&mut run, &mut out);
        out
    }
}

fn flush(run: &mut Vec<char>, out: &mut Vec<String>) {
    match run.len() {
        0 => {}
        1 => out.push(run[0].to_string()),
        _ => out.extend(run.windows(2).map(|w| w.iter().collect())),
    }
    run.clear();
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in", "is", "it", "its", "of", "on",
    "or", "shall", "such", "that", "the", "this", "to", "was", "were", "which", "with", "any", "may", "not", "no",
    "all", "if", "than", "under", "within", "其", "之", "的", "及", "或", "者",
];

/// Tokens that are neither stopwords nor purely numeric.
pub fn content_words(text: &str) -> Vec<String> {
    Tokenizer::default()
        .tokens(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()) && !t.chars().all(|c| c.is_ascii_digit() || c == '.'))
        .collect()
}
