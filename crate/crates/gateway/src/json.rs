//! Pulling a JSON value out of model output, which may wrap it in prose or
//! a code fence.

use serde_json::Value;

/// First JSON value in `text` that starts with `open` (`{` or `[`).
pub fn extract_json(text: &str, open: char) -> Option<Value> {
    for (i, _) in text.match_indices(open) {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(v)) = stream.next() {
            return Some(v);
        }
    }
    None
}
