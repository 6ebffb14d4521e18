//! Human-readable correction traces.

use crate::constraint::ConstraintBundle;
use crate::maxsmt::{CorrectionResult, DeltaEntry};

pub const COMPLIANT_LINE: &str = "case is compliant; no revision required";

/// One line per delta member, rendered from the constraint's `description`
/// template when present. Placeholders: `{id}`, `{group}`, `{weight}`,
/// `{old:<var>}` and `{new:<var>}`.
pub fn render_trace(result: &CorrectionResult, bundle: &ConstraintBundle) -> Vec<String> {
    if result.delta.is_empty() {
        return vec![COMPLIANT_LINE.to_string()];
    }
    result
        .delta
        .iter()
        .map(|d| {
            let template = bundle.constraint(&d.constraint_id).and_then(|c| c.meta.get("description"));
            match template {
                Some(t) if t.contains('{') => expand(t, |key| placeholder(key, d, result, bundle)),
                _ => fallback(d),
            }
        })
        .collect()
}

fn placeholder(key: &str, d: &DeltaEntry, result: &CorrectionResult, bundle: &ConstraintBundle) -> Option<String> {
    match key.split_once(':') {
        None => match key {
            "id" => Some(d.constraint_id.clone()),
            "group" => Some(d.group.clone()),
            "weight" => Some(d.weight.to_string()),
            _ => None,
        },
        Some(("old", var)) => {
            Some(bundle.facts.get(var).map_or_else(|| "unstated".to_string(), ToString::to_string))
        }
        Some(("new", var)) => result.model.get(var).map(ToString::to_string),
        Some(_) => None,
    }
}

fn fallback(d: &DeltaEntry) -> String {
    let changes = if d.diffs.is_empty() {
        "no stated value changes".to_string()
    } else {
        d.diffs
            .iter()
            .map(|x| {
                let old = x.old.as_ref().map_or_else(|| "unstated".to_string(), ToString::to_string);
                format!("{}: {} → {}", x.var, old, x.new)
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!("constraint {} ({}) requires revision: {}", d.constraint_id, d.group, changes)
}

/// Replaces `{key}` occurrences using `lookup`; unknown keys are kept verbatim.
fn expand(template: &str, mut lookup: impl FnMut(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                match lookup(key) {
                    Some(v) => out.push_str(&v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
