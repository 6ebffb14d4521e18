use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::emit::{AssertionRef, SmtScript};
use super::sexp::{parse_all, Sexp};
use crate::constraint::{parse_decimal, Assignment, Sort, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverReply {
    pub status: Status,
    /// Complete model over the script's declared variables (SAT only).
    pub model: Option<Assignment>,
    /// Selector values of a RELAXATION model, keyed by constraint id.
    pub selectors: BTreeMap<String, bool>,
    /// Assertion names of the unsat core (UNSAT with cores requested only).
    pub core: Option<Vec<String>>,
    pub raw: String,
    /// `(error ...)` messages the solver printed after the status line.
    pub diagnostics: Vec<String>,
    pub wall_ms: f64,
}

impl SolverReply {
    /// Core names resolved through the script's name map.
    pub fn core_refs(&self, script: &SmtScript) -> Vec<AssertionRef> {
        self.core.iter().flatten().filter_map(|n| script.name_map.get(n).cloned()).collect()
    }

    /// Constraint ids in the core, in reply order.
    pub fn core_ids(&self, script: &SmtScript) -> Vec<String> {
        self.core_refs(script)
            .into_iter()
            .filter_map(|r| match r {
                AssertionRef::Constraint(id) => Some(id),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("solver protocol error: {message} (output: {excerpt:?})")]
pub struct ProtocolError {
    pub message: String,
    /// The offending solver text, kept verbatim for repair prompts.
    pub excerpt: String,
}

impl ProtocolError {
    fn new(message: impl Into<String>, excerpt: impl Into<String>) -> Self {
        let mut excerpt: String = excerpt.into();
        if excerpt.len() > 400 {
            let cut = (0..=400).rev().find(|i| excerpt.is_char_boundary(*i)).unwrap_or(0);
            excerpt.truncate(cut);
            excerpt.push('…');
        }
        Self { message: message.into(), excerpt }
    }
}

pub fn parse_reply(raw: &str, script: &SmtScript) -> Result<SolverReply, ProtocolError> {
    let items = parse_all(raw).map_err(|e| ProtocolError::new(e.to_string(), raw))?;
    let mut iter = items.iter().filter(|s| s.atom() != Some("success"));

    let status = match iter.next() {
        None => return Err(ProtocolError::new("empty solver output", raw)),
        Some(Sexp::Atom(a)) if a == "sat" => Status::Sat,
        Some(Sexp::Atom(a)) if a == "unsat" => Status::Unsat,
        Some(Sexp::Atom(a)) if a == "unknown" => Status::Unknown,
        Some(other) if other.head() == Some("error") => {
            return Err(ProtocolError::new(format!("solver error: {}", error_text(other)), raw))
        }
        Some(other) => return Err(ProtocolError::new(format!("expected status, found `{other}`"), raw)),
    };

    let mut model = None;
    let mut selectors = BTreeMap::new();
    let mut core = None;
    let mut diagnostics = Vec::new();
    for item in iter {
        if item.head() == Some("error") {
            diagnostics.push(error_text(item));
            continue;
        }
        let Some(list) = item.list() else {
            return Err(ProtocolError::new(format!("unexpected token `{item}` after status"), raw));
        };
        let is_core = if list.is_empty() {
            status == Status::Unsat
        } else {
            list.iter().all(|s| s.atom().is_some()) && item.head() != Some("model")
        };
        if is_core {
            let names: Vec<String> = list.iter().map(|s| s.atom().unwrap().to_string()).collect();
            for name in &names {
                if !script.name_map.contains_key(name) {
                    return Err(ProtocolError::new(format!("core names unknown assertion `{name}`"), raw));
                }
            }
            core = Some(names);
        } else {
            let (m, sel) = parse_model(list, script).map_err(|m| ProtocolError::new(m, raw))?;
            model = Some(m);
            selectors = sel;
        }
    }

    match status {
        Status::Sat => {
            core = None;
            if script.model_requested && model.is_none() {
                return Err(ProtocolError::new("sat reply carries no model", raw));
            }
        }
        Status::Unsat => {
            model = None;
            selectors.clear();
            if !script.core_requested {
                core = None;
            } else if core.is_none() {
                return Err(ProtocolError::new("unsat reply carries no unsat core", raw));
            }
        }
        Status::Unknown => {
            model = None;
            selectors.clear();
            core = None;
        }
    }
    Ok(SolverReply { status, model, selectors, core, raw: raw.to_string(), diagnostics, wall_ms: 0.0 })
}

fn error_text(item: &Sexp) -> String {
    match item.list().and_then(|l| l.get(1)) {
        Some(Sexp::Str(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    }
}

fn parse_model(list: &[Sexp], script: &SmtScript) -> Result<(Assignment, BTreeMap<String, bool>), String> {
    let entries = match list.first().and_then(Sexp::atom) {
        Some("model") => &list[1..],
        _ => list,
    };
    let mut model = Assignment::new();
    let mut selectors = BTreeMap::new();
    for entry in entries {
        let parts = entry.list().ok_or_else(|| format!("malformed model entry `{entry}`"))?;
        match parts.first().and_then(Sexp::atom) {
            Some("define-fun") => {}
            Some(_) => continue,
            None => return Err(format!("malformed model entry `{entry}`")),
        }
        let [_, name, params, _sort, value] = parts else {
            return Err(format!("malformed define-fun `{entry}`"));
        };
        let name = name.atom().ok_or_else(|| format!("malformed define-fun `{entry}`"))?;
        if !params.list().is_some_and(<[Sexp]>::is_empty) {
            continue;
        }
        if let Some(id) = script.selectors.get(name) {
            let v = model_value(value, Sort::Bool).and_then(|v| v.as_bool());
            selectors.insert(id.clone(), v.ok_or_else(|| format!("selector `{name}` has value `{value}`"))?);
            continue;
        }
        let Some(&sort) = script.vars.get(name) else { continue };
        let v = model_value(value, sort).ok_or_else(|| format!("cannot read value `{value}` for `{name}` ({sort})"))?;
        model.insert(name, v);
    }
    for (name, sort) in &script.vars {
        if !model.contains(name) {
            model.insert(name.clone(), sort.zero());
        }
    }
    for id in script.selectors.values() {
        selectors.entry(id.clone()).or_insert(false);
    }
    Ok((model, selectors))
}

fn model_value(s: &Sexp, sort: Sort) -> Option<Value> {
    match sort {
        Sort::Bool => match s.atom()? {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
        Sort::Int => {
            let r = rational(s)?;
            r.is_integer().then(|| Value::Int(r.to_integer()))
        }
        Sort::Real => rational(s).map(Value::Real),
    }
}

fn rational(s: &Sexp) -> Option<BigRational> {
    match s {
        Sexp::Atom(a) => {
            if a.starts_with(|c: char| c.is_ascii_digit()) {
                parse_decimal(a)
            } else {
                None
            }
        }
        Sexp::List(items) => match (items.first()?.atom()?, &items[1..]) {
            ("-", [x]) => Some(-rational(x)?),
            ("-", [x, y]) => Some(rational(x)? - rational(y)?),
            ("+", rest) if !rest.is_empty() => {
                rest.iter().try_fold(BigRational::from_integer(BigInt::zero()), |acc, x| Some(acc + rational(x)?))
            }
            ("/", [x, y]) => {
                let d = rational(y)?;
                (!d.is_zero()).then(|| rational(x)).flatten().map(|n| n / d)
            }
            ("to_real", [x]) => rational(x),
            _ => None,
        },
        Sexp::Str(_) => None,
    }
}
