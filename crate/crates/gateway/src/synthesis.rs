//! Constraint synthesis with repair: ask the port for a bundle, check it, and
//! feed the exact failure back until a bundle passes or rounds run out.
//!
//! A bundle is accepted when it validates, its law constraints are
//! consistent, and the case is illegal (facts force the penalty). Nothing
//! reaches the solver before validation passes.

use serde::{Deserialize, Serialize};

use lexverify_core::constraint::{validate_bundle, ConstraintBundle};
use lexverify_core::engine::{Engine, Verdict};
use lexverify_core::smtlib::Status;
use lexverify_core::BUNDLE_SCHEMA;
use lexverify_text::ArticleMap;

use crate::json::extract_json;
use crate::port::{CompletionParams, CompletionPort};
use crate::prompts::{REPAIR, SYNTHESIZE};

pub const DEFAULT_MAX_ROUNDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttemptOutcome {
    Accepted,
    PortFailure,
    ParseError,
    Invalid,
    LawInconsistent,
    CaseNotIllegal,
    SolverError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisAttempt {
    /// Numbered from 1.
    pub attempt: usize,
    pub prompt: String,
    pub raw_output: String,
    pub outcome: AttemptOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<ConstraintBundle>,
    /// The message fed back in the next repair prompt.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Verdicts, when the bundle got as far as the solver.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub solver_feedback: Vec<Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub bundle: ConstraintBundle,
    pub attempts: Vec<SynthesisAttempt>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("no acceptable bundle after {} attempts; last error: {}", .attempts.len(), last_error(.attempts))]
    SynthesisExhausted { attempts: Vec<SynthesisAttempt> },
    #[error("max_repair_rounds must be at least 1")]
    NoRounds,
}

fn last_error(attempts: &[SynthesisAttempt]) -> String {
    attempts.last().and_then(|a| a.error.clone()).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub max_repair_rounds: usize,
    pub params: CompletionParams,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { max_repair_rounds: DEFAULT_MAX_ROUNDS, params: CompletionParams::default() }
    }
}

/// Runs one reply through parse, validate and the two solver checks.
fn judge(raw: &str, engine: &Engine) -> (AttemptOutcome, Option<ConstraintBundle>, Option<String>, Vec<Verdict>) {
    let Some(value) = extract_json(raw, '{') else {
        return (AttemptOutcome::ParseError, None, Some("reply contains no JSON object".into()), vec![]);
    };
    let mut bundle: ConstraintBundle = match serde_json::from_value(value) {
        Ok(b) => b,
        Err(e) => return (AttemptOutcome::ParseError, None, Some(format!("JSON is not a constraint bundle: {e}")), vec![]),
    };
    bundle.normalize_facts();
    let errors = validate_bundle(&bundle);
    if !errors.is_empty() {
        let msg = errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return (AttemptOutcome::Invalid, Some(bundle), Some(format!("bundle failed validation: {msg}")), vec![]);
    }
    let law = match engine.check_law_consistency(&bundle) {
        Ok(v) => v,
        Err(e) => return (AttemptOutcome::SolverError, Some(bundle), Some(format!("solver error on the law check: {e}")), vec![]),
    };
    if law.status != Status::Sat {
        let core = law.core.iter().map(|m| format!("{} ({})", m.id, m.group)).collect::<Vec<_>>().join(", ");
        let msg = format!("the HARD constraints are inconsistent ({:?}); conflicting constraints: {core}", law.status);
        return (AttemptOutcome::LawInconsistent, Some(bundle), Some(msg), vec![law]);
    }
    let case = match engine.check_case_illegality(&bundle) {
        Ok(v) => v,
        Err(e) => {
            return (AttemptOutcome::SolverError, Some(bundle), Some(format!("solver error on the case check: {e}")), vec![law])
        }
    };
    match case.status {
        Status::Unsat => (AttemptOutcome::Accepted, Some(bundle), None, vec![law, case]),
        status => {
            let msg = format!(
                "the stated facts do not force the penalty: HARD constraints, SOFT facts and {} = false are {:?} together; \
                 the penalty definition or the facts are missing a condition",
                bundle.penalty_var,
                status
            );
            (AttemptOutcome::CaseNotIllegal, Some(bundle), Some(msg), vec![law, case])
        }
    }
}

pub fn synthesize_bundle(
    case_text: &str,
    articles: &ArticleMap,
    port: &dyn CompletionPort,
    engine: &Engine,
    options: &SynthesisOptions,
) -> Result<Synthesis, SynthesisError> {
    if options.max_repair_rounds == 0 {
        return Err(SynthesisError::NoRounds);
    }
    let articles_json = serde_json::to_string_pretty(articles).expect("articles serialize");
    let mut attempts: Vec<SynthesisAttempt> = Vec::new();
    for attempt in 1..=options.max_repair_rounds {
        let prompt = match attempts.last() {
            None => SYNTHESIZE.render(&[("schema", BUNDLE_SCHEMA), ("articles", &articles_json), ("case_text", case_text)]),
            Some(prev) => REPAIR.render(&[
                ("error", prev.error.as_deref().unwrap_or_default()),
                ("previous", &prev.raw_output),
                ("schema", BUNDLE_SCHEMA),
                ("articles", &articles_json),
                ("case_text", case_text),
            ]),
        };
        let (raw_output, outcome, bundle, error, solver_feedback) = match port.complete(&prompt, &options.params) {
            Ok(raw) => {
                let (outcome, bundle, error, feedback) = judge(&raw, engine);
                (raw, outcome, bundle, error, feedback)
            }
            Err(e) => (String::new(), AttemptOutcome::PortFailure, None, Some(format!("completion failed: {e}")), vec![]),
        };
        let accepted = outcome == AttemptOutcome::Accepted;
        attempts.push(SynthesisAttempt { attempt, prompt, raw_output, outcome, bundle, error, solver_feedback });
        if accepted {
            let bundle = attempts.last().and_then(|a| a.bundle.clone()).expect("accepted attempt has a bundle");
            return Ok(Synthesis { bundle, attempts });
        }
    }
    Err(SynthesisError::SynthesisExhausted { attempts })
}
