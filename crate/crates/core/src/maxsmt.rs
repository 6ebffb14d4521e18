//! Weighted minimal correction: the cheapest set of fact revisions that makes
//! the case penalty-free while every law constraint still holds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraint::{eval_bool, Assignment, Constraint, ConstraintBundle, Value};
use crate::engine::{describe_core, Engine, EngineError};
use crate::smtlib::{emit_script, AssertionRef, EmitOptions, Mode, SmtScript, SolverReply, Status};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    #[default]
    LinearSearch,
    CoreGuided,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::LinearSearch => "LINEAR_SEARCH",
            Strategy::CoreGuided => "CORE_GUIDED",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "linear_search" | "linear-search" => Ok(Strategy::LinearSearch),
            "core" | "core_guided" | "core-guided" => Ok(Strategy::CoreGuided),
            other => Err(format!("unknown strategy `{other}` (expected linear or core)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDiff {
    pub var: String,
    /// Fact value before revision; `None` when the case left it unstated.
    pub old: Option<Value>,
    pub new: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub constraint_id: String,
    pub group: String,
    pub weight: u64,
    /// Truth of the constraint under the stated facts (unknown if they leave it open).
    pub original_truth: Option<bool>,
    pub satisfied_under_model: bool,
    pub diffs: Vec<VarDiff>,
    /// `id: old → new` style one-liner.
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub model: Assignment,
    pub delta: Vec<DeltaEntry>,
    pub cost: u64,
    /// Σw − cost.
    pub satisfied_weight: u64,
    pub strategy: Strategy,
    pub checks_performed: usize,
    pub elapsed_ms: f64,
}

impl CorrectionResult {
    pub fn delta_ids(&self) -> BTreeSet<String> {
        self.delta.iter().map(|d| d.constraint_id.clone()).collect()
    }
}

/// Effective weight of each SOFT constraint after applying multiplicative overrides.
pub fn effective_weights(bundle: &ConstraintBundle, overrides: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    bundle
        .soft()
        .map(|c| {
            let factor = overrides.get(&c.id).or_else(|| overrides.get(&c.group)).copied().unwrap_or(1);
            (c.id.clone(), c.effective_weight().saturating_mul(factor))
        })
        .collect()
}

/// Sorted distinct subset sums of `weights`.
fn subset_sums<'a>(weights: impl IntoIterator<Item = &'a u64>) -> Vec<u64> {
    let mut sums = BTreeSet::from([0u64]);
    for &w in weights {
        let shifted: Vec<u64> = sums.iter().map(|s| s + w).collect();
        sums.extend(shifted);
    }
    sums.into_iter().collect()
}

struct Search<'a> {
    engine: &'a Engine,
    bundle: &'a ConstraintBundle,
    weights: BTreeMap<String, u64>,
    checks: usize,
    lower: u64,
    upper: Option<u64>,
}

impl Search<'_> {
    fn relaxation(&mut self, opts: EmitOptions) -> Result<(SmtScript, SolverReply), EngineError> {
        let opts = EmitOptions { pin_penalty: Some(true), weights: self.weights.clone(), ..opts };
        let script = emit_script(self.bundle, Mode::Relaxation, &opts)?;
        match self.engine.run(&script, &mut self.checks) {
            Ok(reply) => Ok((script, reply)),
            Err(EngineError::SolverTimeout { timeout_ms, .. }) => Err(EngineError::SolverTimeout {
                timeout_ms,
                lower_bound: Some(self.lower),
                upper_bound: self.upper,
            }),
            Err(e) => Err(e),
        }
    }

    /// Violated SOFT ids under a model; selectors decide when the evaluator cannot.
    fn violated(&self, reply: &SolverReply) -> BTreeSet<String> {
        let model = reply.model.as_ref().expect("sat reply has a model");
        self.bundle
            .soft()
            .filter(|c| match eval_bool(&c.expr, model) {
                Ok(truth) => !truth,
                Err(_) => reply.selectors.get(&c.id).copied().unwrap_or(false),
            })
            .map(|c| c.id.clone())
            .collect()
    }

    fn cost_of(&self, ids: &BTreeSet<String>) -> u64 {
        ids.iter().map(|id| self.weights[id]).sum()
    }

    fn linear(&mut self) -> Result<SolverReply, EngineError> {
        for k in subset_sums(self.weights.values()) {
            let opts = EmitOptions { bound: Some(k), want_model: Some(true), want_core: Some(false), ..Default::default() };
            let (_, reply) = self.relaxation(opts)?;
            if reply.status == Status::Sat {
                return Ok(reply);
            }
            self.lower = k + 1;
        }
        // The feasibility check already produced a model within the total weight.
        Err(EngineError::NoFeasibleCompliance { core: Vec::new() })
    }

    fn core_guided(&mut self) -> Result<SolverReply, EngineError> {
        let mut relaxed: BTreeSet<String> = BTreeSet::new();
        let mut bound = 0u64;
        loop {
            let opts = EmitOptions {
                relaxed: Some(relaxed.clone()),
                bound: Some(bound),
                want_model: Some(true),
                want_core: Some(true),
                ..Default::default()
            };
            let (script, reply) = self.relaxation(opts)?;
            if reply.status == Status::Sat {
                return Ok(reply);
            }
            let core = reply.core_refs(&script);
            let fresh: Vec<String> = core
                .iter()
                .filter_map(|r| match r {
                    AssertionRef::Constraint(id) if self.weights.contains_key(id) && !relaxed.contains(id) => {
                        Some(id.clone())
                    }
                    _ => None,
                })
                .collect();
            if !fresh.is_empty() {
                relaxed.extend(fresh);
                continue;
            }
            // Only law, the pin and the bound conflict: no cost ≤ bound over the relaxed set exists.
            let next = subset_sums(relaxed.iter().map(|id| &self.weights[id])).into_iter().find(|&s| s > bound);
            match next {
                Some(next) if core.contains(&AssertionRef::CostBound) => {
                    bound = next;
                    self.lower = bound;
                }
                _ => {
                    let core: BTreeSet<AssertionRef> = core.into_iter().collect();
                    return Err(EngineError::NoFeasibleCompliance { core: describe_core(self.bundle, &core) });
                }
            }
        }
    }
}

impl Engine {
    /// Minimum-weight revision of the SOFT facts under which every HARD constraint
    /// holds and the penalty is cleared. Overrides multiply declared weights and
    /// may be keyed by constraint id or group.
    pub fn minimize_violation(
        &self,
        bundle: &ConstraintBundle,
        strategy: Strategy,
        weights_override: &BTreeMap<String, u64>,
    ) -> Result<CorrectionResult, EngineError> {
        self.validated(bundle)?;
        let started = Instant::now();
        let mut search = Search {
            engine: self,
            bundle,
            weights: effective_weights(bundle, weights_override),
            checks: 0,
            lower: 0,
            upper: None,
        };

        // Feasibility of law ∪ {penalty = false} with every fact relaxed.
        let opts = EmitOptions { want_model: Some(true), want_core: Some(true), ..Default::default() };
        let (script, reply) = search.relaxation(opts)?;
        if reply.status == Status::Unsat {
            let core: BTreeSet<AssertionRef> = reply.core_refs(&script).into_iter().collect();
            return Err(EngineError::NoFeasibleCompliance { core: describe_core(bundle, &core) });
        }
        let violated = search.violated(&reply);
        search.upper = Some(search.cost_of(&violated));
        if violated.is_empty() {
            return Ok(finish(bundle, search, reply, strategy, started));
        }

        let reply = match strategy {
            Strategy::LinearSearch => search.linear()?,
            Strategy::CoreGuided => search.core_guided()?,
        };
        Ok(finish(bundle, search, reply, strategy, started))
    }
}

fn finish(
    bundle: &ConstraintBundle,
    search: Search<'_>,
    reply: SolverReply,
    strategy: Strategy,
    started: Instant,
) -> CorrectionResult {
    let violated = search.violated(&reply);
    let model = reply.model.expect("sat reply has a model");
    let delta: Vec<DeltaEntry> = bundle
        .soft()
        .filter(|c| violated.contains(&c.id))
        .map(|c| delta_entry(bundle, c, &model, search.weights[&c.id]))
        .collect();
    let cost = delta.iter().map(|d| d.weight).sum();
    let total: u64 = search.weights.values().sum();
    CorrectionResult {
        model,
        delta,
        cost,
        satisfied_weight: total - cost,
        strategy,
        checks_performed: search.checks,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

fn delta_entry(bundle: &ConstraintBundle, c: &Constraint, model: &Assignment, weight: u64) -> DeltaEntry {
    // Stated facts first; the model fills in whatever the case leaves open.
    let mut original = model.clone();
    for (k, v) in bundle.facts.iter() {
        original.insert(k.clone(), v.clone());
    }
    let original_truth = eval_bool(&c.expr, &original).ok();
    let diffs: Vec<VarDiff> = c
        .expr
        .variables()
        .into_iter()
        .filter_map(|var| {
            let new = model.get(&var)?.clone();
            let old = bundle.facts.get(&var).cloned();
            (old.as_ref() != Some(&new)).then_some(VarDiff { var, old, new })
        })
        .collect();
    let summary = match diffs.as_slice() {
        [] => format!("{}: violated", c.id),
        [d] => format!("{}: {} → {}", c.id, show(&d.old), d.new),
        many => format!(
            "{}: {}",
            c.id,
            many.iter().map(|d| format!("{} {} → {}", d.var, show(&d.old), d.new)).collect::<Vec<_>>().join(", ")
        ),
    };
    DeltaEntry {
        constraint_id: c.id.clone(),
        group: c.group.clone(),
        weight,
        original_truth,
        satisfied_under_model: false,
        diffs,
        summary,
    }
}

fn show(v: &Option<Value>) -> String {
    v.as_ref().map_or_else(|| "unstated".to_string(), ToString::to_string)
}
