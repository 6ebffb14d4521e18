use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constraint::{validate_bundle, Assignment, ConstraintBundle, Kind, ValidationError};
use crate::smtlib::{emit_script, AssertionRef, EmitError, EmitOptions, Mode, SmtScript, SolverReply, Status};
use crate::solver::{Capabilities, SmtBackend, SolverConfig, SolverError};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("bundle is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Solver(SolverError),
    #[error("solver timed out after {timeout_ms} ms (certified lower bound {lower_bound:?}, best known cost {upper_bound:?})")]
    SolverTimeout { timeout_ms: u64, lower_bound: Option<u64>, upper_bound: Option<u64> },
    #[error("solver answered unknown on a {mode:?} check")]
    Inconclusive { mode: Mode },
    #[error("the configured solver does not produce unsat cores; core-dependent operations are unavailable")]
    CoresUnsupported,
    #[error("case is not illegal: HARD ∪ facts ∪ {{penalty = false}} is satisfiable")]
    NotIllegal,
    #[error("no feasible compliance: hard constraints with penalty = false are inconsistent")]
    NoFeasibleCompliance { core: Vec<CoreMember> },
}

impl From<SolverError> for EngineError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Timeout { timeout_ms } => {
                EngineError::SolverTimeout { timeout_ms, lower_bound: None, upper_bound: None }
            }
            other => EngineError::Solver(other),
        }
    }
}

/// Where a core member comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Origin {
    Hard,
    Soft,
    /// The `penalty = false` assertion.
    Pin,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoreMember {
    pub id: String,
    pub group: String,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Consistency,
    Illegality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: CheckKind,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Assignment>,
    /// Named core (UNSAT only), minimized so every member is necessary.
    pub core: Vec<CoreMember>,
    pub core_groups: Vec<String>,
    pub checks_performed: usize,
    pub elapsed_ms: f64,
}

/// Verification entry point bound to one solver backend.
#[derive(Clone)]
pub struct Engine {
    backend: Arc<dyn SmtBackend>,
    capabilities: Option<Capabilities>,
    pub limits: EnumerationLimits,
}

/// Caps on core exposure inside one enumeration round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub max_cores_per_round: usize,
    pub max_checks_per_round: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { max_cores_per_round: 64, max_checks_per_round: 4000 }
    }
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("capabilities", &self.capabilities).field("limits", &self.limits).finish()
    }
}

impl Engine {
    pub fn new(backend: impl SmtBackend + 'static) -> Self {
        Self { backend: Arc::new(backend), capabilities: None, limits: EnumerationLimits::default() }
    }

    /// Probes the solver first; core-dependent checks are refused when it lacks cores.
    pub fn connect(cfg: SolverConfig) -> Result<Self, SolverError> {
        let caps = cfg.probe()?;
        Ok(Self::new(cfg).with_capabilities(caps))
    }

    pub fn with_capabilities(mut self, caps: Capabilities) -> Self {
        self.capabilities = Some(caps);
        self
    }

    pub fn capabilities(&self) -> Option<&Capabilities> {
        self.capabilities.as_ref()
    }

    pub fn timeout_ms(&self) -> u64 {
        self.backend.timeout_ms()
    }

    pub(crate) fn require_cores(&self) -> Result<(), EngineError> {
        match &self.capabilities {
            Some(c) if !c.unsat_cores => Err(EngineError::CoresUnsupported),
            _ => Ok(()),
        }
    }

    pub(crate) fn validated(&self, bundle: &ConstraintBundle) -> Result<(), EngineError> {
        let errors = validate_bundle(bundle);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(EngineError::Invalid(errors))
        }
    }

    /// Runs a script, refusing UNKNOWN.
    pub(crate) fn run(&self, script: &SmtScript, checks: &mut usize) -> Result<SolverReply, EngineError> {
        *checks += 1;
        let reply = self.backend.check(script)?;
        if reply.status == Status::Unknown {
            return Err(EngineError::Inconclusive { mode: script.mode });
        }
        Ok(reply)
    }

    /// Decides the HARDENED subset `items`; on UNSAT returns the solver core.
    pub(crate) fn check_items(
        &self,
        bundle: &ConstraintBundle,
        items: &BTreeSet<AssertionRef>,
        checks: &mut usize,
    ) -> Result<Option<BTreeSet<AssertionRef>>, EngineError> {
        let active = items
            .iter()
            .filter_map(|r| match r {
                AssertionRef::Constraint(id) => Some(id.clone()),
                _ => None,
            })
            .collect();
        let opts = EmitOptions {
            active: Some(active),
            pin_penalty: Some(items.contains(&AssertionRef::PenaltyPin)),
            want_model: Some(false),
            want_core: Some(true),
            ..EmitOptions::default()
        };
        let script = emit_script(bundle, Mode::Hardened, &opts)?;
        let reply = self.run(&script, checks)?;
        Ok(match reply.status {
            Status::Unsat => Some(reply.core_refs(&script).into_iter().collect()),
            _ => None,
        })
    }

    /// Deletion-based shrinking of an unsatisfiable item set to a minimal one.
    pub(crate) fn minimize_core(
        &self,
        bundle: &ConstraintBundle,
        core: BTreeSet<AssertionRef>,
        checks: &mut usize,
    ) -> Result<BTreeSet<AssertionRef>, EngineError> {
        let mut current = core;
        let mut kept = BTreeSet::new();
        loop {
            let Some(candidate) = current.iter().find(|m| !kept.contains(*m)).cloned() else {
                return Ok(current);
            };
            let mut trial = current.clone();
            trial.remove(&candidate);
            match self.check_items(bundle, &trial, checks)? {
                Some(smaller) => {
                    // The solver's core of the trial set may drop further members at once.
                    current = smaller.intersection(&trial).cloned().collect();
                    if current.is_empty() {
                        current = trial;
                    }
                }
                None => {
                    kept.insert(candidate);
                }
            }
        }
    }

    /// Solves the HARD constraints alone.
    pub fn check_law_consistency(&self, bundle: &ConstraintBundle) -> Result<Verdict, EngineError> {
        self.validated(bundle)?;
        self.verdict(bundle, Mode::Consistency, CheckKind::Consistency)
    }

    /// Solves HARD ∪ facts ∪ {penalty = false}; UNSAT certifies the violation.
    pub fn check_case_illegality(&self, bundle: &ConstraintBundle) -> Result<Verdict, EngineError> {
        self.validated(bundle)?;
        self.verdict(bundle, Mode::Illegality, CheckKind::Illegality)
    }

    fn verdict(&self, bundle: &ConstraintBundle, mode: Mode, check: CheckKind) -> Result<Verdict, EngineError> {
        self.require_cores()?;
        let started = std::time::Instant::now();
        let mut checks = 0;
        let script = emit_script(bundle, mode, &EmitOptions::default())?;
        let reply = self.run(&script, &mut checks)?;
        let mut core = Vec::new();
        if reply.status == Status::Unsat {
            let raw: BTreeSet<AssertionRef> = reply.core_refs(&script).into_iter().collect();
            let minimal = self.minimize_core(bundle, raw, &mut checks)?;
            core = describe_core(bundle, &minimal);
        }
        let core_groups = core_groups(&core);
        Ok(Verdict {
            check,
            status: reply.status,
            model: reply.model,
            core,
            core_groups,
            checks_performed: checks,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

pub(crate) fn describe_core(bundle: &ConstraintBundle, items: &BTreeSet<AssertionRef>) -> Vec<CoreMember> {
    let mut out: Vec<CoreMember> = items
        .iter()
        .filter_map(|r| match r {
            AssertionRef::Constraint(id) => bundle.constraint(id).map(|c| CoreMember {
                id: c.id.clone(),
                group: c.group.clone(),
                origin: if c.kind == Kind::Hard { Origin::Hard } else { Origin::Soft },
            }),
            AssertionRef::PenaltyPin => Some(CoreMember {
                id: crate::smtlib::PIN_NAME.to_string(),
                group: format!("pin:{}", bundle.penalty_var),
                origin: Origin::Pin,
            }),
            AssertionRef::CostBound => None,
        })
        .collect();
    out.sort_by(|a, b| (a.origin, &a.group, &a.id).cmp(&(b.origin, &b.group, &b.id)));
    out
}

/// Groups of constraint members, sorted and deduplicated.
pub fn core_groups(core: &[CoreMember]) -> Vec<String> {
    let set: BTreeSet<&str> = core.iter().filter(|m| m.origin != Origin::Pin).map(|m| m.group.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}
