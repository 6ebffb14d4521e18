//! Check-and-correct over many bundles. Cases are independent, so with the
//! `parallel` feature they fan out over the rayon pool; without it (or with
//! [`Execution::Sequential`]) they run one after another.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintBundle;
use crate::engine::Engine;
use crate::maxsmt::Strategy;
use crate::smtlib::Status;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether this build can actually run cases in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub law: Option<Status>,
    pub case: Option<Status>,
    pub cost: Option<u64>,
    pub delta: Vec<String>,
    pub checks_performed: usize,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub outcomes: Vec<CaseOutcome>,
    pub execution: Execution,
    pub elapsed_ms: f64,
}

impl BatchReport {
    pub fn failures(&self) -> impl Iterator<Item = &CaseOutcome> {
        self.outcomes.iter().filter(|o| o.error.is_some())
    }
}

/// Law consistency, case illegality and, for illegal cases, the minimal correction.
pub fn check_and_correct(engine: &Engine, bundle: &ConstraintBundle, strategy: Strategy) -> CaseOutcome {
    let started = Instant::now();
    let mut out = CaseOutcome {
        case_id: bundle.case_id.clone(),
        law: None,
        case: None,
        cost: None,
        delta: Vec::new(),
        checks_performed: 0,
        elapsed_ms: 0.0,
        error: None,
    };
    let result = (|| {
        let law = engine.check_law_consistency(bundle)?;
        out.law = Some(law.status);
        out.checks_performed += law.checks_performed;
        if law.status != Status::Sat {
            return Ok(());
        }
        let case = engine.check_case_illegality(bundle)?;
        out.case = Some(case.status);
        out.checks_performed += case.checks_performed;
        let fix = engine.minimize_violation(bundle, strategy, &BTreeMap::new())?;
        out.cost = Some(fix.cost);
        out.delta = fix.delta.into_iter().map(|d| d.summary).collect();
        out.checks_performed += fix.checks_performed;
        Ok::<_, crate::engine::EngineError>(())
    })();
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    out
}

pub fn run_batch(engine: &Engine, bundles: &[ConstraintBundle], strategy: Strategy, execution: Execution) -> BatchReport {
    let started = Instant::now();
    let run = |b: &ConstraintBundle| check_and_correct(engine, b, strategy);
    let outcomes = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            bundles.par_iter().map(run).collect()
        }
        _ => bundles.iter().map(run).collect(),
    };
    let execution = if Execution::parallel_available() { execution } else { Execution::Sequential };
    BatchReport { outcomes, execution, elapsed_ms: started.elapsed().as_secs_f64() * 1e3 }
}
