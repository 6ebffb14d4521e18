//! Illegal-term enumeration over repeated hardened checks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintBundle;
use crate::engine::{describe_core, Engine, EngineError, Origin};
use crate::smtlib::AssertionRef;

/// One illegal term: a statutory group and the HARD constraint ids traced to it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub group: String,
    pub ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundDetail {
    /// Minimal cores exposed in this round, as constraint ids (the pin included).
    pub cores: Vec<Vec<String>>,
    /// SOFT constraints removed after the round.
    pub dropped: Vec<String>,
    /// Whether every minimal core of the round's working set was exposed.
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IllegalTermReport {
    pub terms: Vec<Term>,
    /// Per UNSAT round, the ids of all core members exposed in it.
    pub rounds: Vec<Vec<String>>,
    pub round_details: Vec<RoundDetail>,
    pub sat_reached: bool,
    /// A core made only of HARD members (and the pin) ended the procedure.
    pub halted_on_law_core: bool,
    pub exhaustive: bool,
    pub checks_performed: usize,
    pub elapsed_ms: f64,
}

impl IllegalTermReport {
    pub fn term_ids(&self) -> BTreeSet<String> {
        self.terms.iter().flat_map(|t| t.ids.iter().cloned()).collect()
    }

    pub fn term_groups(&self) -> BTreeSet<String> {
        self.terms.iter().map(|t| t.group.clone()).collect()
    }
}

impl Engine {
    /// Hardens every constraint, then repeatedly exposes the minimal cores of the
    /// working set, records their HARD members and drops their SOFT members,
    /// until the working set is satisfiable or a core consists of law alone.
    pub fn enumerate_illegal_terms(&self, bundle: &ConstraintBundle) -> Result<IllegalTermReport, EngineError> {
        self.validated(bundle)?;
        self.require_cores()?;
        let started = Instant::now();
        let mut checks = 0;
        let soft: BTreeSet<AssertionRef> =
            bundle.soft().map(|c| AssertionRef::Constraint(c.id.clone())).collect();
        let mut working: BTreeSet<AssertionRef> =
            bundle.constraints.iter().map(|c| AssertionRef::Constraint(c.id.clone())).collect();
        working.insert(AssertionRef::PenaltyPin);

        let mut terms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut details = Vec::new();
        let mut sat_reached = false;
        let mut halted = false;
        loop {
            let Some(first) = self.check_items(bundle, &working, &mut checks)? else {
                if details.is_empty() {
                    return Err(EngineError::NotIllegal);
                }
                sat_reached = true;
                break;
            };
            let (cores, exhaustive) = self.expose_cores(bundle, &working, first, &mut checks)?;
            let mut dropped = BTreeSet::new();
            let mut law_only = false;
            for core in &cores {
                for member in describe_core(bundle, core) {
                    if member.origin == Origin::Hard {
                        terms.entry(member.group).or_default().insert(member.id);
                    }
                }
                let soft_members: Vec<&AssertionRef> = core.intersection(&soft).collect();
                law_only |= soft_members.is_empty();
                dropped.extend(soft_members.into_iter().cloned());
            }
            details.push(RoundDetail {
                cores: cores.iter().map(|c| describe_core(bundle, c).into_iter().map(|m| m.id).collect()).collect(),
                dropped: ids(&dropped),
                exhaustive,
            });
            if law_only || dropped.is_empty() {
                halted = true;
                break;
            }
            working.retain(|m| !dropped.contains(m));
            debug_assert!(details.len() <= soft.len() + 1);
        }

        let rounds = details
            .iter()
            .map(|d| {
                let mut seen = BTreeSet::new();
                d.cores.iter().flatten().filter(|id| seen.insert(id.as_str())).cloned().collect()
            })
            .collect();
        Ok(IllegalTermReport {
            terms: terms.into_iter().map(|(group, ids)| Term { group, ids: ids.into_iter().collect() }).collect(),
            rounds,
            exhaustive: details.iter().all(|d| d.exhaustive),
            round_details: details,
            sat_reached,
            halted_on_law_core: halted,
            checks_performed: checks,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Enumerates minimal unsatisfiable subsets of `universe` (MARCO style),
    /// starting from a known unsatisfiable `first` subset.
    fn expose_cores(
        &self,
        bundle: &ConstraintBundle,
        universe: &BTreeSet<AssertionRef>,
        first: BTreeSet<AssertionRef>,
        checks: &mut usize,
    ) -> Result<(Vec<BTreeSet<AssertionRef>>, bool), EngineError> {
        let items: Vec<AssertionRef> = universe.iter().cloned().collect();
        let index: BTreeMap<&AssertionRef, usize> = items.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let budget_start = *checks;
        let mut map = MapSolver::new(items.len());
        let mut cores = Vec::new();

        let mus = self.minimize_core(bundle, first, checks)?;
        map.block_up(mus.iter().map(|m| index[m]).collect());
        cores.push(mus);

        loop {
            if cores.len() >= self.limits.max_cores_per_round
                || *checks - budget_start >= self.limits.max_checks_per_round
            {
                return Ok((cores, false));
            }
            let Some(seed) = map.maximal_model() else {
                return Ok((cores, true));
            };
            let seed_set: BTreeSet<AssertionRef> =
                seed.iter().enumerate().filter(|(_, &on)| on).map(|(i, _)| items[i].clone()).collect();
            match self.check_items(bundle, &seed_set, checks)? {
                None => {
                    map.block_down(seed.iter().enumerate().filter(|(_, &on)| !on).map(|(i, _)| i).collect());
                }
                Some(core) => {
                    let core: BTreeSet<AssertionRef> = core.intersection(&seed_set).cloned().collect();
                    let core = if core.is_empty() { seed_set } else { core };
                    let mus = self.minimize_core(bundle, core, checks)?;
                    map.block_up(mus.iter().map(|m| index[m]).collect());
                    cores.push(mus);
                }
            }
        }
    }
}

fn ids(set: &BTreeSet<AssertionRef>) -> Vec<String> {
    set.iter()
        .filter_map(|r| match r {
            AssertionRef::Constraint(id) => Some(id.clone()),
            _ => None,
        })
        .collect()
}

/// Tracks explored subsets as clauses over item-membership variables.
struct MapSolver {
    n: usize,
    clauses: Vec<Vec<(usize, bool)>>,
    sat: varisat::Solver<'static>,
    exhausted: bool,
}

impl MapSolver {
    fn new(n: usize) -> Self {
        Self { n, clauses: Vec::new(), sat: varisat::Solver::new(), exhausted: false }
    }

    fn add(&mut self, clause: Vec<(usize, bool)>) {
        if clause.is_empty() {
            self.exhausted = true;
            return;
        }
        let lits: Vec<varisat::Lit> =
            clause.iter().map(|&(i, pos)| varisat::Lit::from_var(varisat::Var::from_index(i), pos)).collect();
        varisat::ExtendFormula::add_clause(&mut self.sat, &lits);
        self.clauses.push(clause);
    }

    /// No superset of `mus` is worth exploring.
    fn block_up(&mut self, mus: Vec<usize>) {
        self.add(mus.into_iter().map(|i| (i, false)).collect());
    }

    /// No subset of a satisfiable seed is worth exploring.
    fn block_down(&mut self, complement: Vec<usize>) {
        self.add(complement.into_iter().map(|i| (i, true)).collect());
    }

    fn satisfied(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&(i, pos)| model[i] == pos))
    }

    /// An unexplored subset that is maximal among unexplored subsets.
    fn maximal_model(&mut self) -> Option<Vec<bool>> {
        if self.exhausted || !self.sat.solve().expect("map solver has no resource limits") {
            return None;
        }
        let mut model = vec![true; self.n];
        for lit in self.sat.model().unwrap_or_default() {
            if lit.index() < self.n {
                model[lit.index()] = lit.is_positive();
            }
        }
        for i in 0..self.n {
            if !model[i] {
                model[i] = true;
                if !self.satisfied(&model) {
                    model[i] = false;
                }
            }
        }
        Some(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_solver_finds_maximal_unexplored_sets() {
        let mut map = MapSolver::new(3);
        assert_eq!(map.maximal_model(), Some(vec![true, true, true]));
        map.block_up(vec![0, 1]);
        let m = map.maximal_model().unwrap();
        assert!(!(m[0] && m[1]) && m[2]);
        map.block_up(vec![0]);
        map.block_up(vec![1]);
        assert_eq!(map.maximal_model(), Some(vec![false, false, true]));
        map.block_down(vec![0, 1]);
        assert_eq!(map.maximal_model(), None);
    }
}
