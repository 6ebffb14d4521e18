//! Seeded synthetic case bundles shaped like real supervisory cases.
//!
//! Every bundle is built around a hidden compliant world (the witness): all
//! law constraints hold there with the penalty cleared, so the law base is
//! consistent and a penalty-free revision exists. The stated facts differ from
//! the witness on at least one pinned variable that fires a penalty trigger,
//! so the case itself is illegal.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constraint::{eval_bool, eval_expr, Assignment, Constraint, ConstraintBundle, Expr, Sort, Value, VarDecl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub vars_mean: f64,
    pub vars_sd: f64,
    pub vars_min: usize,
    pub vars_max: usize,
    pub constraints_mean: f64,
    pub constraints_sd: f64,
    pub constraints_min: usize,
    pub constraints_max: usize,
    pub hard_ratio_mean: f64,
    pub hard_ratio_sd: f64,
    pub hard_ratio_min: f64,
    pub hard_ratio_max: f64,
    pub weight_min: u64,
    pub weight_max: u64,
    /// Upper bound on SOFT constraints per bundle.
    pub max_soft: Option<usize>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            vars_mean: 12.85,
            vars_sd: 5.60,
            vars_min: 4,
            vars_max: 40,
            constraints_mean: 30.81,
            constraints_sd: 9.62,
            constraints_min: 11,
            constraints_max: 63,
            hard_ratio_mean: 0.63,
            hard_ratio_sd: 0.08,
            hard_ratio_min: 0.38,
            hard_ratio_max: 0.76,
            weight_min: 1,
            weight_max: 3,
            max_soft: None,
        }
    }
}

impl GenParams {
    /// At most 10 SOFT constraints with weights 1–5: small enough for exhaustive optimization checks.
    pub fn oracle() -> Self {
        Self { weight_min: 1, weight_max: 5, max_soft: Some(10), ..Self::default() }
    }

    /// At most 8 constraints in total, for exhaustive minimal-core checks.
    pub fn small() -> Self {
        Self {
            vars_mean: 5.0,
            vars_sd: 1.0,
            vars_min: 4,
            vars_max: 6,
            constraints_mean: 6.5,
            constraints_sd: 1.0,
            constraints_min: 5,
            constraints_max: 8,
            hard_ratio_mean: 0.55,
            hard_ratio_sd: 0.08,
            hard_ratio_min: 0.38,
            hard_ratio_max: 0.7,
            weight_min: 1,
            weight_max: 3,
            max_soft: Some(4),
        }
    }
}

/// A generated bundle with the compliant world it was built around.
#[derive(Clone, Debug)]
pub struct GeneratedCase {
    pub bundle: ConstraintBundle,
    pub witness: Assignment,
}

pub fn generate_batch(n: usize, seed: u64, params: &GenParams) -> Vec<ConstraintBundle> {
    (0..n as u64).map(|i| generate(seed, i, params).bundle).collect()
}

/// Case `index` of the stream selected by `seed`; independent of other indices.
pub fn generate(seed: u64, index: u64, params: &GenParams) -> GeneratedCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Builder::new(rng, params, format!("gen-{seed}-{index:04}")).build()
}

fn clipped(rng: &mut ChaCha8Rng, mean: f64, sd: f64, min: f64, max: f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("finite normal parameters");
    normal.sample(rng).clamp(min, max)
}

fn cents(v: i64) -> BigRational {
    BigRational::new(BigInt::from(v), BigInt::from(100))
}

fn literal(v: &Value) -> Expr {
    match v {
        Value::Bool(b) => Expr::Bool(*b),
        Value::Int(i) => Expr::Int(i.clone()),
        Value::Real(r) => Expr::Decimal(r.clone()),
    }
}

fn bool_literal(name: &str, value: bool) -> Expr {
    if value {
        Expr::var(name)
    } else {
        Expr::not(Expr::var(name))
    }
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    params: &'a GenParams,
    case_id: String,
    vars: Vec<VarDecl>,
    witness: Assignment,
    facts: Assignment,
    numeric: Vec<String>,
    booleans: Vec<String>,
    pinned: Vec<String>,
    hard: Vec<Constraint>,
    soft: Vec<Constraint>,
}

impl<'a> Builder<'a> {
    fn new(rng: ChaCha8Rng, params: &'a GenParams, case_id: String) -> Self {
        Self {
            rng,
            params,
            case_id,
            vars: Vec::new(),
            witness: Assignment::new(),
            facts: Assignment::new(),
            numeric: Vec::new(),
            booleans: Vec::new(),
            pinned: Vec::new(),
            hard: Vec::new(),
            soft: Vec::new(),
        }
    }

    fn sort_of(&self, name: &str) -> Sort {
        self.vars.iter().find(|v| v.name == name).map(|v| v.sort).expect("declared")
    }

    fn weight(&mut self) -> i64 {
        self.rng.random_range(self.params.weight_min..=self.params.weight_max.max(self.params.weight_min)) as i64
    }

    fn random_value(&mut self, sort: Sort) -> Value {
        match sort {
            Sort::Bool => Value::Bool(self.rng.random_bool(0.5)),
            Sort::Int => Value::Int(BigInt::from(self.rng.random_range(0..=20i64))),
            Sort::Real => Value::Real(cents(self.rng.random_range(0..=50_000i64))),
        }
    }

    fn different_value(&mut self, v: &Value) -> Value {
        loop {
            let candidate = self.random_value(v.sort());
            if &candidate != v {
                return candidate;
            }
        }
    }

    fn declare(&mut self, name: String, sort: Sort, group: &str) {
        self.vars.push(VarDecl { name, sort, group: Some(group.to_string()) });
    }

    fn build(mut self) -> GeneratedCase {
        let p = self.params;
        let n_vars =
            clipped(&mut self.rng, p.vars_mean, p.vars_sd, p.vars_min as f64, p.vars_max as f64).round() as usize;
        let n_cons = clipped(
            &mut self.rng,
            p.constraints_mean,
            p.constraints_sd,
            p.constraints_min as f64,
            p.constraints_max as f64,
        )
        .round() as usize;
        let ratio = clipped(&mut self.rng, p.hard_ratio_mean, p.hard_ratio_sd, p.hard_ratio_min, p.hard_ratio_max);
        let mut n_hard = ((n_cons as f64) * ratio).round().max(2.0) as usize;
        let mut n_soft = n_cons.saturating_sub(n_hard).max(1);
        if let Some(cap) = p.max_soft {
            n_soft = n_soft.min(cap.max(1));
        }
        if n_hard + n_soft > n_cons.max(3) {
            n_hard = n_cons.max(3).saturating_sub(n_soft).max(2);
        }

        let mut n_def = ((n_vars as f64) * 0.3).round() as usize;
        n_def = n_def.clamp(0, n_hard - 1).min(n_vars.saturating_sub(3));
        let n_base = n_vars - 1 - n_def;
        let n_numeric = (n_base / 2).max(1);

        // Base variables with witness and fact values.
        for i in 0..n_base {
            let (name, sort) = if i < n_numeric {
                let sort = if self.rng.random_bool(0.2) { Sort::Int } else { Sort::Real };
                (format!("x{}", i + 1), sort)
            } else {
                (format!("b{}", i + 1 - n_numeric), Sort::Bool)
            };
            let w = self.random_value(sort);
            let f = if self.rng.random_bool(0.5) { w.clone() } else { self.different_value(&w) };
            self.declare(name.clone(), sort, &format!("fact:{name}"));
            self.witness.insert(name.clone(), w);
            self.facts.insert(name.clone(), f);
            if sort == Sort::Bool {
                self.booleans.push(name);
            } else {
                self.numeric.push(name);
            }
        }
        self.declare("penalty".into(), Sort::Bool, "meta:penalty_conditions");

        // Pinned facts; the first one is the variable that makes the case illegal.
        let mut order: Vec<String> = self.numeric.iter().chain(self.booleans.iter()).cloned().collect();
        order.shuffle(&mut self.rng);
        let trigger_var = order[0].clone();
        if self.facts.get(&trigger_var) == self.witness.get(&trigger_var) {
            let w = self.witness.get(&trigger_var).unwrap().clone();
            let f = self.different_value(&w);
            self.facts.insert(trigger_var.clone(), f);
        }
        self.pinned = order.iter().take(n_soft).cloned().collect();
        for (k, name) in self.pinned.clone().iter().enumerate() {
            let fact = self.facts.get(name).unwrap().clone();
            let expr = match &fact {
                Value::Bool(b) => bool_literal(name, *b),
                v => Expr::eq(Expr::var(name), literal(v)),
            };
            let w = self.weight();
            self.soft.push(
                Constraint::soft(&format!("f{}_{name}", k + 1), &format!("fact:{name}"), w, expr)
                    .with_description(&format!("Reported {name} {{old:{name}}} revised to {{new:{name}}}")),
            );
        }
        while self.soft.len() < n_soft {
            let k = self.soft.len() + 1;
            let name = self.numeric[self.rng.random_range(0..self.numeric.len())].clone();
            let fact = self.facts.get(&name).unwrap().as_rational().unwrap();
            let slack = cents(self.rng.random_range(0..=5_000i64));
            let expr = if self.rng.random_bool(0.5) {
                Expr::ge(Expr::var(&name), self.numeric_literal(&name, fact - slack))
            } else {
                Expr::le(Expr::var(&name), self.numeric_literal(&name, fact + slack))
            };
            let w = self.weight();
            self.soft.push(Constraint::soft(&format!("r{k}_{name}"), &format!("fact:{name}_range"), w, expr));
        }

        // Defined variables.
        let mut triggers = Vec::new();
        for d in 0..n_def {
            self.define(d, &trigger_var, &mut triggers);
        }
        if triggers.is_empty() {
            triggers.push(self.direct_trigger(&trigger_var));
        }

        // Additional triggers that the witness does not fire.
        let extra = self.rng.random_range(0..=2);
        for _ in 0..extra {
            if let Some(t) = self.quiet_trigger() {
                triggers.push(t);
            }
        }
        triggers.shuffle(&mut self.rng);
        self.hard.push(
            Constraint::hard("law_penalty", "meta:penalty_conditions", Expr::iff(Expr::var("penalty"), Expr::or(triggers)))
                .with_description("A penalty applies when any sanctioned condition holds"),
        );
        self.witness.insert("penalty", Value::Bool(false));

        let mut k = 0;
        while self.hard.len() < n_hard {
            k += 1;
            if let Some(c) = self.requirement(k) {
                self.hard.push(c);
            }
            if k > 10 * n_hard {
                break;
            }
        }

        let mut constraints = self.hard;
        constraints.extend(self.soft);
        let bundle = ConstraintBundle {
            case_id: self.case_id,
            vars: self.vars,
            constraints,
            penalty_var: "penalty".into(),
            facts: self.facts,
            meta: BTreeMap::from([("generator".to_string(), "lexverify gen-cases".to_string())]),
        };
        GeneratedCase { bundle, witness: self.witness }
    }

    fn numeric_literal(&self, name: &str, value: BigRational) -> Expr {
        match self.sort_of(name) {
            Sort::Int => Expr::Int(value.floor().to_integer()),
            _ => Expr::Decimal(value),
        }
    }

    /// Threshold strictly between two distinct values of `name`'s sort.
    fn split(&self, name: &str, lo: &BigRational, hi: &BigRational) -> Expr {
        match self.sort_of(name) {
            // v ≤ lo vs v ≥ lo + 1 for integers: compare against lo with `<` after adding one.
            Sort::Int => Expr::Int(lo.to_integer() + 1),
            _ => Expr::Decimal((lo + hi) / BigRational::from_integer(BigInt::from(2))),
        }
    }

    fn direct_trigger(&mut self, var: &str) -> Expr {
        let f = self.facts.get(var).unwrap().clone();
        match f {
            Value::Bool(b) => bool_literal(var, b),
            _ => {
                let fv = f.as_rational().unwrap();
                let wv = self.witness.get(var).unwrap().as_rational().unwrap();
                if fv < wv {
                    let t = self.split(var, &fv, &wv);
                    Expr::lt(Expr::var(var), t)
                } else {
                    let t = self.split(var, &wv, &fv);
                    Expr::ge(Expr::var(var), t)
                }
            }
        }
    }

    fn eval_in(&self, world: &Assignment, e: &Expr) -> Value {
        eval_expr(e, world).expect("generated expressions are total")
    }

    fn add_definition(&mut self, name: String, sort: Sort, group: &str, rhs: Expr) {
        let w = self.eval_in(&self.witness.clone(), &rhs);
        self.declare(name.clone(), sort, group);
        self.witness.insert(name.clone(), w);
        let expr = if sort == Sort::Bool { Expr::iff(Expr::var(&name), rhs) } else { Expr::eq(Expr::var(&name), rhs) };
        let id = format!("law_def_{name}");
        self.hard.push(Constraint::hard(&id, group, expr).with_description(&format!("Definition of {name}")));
    }

    /// The stated-fact world extended by the definitions so far (free variables take witness values).
    fn fact_world(&self) -> Assignment {
        let mut world = self.witness.clone();
        for name in &self.pinned {
            world.insert(name.clone(), self.facts.get(name).unwrap().clone());
        }
        for c in &self.hard {
            if let Expr::Iff(lhs, rhs) | Expr::Cmp(crate::constraint::CmpOp::Eq, lhs, rhs) = &c.expr {
                if let Expr::Var(name) = lhs.as_ref() {
                    if let Ok(v) = eval_expr(rhs, &world) {
                        world.insert(name.clone(), v);
                    }
                }
            }
        }
        world
    }

    fn define(&mut self, d: usize, trigger_var: &str, triggers: &mut Vec<Expr>) {
        let first = d == 0;
        let numeric_trigger = first && self.sort_of(trigger_var) != Sort::Bool;
        let kind = if numeric_trigger { self.rng.random_range(0..2) } else { self.rng.random_range(0..4) };
        let pick_num = |b: &mut Self| b.numeric[b.rng.random_range(0..b.numeric.len())].clone();
        match kind {
            // Level classification by thresholds.
            0 => {
                let v = if numeric_trigger { trigger_var.to_string() } else { pick_num(self) };
                let wv = self.witness.get(&v).unwrap().as_rational().unwrap();
                let fv = self.facts.get(&v).or(self.witness.get(&v)).unwrap().as_rational().unwrap();
                let (lo, hi) = if wv <= fv { (wv.clone(), fv.clone()) } else { (fv.clone(), wv.clone()) };
                let t1 = if lo != hi { self.split(&v, &lo, &hi) } else { self.numeric_literal(&v, lo.clone()) };
                let step = cents(self.rng.random_range(100..=20_000i64));
                let t2 = self.numeric_literal(&v, hi + step);
                let name = format!("lvl{}", d + 1);
                let rhs = Expr::ite(
                    Expr::lt(Expr::var(&v), t1),
                    Expr::int(3),
                    Expr::ite(Expr::lt(Expr::var(&v), t2), Expr::int(2), Expr::int(1)),
                );
                self.add_definition(name.clone(), Sort::Int, &format!("law:level_{}", d + 1), rhs);
                if numeric_trigger {
                    let level_f = self.eval_in(&self.fact_world(), &Expr::var(&name));
                    triggers.push(Expr::eq(Expr::var(&name), literal(&level_f)));
                }
            }
            // Threshold indicator.
            1 => {
                let v = if numeric_trigger { trigger_var.to_string() } else { pick_num(self) };
                let wv = self.witness.get(&v).unwrap().as_rational().unwrap();
                let fv = self.facts.get(&v).or(self.witness.get(&v)).unwrap().as_rational().unwrap();
                let t = if wv != fv {
                    let (lo, hi) = if wv < fv { (wv, fv) } else { (fv, wv) };
                    self.split(&v, &lo, &hi)
                } else {
                    let shift = cents(self.rng.random_range(-5_000..=5_000i64));
                    self.numeric_literal(&v, wv + shift)
                };
                let name = format!("ind{}", d + 1);
                self.add_definition(name.clone(), Sort::Bool, &format!("law:threshold_{}", d + 1), Expr::ge(Expr::var(&v), t));
                if numeric_trigger {
                    let f = self.eval_in(&self.fact_world(), &Expr::var(&name)).as_bool().unwrap();
                    triggers.push(bool_literal(&name, f));
                }
            }
            // Conjunction of two Boolean conditions.
            2 if self.booleans.len() >= 2 => {
                let mut pool = self.booleans.clone();
                pool.shuffle(&mut self.rng);
                let name = format!("all{}", d + 1);
                let rhs = Expr::and(vec![Expr::var(&pool[0]), Expr::var(&pool[1])]);
                self.add_definition(name.clone(), Sort::Bool, &format!("law:measures_{}", d + 1), rhs);
                self.booleans.push(name);
            }
            // Linear aggregate.
            _ => {
                let a = pick_num(self);
                let sort = self.sort_of(&a);
                let same: Vec<String> = self.numeric.iter().filter(|n| self.sort_of(n) == sort).cloned().collect();
                let b = same[self.rng.random_range(0..same.len())].clone();
                let factor = self.rng.random_range(1..=3i64);
                let scaled = match sort {
                    Sort::Int => Expr::mul(Expr::int(factor), Expr::var(&b)),
                    _ => Expr::mul(Expr::dec(&factor.to_string()), Expr::var(&b)),
                };
                let name = format!("sum{}", d + 1);
                self.add_definition(name.clone(), sort, &format!("law:aggregate_{}", d + 1), Expr::add(vec![Expr::var(&a), scaled]));
                self.numeric.push(name);
            }
        }
    }

    /// A penalty trigger the witness does not fire.
    fn quiet_trigger(&mut self) -> Option<Expr> {
        for _ in 0..8 {
            let candidate = match self.rng.random_range(0..3) {
                0 => {
                    let v = self.numeric[self.rng.random_range(0..self.numeric.len())].clone();
                    let wv = self.witness.get(&v).unwrap().as_rational().unwrap();
                    let shift = cents(self.rng.random_range(-20_000..=20_000i64));
                    let t = self.numeric_literal(&v, wv + shift);
                    if self.rng.random_bool(0.5) {
                        Expr::gt(Expr::var(&v), t)
                    } else {
                        Expr::lt(Expr::var(&v), t)
                    }
                }
                1 if self.booleans.len() >= 2 => {
                    let mut pool = self.booleans.clone();
                    pool.shuffle(&mut self.rng);
                    let a = self.rng.random_bool(0.5);
                    let b = self.rng.random_bool(0.5);
                    Expr::and(vec![bool_literal(&pool[0], a), bool_literal(&pool[1], b)])
                }
                _ => {
                    let v = self.booleans.first().cloned()?;
                    let n = self.numeric[self.rng.random_range(0..self.numeric.len())].clone();
                    let wv = self.witness.get(&n).unwrap().as_rational().unwrap();
                    let t = self.numeric_literal(&n, wv);
                    Expr::and(vec![bool_literal(&v, self.rng.random_bool(0.5)), Expr::lt(Expr::var(&n), t)])
                }
            };
            if !eval_bool(&candidate, &self.witness).unwrap_or(true) {
                return Some(candidate);
            }
        }
        None
    }

    /// A statutory requirement the witness satisfies.
    fn requirement(&mut self, k: usize) -> Option<Constraint> {
        let (group, expr) = match self.rng.random_range(0..3) {
            0 => {
                let v = self.numeric[self.rng.random_range(0..self.numeric.len())].clone();
                let wv = self.witness.get(&v).unwrap().as_rational().unwrap();
                let slack = cents(self.rng.random_range(0..=30_000i64));
                let e = if self.rng.random_bool(0.5) {
                    Expr::ge(Expr::var(&v), self.numeric_literal(&v, wv - slack))
                } else {
                    Expr::le(Expr::var(&v), self.numeric_literal(&v, wv + slack + cents(100)))
                };
                (format!("law:bound_{k}"), e)
            }
            1 if self.booleans.len() >= 2 => {
                let mut pool = self.booleans.clone();
                pool.shuffle(&mut self.rng);
                let a = bool_literal(&pool[0], self.rng.random_bool(0.5));
                let b = bool_literal(&pool[1], self.rng.random_bool(0.5));
                (format!("law:obligation_{k}"), Expr::implies(a, b))
            }
            _ => {
                let a = self.numeric[self.rng.random_range(0..self.numeric.len())].clone();
                let sort = self.sort_of(&a);
                let same: Vec<String> = self.numeric.iter().filter(|n| self.sort_of(n) == sort).cloned().collect();
                let b = same[self.rng.random_range(0..same.len())].clone();
                let total = self.eval_in(&self.witness.clone(), &Expr::add(vec![Expr::var(&a), Expr::var(&b)]));
                let cap = total.as_rational().unwrap() + cents(self.rng.random_range(0..=40_000i64));
                (format!("law:cap_{k}"), Expr::le(Expr::add(vec![Expr::var(&a), Expr::var(&b)]), self.numeric_literal(&a, cap)))
            }
        };
        if !eval_bool(&expr, &self.witness).ok()? {
            return None;
        }
        Some(Constraint::hard(&format!("law_req_{k}"), &group, expr))
    }
}
