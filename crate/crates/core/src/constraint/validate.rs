use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use super::bundle::{ConstraintBundle, Kind};
use super::expr::{CmpOp, Expr};
use super::value::Sort;

/// Prefix reserved for engine-generated symbols (selectors, pins, bounds).
pub const RESERVED_PREFIX: &str = "lexv_";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "error")]
pub enum ValidationError {
    #[error("case_id is empty")]
    EmptyCaseId,
    #[error("`{name}` is not a valid identifier")]
    InvalidIdentifier { name: String },
    #[error("`{name}` is reserved (prefix `lexv_` or an SMT-LIB keyword)")]
    ReservedIdentifier { name: String },
    #[error("variable `{name}` declared more than once")]
    DuplicateVariable { name: String },
    #[error("constraint id `{id}` used more than once")]
    DuplicateConstraintId { id: String },
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },
    #[error("sort mismatch in `{constraint}`: {detail}")]
    SortMismatch { constraint: String, detail: String },
    #[error("constraint `{constraint}` has sort {found}, expected BOOL")]
    NotBoolean { constraint: String, found: Sort },
    #[error("non-linear term in `{constraint}`: {detail}")]
    NonlinearTerm { constraint: String, detail: String },
    #[error("division by zero literal in `{constraint}`")]
    ZeroDivisor { constraint: String },
    #[error("soft constraint `{id}` has nonpositive weight {weight}")]
    NonpositiveWeight { id: String, weight: i64 },
    #[error("hard constraint `{id}` carries a weight")]
    WeightOnHard { id: String },
    #[error("penalty_var is missing")]
    MissingPenaltyVar,
    #[error("penalty_var `{name}` is not declared")]
    UndeclaredPenaltyVar { name: String },
    #[error("penalty_var `{name}` has sort {sort}; expected BOOL or INT")]
    PenaltyVarSort { name: String, sort: Sort },
    #[error("bundle has no HARD constraint")]
    NoHardConstraint,
    #[error("fact for undeclared variable `{name}`")]
    UnknownFactVariable { name: String },
    #[error("fact `{name}` has sort {found}, declared {expected}")]
    FactSortMismatch { name: String, expected: Sort, found: Sort },
}

/// Symbols with fixed meaning in SMT-LIB scripts over Booleans and arithmetic.
const SMT_RESERVED: &[&str] = &[
    "_", "as", "let", "exists", "forall", "match", "par", "true", "false", "not", "and", "or", "xor", "ite",
    "distinct", "abs", "div", "mod", "to_real", "to_int", "is_int", "Bool", "Int", "Real", "NUMERAL", "DECIMAL",
    "STRING", "BINARY", "HEXADECIMAL",
];

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn is_constraint_id(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_alphanumeric() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

/// Collects every invariant violation; an empty list means the bundle is valid.
pub fn validate_bundle(bundle: &ConstraintBundle) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    if bundle.case_id.trim().is_empty() {
        errors.push(ValidationError::EmptyCaseId);
    }

    let mut sorts: BTreeMap<&str, Sort> = BTreeMap::new();
    for decl in &bundle.vars {
        if !is_identifier(&decl.name) {
            errors.push(ValidationError::InvalidIdentifier { name: decl.name.clone() });
        } else if decl.name.starts_with(RESERVED_PREFIX) || SMT_RESERVED.contains(&decl.name.as_str()) {
            errors.push(ValidationError::ReservedIdentifier { name: decl.name.clone() });
        }
        if sorts.insert(decl.name.as_str(), decl.sort).is_some() {
            errors.push(ValidationError::DuplicateVariable { name: decl.name.clone() });
        }
    }

    let mut ids = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for c in &bundle.constraints {
        if !is_constraint_id(&c.id) {
            errors.push(ValidationError::InvalidIdentifier { name: c.id.clone() });
        } else if c.id.starts_with(RESERVED_PREFIX) {
            errors.push(ValidationError::ReservedIdentifier { name: c.id.clone() });
        }
        if !ids.insert(c.id.as_str()) {
            errors.push(ValidationError::DuplicateConstraintId { id: c.id.clone() });
        }
        match (c.kind, c.weight) {
            (Kind::Hard, Some(_)) => errors.push(ValidationError::WeightOnHard { id: c.id.clone() }),
            (Kind::Soft, Some(w)) if w < 1 => {
                errors.push(ValidationError::NonpositiveWeight { id: c.id.clone(), weight: w })
            }
            _ => {}
        }
        let mut checker = SortChecker { sorts: &sorts, constraint: &c.id, errors: Vec::new(), unknown: &mut unknown };
        if let Some(sort) = checker.infer(&c.expr) {
            if sort != Sort::Bool {
                checker.errors.push(ValidationError::NotBoolean { constraint: c.id.clone(), found: sort });
            }
        }
        errors.extend(checker.errors);
    }

    if bundle.penalty_var.is_empty() {
        errors.push(ValidationError::MissingPenaltyVar);
    } else {
        match sorts.get(bundle.penalty_var.as_str()) {
            None => errors.push(ValidationError::UndeclaredPenaltyVar { name: bundle.penalty_var.clone() }),
            Some(Sort::Real) => errors.push(ValidationError::PenaltyVarSort {
                name: bundle.penalty_var.clone(),
                sort: Sort::Real,
            }),
            Some(_) => {}
        }
    }

    if !bundle.constraints.iter().any(|c| c.kind == Kind::Hard) {
        errors.push(ValidationError::NoHardConstraint);
    }

    for (name, value) in bundle.facts.iter() {
        match sorts.get(name.as_str()) {
            None => errors.push(ValidationError::UnknownFactVariable { name: name.clone() }),
            Some(&expected) => {
                if value.clone().coerce(expected).is_none() {
                    errors.push(ValidationError::FactSortMismatch {
                        name: name.clone(),
                        expected,
                        found: value.sort(),
                    });
                }
            }
        }
    }
    errors
}

struct SortChecker<'a> {
    sorts: &'a BTreeMap<&'a str, Sort>,
    constraint: &'a str,
    errors: Vec<ValidationError>,
    unknown: &'a mut BTreeSet<String>,
}

impl SortChecker<'_> {
    fn mismatch(&mut self, detail: String) {
        self.errors.push(ValidationError::SortMismatch { constraint: self.constraint.to_string(), detail });
    }

    fn nonlinear(&mut self, detail: String) {
        self.errors.push(ValidationError::NonlinearTerm { constraint: self.constraint.to_string(), detail });
    }

    fn expect(&mut self, e: &Expr, want: Sort) {
        if let Some(found) = self.infer(e) {
            if found != want {
                self.mismatch(format!("`{e}` has sort {found}, expected {want}"));
            }
        }
    }

    fn numeric_pair(&mut self, a: &Expr, b: &Expr, what: &str) -> Option<Sort> {
        let sa = self.infer(a);
        let sb = self.infer(b);
        match (sa, sb) {
            (Some(x), Some(y)) if x == y && x.is_numeric() => Some(x),
            (Some(x), Some(y)) => {
                self.mismatch(format!("{what} of {x} and {y} (`{a}`, `{b}`)"));
                None
            }
            _ => None,
        }
    }

    fn infer(&mut self, e: &Expr) -> Option<Sort> {
        match e {
            Expr::Bool(_) => Some(Sort::Bool),
            Expr::Int(_) => Some(Sort::Int),
            Expr::Decimal(_) => Some(Sort::Real),
            Expr::Var(name) => match self.sorts.get(name.as_str()) {
                Some(s) => Some(*s),
                None => {
                    if self.unknown.insert(name.clone()) {
                        self.errors.push(ValidationError::UnknownVariable { name: name.clone() });
                    }
                    None
                }
            },
            Expr::Neg(a) => {
                let s = self.infer(a)?;
                if !s.is_numeric() {
                    self.mismatch(format!("negation of {s} `{a}`"));
                    return None;
                }
                Some(s)
            }
            Expr::Add(items) => {
                if items.is_empty() {
                    self.mismatch("empty sum".into());
                    return None;
                }
                let found: Vec<Option<Sort>> = items.iter().map(|i| self.infer(i)).collect();
                let known: BTreeSet<Sort> = found.iter().flatten().copied().collect();
                if known.len() > 1 || known.iter().any(|s| !s.is_numeric()) {
                    self.mismatch(format!("sum mixes sorts {known:?}"));
                    return None;
                }
                if found.iter().any(Option::is_none) {
                    return None;
                }
                known.into_iter().next()
            }
            Expr::Sub(a, b) => self.numeric_pair(a, b, "subtraction"),
            Expr::Mul(a, b) => {
                let s = self.numeric_pair(a, b, "product");
                if !a.is_numeric_literal() && !b.is_numeric_literal() {
                    self.nonlinear(format!("product `{e}` needs a literal operand"));
                }
                s
            }
            Expr::Div(a, b) => {
                let s = self.numeric_pair(a, b, "division");
                if let Some(Sort::Int) = s {
                    self.mismatch(format!("division `{e}` over INT; only REAL division is supported"));
                }
                match b.literal_value() {
                    Some(v) if v.is_zero() => self
                        .errors
                        .push(ValidationError::ZeroDivisor { constraint: self.constraint.to_string() }),
                    Some(_) => {}
                    // A bare variable denominator admits ratio definitions; anything else is rejected.
                    None if matches!(b.as_ref(), Expr::Var(_)) => {}
                    None => self.nonlinear(format!("denominator of `{e}` must be a literal or a variable")),
                }
                s
            }
            Expr::Cmp(op, a, b) => {
                let sa = self.infer(a);
                let sb = self.infer(b);
                if let (Some(x), Some(y)) = (sa, sb) {
                    let ordered = !matches!(op, CmpOp::Eq | CmpOp::Ne);
                    if x != y {
                        self.mismatch(format!("comparison of {x} with {y} in `{e}`"));
                    } else if ordered && !x.is_numeric() {
                        self.mismatch(format!("ordering comparison over {x} in `{e}`"));
                    }
                }
                Some(Sort::Bool)
            }
            Expr::Not(a) => {
                self.expect(a, Sort::Bool);
                Some(Sort::Bool)
            }
            Expr::And(items) | Expr::Or(items) => {
                for item in items {
                    self.expect(item, Sort::Bool);
                }
                Some(Sort::Bool)
            }
            Expr::Implies(a, b) | Expr::Iff(a, b) => {
                self.expect(a, Sort::Bool);
                self.expect(b, Sort::Bool);
                Some(Sort::Bool)
            }
            Expr::Ite(c, t, f) => {
                self.expect(c, Sort::Bool);
                let st = self.infer(t);
                let sf = self.infer(f);
                match (st, sf) {
                    (Some(x), Some(y)) if x == y => Some(x),
                    (Some(x), Some(y)) => {
                        self.mismatch(format!("ite branches of sort {x} and {y}"));
                        None
                    }
                    _ => None,
                }
            }
        }
    }
}

/// Sort of a well-formed expression under `sorts`, if determinable.
pub fn sort_of(expr: &Expr, sorts: &BTreeMap<&str, Sort>) -> Option<Sort> {
    let mut unknown = BTreeSet::new();
    let mut checker = SortChecker { sorts, constraint: "", errors: Vec::new(), unknown: &mut unknown };
    let s = checker.infer(expr);
    if checker.errors.is_empty() {
        s
    } else {
        None
    }
}
