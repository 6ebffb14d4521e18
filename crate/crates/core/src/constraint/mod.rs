//! Typed constraint language: sorts, expressions, hard/soft constraints and
//! case bundles, with validation and an exact reference evaluator.

mod bundle;
mod eval;
mod expr;
mod validate;
mod value;

use std::collections::BTreeSet;

pub use bundle::{BundleLoadError, Constraint, ConstraintBundle, Kind, VarDecl};
pub use eval::{eval_bool, eval_expr, EvalError};
pub use expr::{CmpOp, Expr, ExprParseError};
pub use validate::{is_identifier, sort_of, validate_bundle, ValidationError, RESERVED_PREFIX};
pub use value::{format_decimal, parse_decimal, value_from_json, Assignment, Sort, Value};

/// Declared variables that are neither assigned by `facts` nor defined by a
/// HARD defining equality; the solver is free to choose their values.
pub fn free_variables(bundle: &ConstraintBundle, facts: &Assignment) -> BTreeSet<String> {
    let defined: BTreeSet<String> = bundle.defined_variables().into_iter().collect();
    bundle
        .vars
        .iter()
        .map(|v| v.name.clone())
        .filter(|name| !facts.contains(name) && !defined.contains(name))
        .collect()
}
