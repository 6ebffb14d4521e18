//! Edits applied to a working copy of a bundle during what-if analysis.

use serde::{Deserialize, Serialize};

use crate::constraint::{validate_bundle, value_from_json, Constraint, ConstraintBundle, Expr, Kind, Sort, ValidationError, Value, VarDecl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModifyAction {
    /// Boolean fact: flip its asserted literal. Constraint: flip HARD ↔ SOFT.
    Toggle,
    FixValue { value: serde_json::Value },
    InjectParameter {
        #[serde(default)]
        name: Option<String>,
        sort: Sort,
        value: serde_json::Value,
    },
    SetWeight { weight: i64 },
    SetKind { kind: Kind },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifyRequest {
    /// Constraint id or variable name (the new parameter's name for INJECT_PARAMETER).
    pub target: String,
    #[serde(flatten)]
    pub action: ModifyAction,
    pub expected_version: u64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModifyError {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("`{target}` has sort {expected}, got {got}")]
    SortMismatch { target: String, expected: Sort, got: String },
    #[error("`{0}` is not a Boolean fact")]
    NotABooleanFact(String),
    #[error("`{0}` is a constraint; expected a variable")]
    NotAVariable(String),
    #[error("`{0}` is a variable; expected a constraint")]
    NotAConstraint(String),
    #[error("`{0}` is already declared")]
    AlreadyDeclared(String),
    #[error("weight of `{0}` must be a positive integer")]
    NonpositiveWeight(String),
    #[error("`{0}` is HARD and carries no weight")]
    NotSoft(String),
    #[error("edit leaves the bundle invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
}

/// Applies `action` to a copy of `bundle`; the result is always valid.
pub fn apply_modification(bundle: &ConstraintBundle, target: &str, action: &ModifyAction) -> Result<ConstraintBundle, ModifyError> {
    let mut out = bundle.clone();
    match action {
        ModifyAction::Toggle => toggle(&mut out, target)?,
        ModifyAction::FixValue { value } => {
            if out.constraint(target).is_some() {
                return Err(ModifyError::NotAVariable(target.into()));
            }
            let sort = out.var(target).ok_or_else(|| ModifyError::UnknownTarget(target.into()))?.sort;
            let value = typed(target, sort, value)?;
            set_fact(&mut out, target, value);
        }
        ModifyAction::InjectParameter { name, sort, value } => {
            let name = name.as_deref().unwrap_or(target);
            if out.var(name).is_some() || out.constraint(name).is_some() {
                return Err(ModifyError::AlreadyDeclared(name.into()));
            }
            let value = typed(name, *sort, value)?;
            out.vars.push(VarDecl { name: name.into(), sort: *sort, group: Some(format!("param:{name}")) });
            out.constraints.push(
                Constraint::hard(&format!("param_{name}"), &format!("param:{name}"), pin(name, &value))
                    .with_description(&format!("Parameter {name} = {value}")),
            );
        }
        ModifyAction::SetWeight { weight } => {
            let c = constraint_mut(&mut out, target)?;
            if c.kind == Kind::Hard {
                return Err(ModifyError::NotSoft(target.into()));
            }
            if *weight < 1 {
                return Err(ModifyError::NonpositiveWeight(target.into()));
            }
            c.weight = Some(*weight);
        }
        ModifyAction::SetKind { kind } => {
            let c = constraint_mut(&mut out, target)?;
            set_kind(c, *kind);
        }
    }
    let errors = validate_bundle(&out);
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(ModifyError::Invalid(errors))
    }
}

fn constraint_mut<'a>(bundle: &'a mut ConstraintBundle, target: &str) -> Result<&'a mut Constraint, ModifyError> {
    if bundle.constraint(target).is_none() {
        return Err(if bundle.var(target).is_some() {
            ModifyError::NotAConstraint(target.into())
        } else {
            ModifyError::UnknownTarget(target.into())
        });
    }
    Ok(bundle.constraint_mut(target).expect("checked above"))
}

fn set_kind(c: &mut Constraint, kind: Kind) {
    c.kind = kind;
    c.weight = match kind {
        Kind::Hard => None,
        Kind::Soft => Some(c.weight.unwrap_or(1).max(1)),
    };
}

fn toggle(bundle: &mut ConstraintBundle, target: &str) -> Result<(), ModifyError> {
    if let Some(c) = bundle.constraint_mut(target) {
        let flipped = if c.kind == Kind::Hard { Kind::Soft } else { Kind::Hard };
        set_kind(c, flipped);
        return Ok(());
    }
    let decl = bundle.var(target).ok_or_else(|| ModifyError::UnknownTarget(target.into()))?;
    if decl.sort != Sort::Bool {
        return Err(ModifyError::NotABooleanFact(target.into()));
    }
    let current = match bundle.facts.get(target) {
        Some(Value::Bool(b)) => Some(*b),
        _ => bundle.soft().find_map(|c| pinned_literal(&c.expr, target)),
    };
    let current = current.ok_or_else(|| ModifyError::NotABooleanFact(target.into()))?;
    set_fact(bundle, target, Value::Bool(!current));
    Ok(())
}

/// Records `value` as the fact for `var` and rewrites the SOFT constraints that pin it.
fn set_fact(bundle: &mut ConstraintBundle, var: &str, value: Value) {
    bundle.facts.insert(var, value.clone());
    let mut rewritten = false;
    for c in bundle.constraints.iter_mut().filter(|c| c.kind == Kind::Soft) {
        if pins(&c.expr, var) {
            c.expr = pin(var, &value);
            rewritten = true;
        }
    }
    if !rewritten {
        let group = bundle.var(var).and_then(|d| d.group.clone()).unwrap_or_else(|| format!("fact:{var}"));
        let mut id = format!("fix_{var}");
        while bundle.constraint(&id).is_some() {
            id.push('_');
        }
        bundle.constraints.push(Constraint::soft(&id, &group, 1, pin(var, &value)));
    }
}

fn pin(var: &str, value: &Value) -> Expr {
    match value {
        Value::Bool(true) => Expr::var(var),
        Value::Bool(false) => Expr::not(Expr::var(var)),
        Value::Int(i) => Expr::eq(Expr::var(var), Expr::Int(i.clone())),
        Value::Real(r) => Expr::eq(Expr::var(var), Expr::Decimal(r.clone())),
    }
}

fn is_var(e: &Expr, var: &str) -> bool {
    matches!(e, Expr::Var(v) if v == var)
}

/// Whether `e` is a fact literal for `var`: `v`, `¬v`, `v = c` or `c = v`.
fn pins(e: &Expr, var: &str) -> bool {
    match e {
        Expr::Var(_) => is_var(e, var),
        Expr::Not(inner) => is_var(inner, var),
        Expr::Cmp(crate::constraint::CmpOp::Eq, a, b) => {
            (is_var(a, var) && b.is_numeric_literal()) || (is_var(b, var) && a.is_numeric_literal())
        }
        _ => false,
    }
}

fn pinned_literal(e: &Expr, var: &str) -> Option<bool> {
    match e {
        Expr::Var(v) if v == var => Some(true),
        Expr::Not(inner) if is_var(inner, var) => Some(false),
        _ => None,
    }
}

fn typed(target: &str, sort: Sort, raw: &serde_json::Value) -> Result<Value, ModifyError> {
    let mismatch = || ModifyError::SortMismatch { target: target.into(), expected: sort, got: raw.to_string() };
    let value = value_from_json(raw).map_err(|_| mismatch())?;
    value.coerce(sort).ok_or_else(mismatch)
}
