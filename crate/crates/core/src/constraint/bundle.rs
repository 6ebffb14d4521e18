use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::value::{Assignment, Sort};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub sort: Sort,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl VarDecl {
    pub fn new(name: &str, sort: Sort) -> Self {
        Self { name: name.to_string(), sort, group: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Kind {
    Hard,
    Soft,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    pub kind: Kind,
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<i64>,
    pub expr: Expr,
    /// Free-form annotations; `description` is the correction-trace template.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Constraint {
    pub fn hard(id: &str, group: &str, expr: Expr) -> Self {
        Self { id: id.into(), kind: Kind::Hard, group: group.into(), weight: None, expr, meta: BTreeMap::new() }
    }

    pub fn soft(id: &str, group: &str, weight: i64, expr: Expr) -> Self {
        Self { id: id.into(), kind: Kind::Soft, group: group.into(), weight: Some(weight), expr, meta: BTreeMap::new() }
    }

    pub fn with_description(mut self, text: &str) -> Self {
        self.meta.insert("description".into(), text.into());
        self
    }

    pub fn is_hard(&self) -> bool {
        self.kind == Kind::Hard
    }

    pub fn is_soft(&self) -> bool {
        self.kind == Kind::Soft
    }

    /// Declared weight for SOFT constraints (1 when omitted), 0 for HARD.
    pub fn effective_weight(&self) -> u64 {
        match self.kind {
            Kind::Hard => 0,
            Kind::Soft => self.weight.unwrap_or(1).max(0) as u64,
        }
    }
}

/// One case instance: declarations, law (HARD) and fact (SOFT) constraints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintBundle {
    pub case_id: String,
    pub vars: Vec<VarDecl>,
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub penalty_var: String,
    #[serde(default)]
    pub facts: Assignment,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ConstraintBundle {
    pub fn from_json_str(text: &str) -> Result<Self, BundleLoadError> {
        let mut bundle: ConstraintBundle = serde_json::from_str(text)?;
        bundle.normalize_facts();
        Ok(bundle)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BundleLoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| BundleLoadError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serialization is infallible")
    }

    /// Widens integer fact values declared REAL so they match their sort.
    pub fn normalize_facts(&mut self) {
        let sorts: BTreeMap<String, Sort> = self.vars.iter().map(|v| (v.name.clone(), v.sort)).collect();
        for (name, value) in self.facts.0.iter_mut() {
            if let Some(sort) = sorts.get(name.as_str()) {
                if let Some(v) = value.clone().coerce(*sort) {
                    *value = v;
                }
            }
        }
    }

    pub fn var_sorts(&self) -> BTreeMap<&str, Sort> {
        self.vars.iter().map(|v| (v.name.as_str(), v.sort)).collect()
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn constraint(&self, id: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn constraint_mut(&mut self, id: &str) -> Option<&mut Constraint> {
        self.constraints.iter_mut().find(|c| c.id == id)
    }

    pub fn hard(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.is_hard())
    }

    pub fn soft(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.is_soft())
    }

    pub fn total_soft_weight(&self) -> u64 {
        self.soft().map(Constraint::effective_weight).sum()
    }

    pub fn penalty_sort(&self) -> Option<Sort> {
        self.var(&self.penalty_var).map(|v| v.sort)
    }

    /// `penalty = false` (or `= 0` for an INT indicator).
    pub fn penalty_clear(&self) -> Expr {
        let pv = Expr::var(&self.penalty_var);
        match self.penalty_sort() {
            Some(Sort::Int) => Expr::eq(pv, Expr::int(0)),
            Some(Sort::Real) => Expr::eq(pv, Expr::dec("0")),
            _ => Expr::not(pv),
        }
    }

    /// `penalty = true` (or `= 1`).
    pub fn penalty_set(&self) -> Expr {
        let pv = Expr::var(&self.penalty_var);
        match self.penalty_sort() {
            Some(Sort::Int) => Expr::eq(pv, Expr::int(1)),
            Some(Sort::Real) => Expr::eq(pv, Expr::dec("1")),
            _ => pv,
        }
    }

    /// Variables whose value a HARD top-level equality (`v = e`, `v ⇔ e`) defines.
    pub fn defined_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.hard() {
            let lhs = match &c.expr {
                Expr::Iff(a, _) => a.as_ref(),
                Expr::Cmp(super::expr::CmpOp::Eq, a, _) => a.as_ref(),
                _ => continue,
            };
            if let Expr::Var(name) = lhs {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        }
        out
    }

    pub fn has_variable_denominator(&self) -> bool {
        self.constraints.iter().any(|c| c.expr.has_variable_denominator())
    }
}
