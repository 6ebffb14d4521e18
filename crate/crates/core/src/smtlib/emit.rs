use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::constraint::{CmpOp, Constraint, ConstraintBundle, Expr, Kind, Sort};

/// Assertion name of the `penalty = false` pin.
pub const PIN_NAME: &str = "lexv_penalty_pin";
/// Assertion name of the relaxation cost bound.
pub const BOUND_NAME: &str = "lexv_cost_bound";
const SELECTOR_PREFIX: &str = "lexv_sel_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    /// HARD constraints only.
    Consistency,
    /// HARD ∪ SOFT-as-HARD ∪ {penalty = false}.
    Illegality,
    /// Every constraint asserted as HARD under its own name; the working
    /// form of illegal-term enumeration.
    Hardened,
    /// HARD plus selector-relaxed SOFT constraints and a weighted cost bound.
    Relaxation,
}

/// What an assertion name in a script stands for.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum AssertionRef {
    Constraint(String),
    PenaltyPin,
    CostBound,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Restrict assertions to these constraint ids (all constraints when `None`).
    pub active: Option<BTreeSet<String>>,
    /// Assert `penalty = false`; defaults to true for ILLEGALITY/HARDENED, false otherwise.
    pub pin_penalty: Option<bool>,
    /// RELAXATION only: SOFT ids that receive a selector (all SOFT when `None`).
    /// SOFT constraints outside this set are asserted plainly.
    pub relaxed: Option<BTreeSet<String>>,
    /// RELAXATION only: cost bound `k`; no bound is asserted when `None`.
    pub bound: Option<u64>,
    /// Per-constraint weight replacing the declared effective weight.
    pub weights: BTreeMap<String, u64>,
    pub want_model: Option<bool>,
    pub want_core: Option<bool>,
    /// Logic override; otherwise QF_LIRA, or QF_NIRA when a variable denominator occurs.
    pub logic: Option<String>,
}

impl EmitOptions {
    pub fn active(ids: impl IntoIterator<Item = String>) -> Self {
        Self { active: Some(ids.into_iter().collect()), ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("unsupported expression in `{constraint}`: {detail}")]
    UnsupportedExpr { constraint: String, detail: String },
    #[error("unknown constraint id `{0}`")]
    UnknownConstraint(String),
    #[error("penalty variable `{0}` is not declared")]
    UndeclaredPenalty(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtScript {
    pub text: String,
    pub mode: Mode,
    /// Assertion name (unquoted) → what it asserts.
    pub name_map: BTreeMap<String, AssertionRef>,
    /// Declared case variables and their sorts.
    pub vars: BTreeMap<String, Sort>,
    /// Selector symbol → relaxed constraint id.
    pub selectors: BTreeMap<String, String>,
    pub model_requested: bool,
    pub core_requested: bool,
}

impl SmtScript {
    /// Assertion name used for a constraint id, if asserted.
    pub fn name_of(&self, id: &str) -> Option<&str> {
        self.name_map.iter().find_map(|(name, r)| match r {
            AssertionRef::Constraint(c) if c == id => Some(name.as_str()),
            _ => None,
        })
    }
}

pub fn emit_script(bundle: &ConstraintBundle, mode: Mode, opts: &EmitOptions) -> Result<SmtScript, EmitError> {
    for id in opts.active.iter().chain(opts.relaxed.iter()).flatten() {
        if bundle.constraint(id).is_none() {
            return Err(EmitError::UnknownConstraint(id.clone()));
        }
    }

    let selected: Vec<(usize, &Constraint)> = bundle
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| opts.active.as_ref().map_or(true, |a| a.contains(&c.id)))
        .filter(|(_, c)| mode != Mode::Consistency || c.kind == Kind::Hard)
        .collect();

    let pin = opts.pin_penalty.unwrap_or(matches!(mode, Mode::Illegality | Mode::Hardened));
    if pin && bundle.var(&bundle.penalty_var).is_none() {
        return Err(EmitError::UndeclaredPenalty(bundle.penalty_var.clone()));
    }
    let want_model = opts.want_model.unwrap_or(mode != Mode::Hardened);
    let want_core = opts.want_core.unwrap_or(mode != Mode::Relaxation);
    let logic = opts
        .logic
        .clone()
        .unwrap_or_else(|| if bundle.has_variable_denominator() { "QF_NIRA" } else { "QF_LIRA" }.to_string());

    let var_names: BTreeSet<&str> = bundle.vars.iter().map(|v| v.name.as_str()).collect();
    let mut script = SmtScript {
        text: String::new(),
        mode,
        name_map: BTreeMap::new(),
        vars: bundle.vars.iter().map(|v| (v.name.clone(), v.sort)).collect(),
        selectors: BTreeMap::new(),
        model_requested: want_model,
        core_requested: want_core,
    };

    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n");
    out.push_str("(set-option :produce-unsat-cores true)\n");
    let _ = writeln!(out, "(set-logic {logic})");
    for v in &bundle.vars {
        let _ = writeln!(out, "(declare-fun {} () {})", symbol(&v.name), smt_sort(v.sort));
    }

    let relaxing = |c: &Constraint| {
        mode == Mode::Relaxation
            && c.kind == Kind::Soft
            && opts.relaxed.as_ref().map_or(true, |r| r.contains(&c.id))
    };
    let weight = |c: &Constraint| opts.weights.get(&c.id).copied().unwrap_or_else(|| c.effective_weight());

    let mut cost_terms = Vec::new();
    for (index, c) in &selected {
        if relaxing(c) {
            let sel = format!("{SELECTOR_PREFIX}{index}");
            let _ = writeln!(out, "(declare-fun {sel} () Bool)");
            cost_terms.push(format!("(ite {sel} {} 0)", weight(c)));
            script.selectors.insert(sel, c.id.clone());
        }
    }

    let mut body = String::new();
    for (index, c) in &selected {
        let name = assertion_name(&c.id, *index, &var_names);
        let formula = term(&c.expr).map_err(|detail| EmitError::UnsupportedExpr { constraint: c.id.clone(), detail })?;
        let formula = if relaxing(c) { format!("(or {formula} {SELECTOR_PREFIX}{index})") } else { formula };
        let _ = writeln!(body, "(assert (! {formula} :named {}))", symbol(&name));
        script.name_map.insert(name, AssertionRef::Constraint(c.id.clone()));
    }
    if pin {
        let formula = term(&bundle.penalty_clear()).expect("penalty literal is linear");
        let _ = writeln!(body, "(assert (! {formula} :named {PIN_NAME}))");
        script.name_map.insert(PIN_NAME.to_string(), AssertionRef::PenaltyPin);
    }
    if let (Mode::Relaxation, Some(k)) = (mode, opts.bound) {
        if !cost_terms.is_empty() {
            let sum = if cost_terms.len() == 1 { cost_terms.remove(0) } else { format!("(+ {})", cost_terms.join(" ")) };
            let _ = writeln!(body, "(assert (! (<= {sum} {k}) :named {BOUND_NAME}))");
            script.name_map.insert(BOUND_NAME.to_string(), AssertionRef::CostBound);
        }
    }
    out.push_str(&body);
    out.push_str("(check-sat)\n");
    if want_core {
        out.push_str("(get-unsat-core)\n");
    }
    if want_model {
        out.push_str("(get-model)\n");
    }
    script.text = out;
    Ok(script)
}

fn smt_sort(sort: Sort) -> &'static str {
    match sort {
        Sort::Bool => "Bool",
        Sort::Int => "Int",
        Sort::Real => "Real",
    }
}

fn is_simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || "~!@$%^&*_-+=<>.?/".contains(c) => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

/// Renders a symbol, quoting it when it is not a simple SMT-LIB symbol.
pub fn symbol(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn assertion_name(id: &str, index: usize, vars: &BTreeSet<&str>) -> String {
    const KEYWORDS: &[&str] = &["true", "false", "not", "and", "or", "xor", "ite", "distinct", "abs", "div", "mod"];
    if vars.contains(id) || KEYWORDS.contains(&id) {
        format!("lexv_n{index}")
    } else {
        id.to_string()
    }
}

fn int_literal(i: &BigInt) -> String {
    if i.is_negative() {
        format!("(- {})", -i)
    } else {
        i.to_string()
    }
}

/// Exact rational literal: `200.0`, `(/ 11109 100)`, `(- (/ 1 3))`.
pub fn real_literal(r: &BigRational) -> String {
    let magnitude = r.abs();
    let body = if magnitude.is_integer() {
        format!("{}.0", magnitude.numer())
    } else {
        format!("(/ {} {})", magnitude.numer(), magnitude.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn nary(op: &str, items: &[Expr], empty: &str) -> Result<String, String> {
    match items {
        [] => Ok(empty.to_string()),
        [single] => term(single),
        _ => {
            let parts: Result<Vec<String>, String> = items.iter().map(term).collect();
            Ok(format!("({op} {})", parts?.join(" ")))
        }
    }
}

/// Compiles one expression to an SMT-LIB term.
pub fn term(e: &Expr) -> Result<String, String> {
    Ok(match e {
        Expr::Bool(b) => b.to_string(),
        Expr::Int(i) => int_literal(i),
        Expr::Decimal(d) => real_literal(d),
        Expr::Var(name) => symbol(name),
        Expr::Neg(a) => format!("(- {})", term(a)?),
        Expr::Add(items) => {
            if items.is_empty() {
                return Err("empty sum".into());
            }
            nary("+", items, "0")?
        }
        Expr::Sub(a, b) => format!("(- {} {})", term(a)?, term(b)?),
        Expr::Mul(a, b) => {
            if !a.is_numeric_literal() && !b.is_numeric_literal() {
                return Err(format!("product `{e}` has no literal operand"));
            }
            format!("(* {} {})", term(a)?, term(b)?)
        }
        Expr::Div(a, b) => {
            match b.literal_value() {
                Some(v) if v.is_zero() => return Err(format!("division by zero in `{e}`")),
                Some(_) => {}
                None if matches!(b.as_ref(), Expr::Var(_)) => {}
                None => return Err(format!("denominator of `{e}` is neither a literal nor a variable")),
            }
            format!("(/ {} {})", term(a)?, term(b)?)
        }
        Expr::Cmp(op, a, b) => {
            let sym = match op {
                CmpOp::Ne => "distinct",
                other => other.symbol(),
            };
            format!("({sym} {} {})", term(a)?, term(b)?)
        }
        Expr::Not(a) => format!("(not {})", term(a)?),
        Expr::And(items) => nary("and", items, "true")?,
        Expr::Or(items) => nary("or", items, "false")?,
        Expr::Implies(a, b) => format!("(=> {} {})", term(a)?, term(b)?),
        Expr::Iff(a, b) => format!("(= {} {})", term(a)?, term(b)?),
        Expr::Ite(c, t, f) => format!("(ite {} {} {})", term(c)?, term(t)?, term(f)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::VarDecl;

    fn tiny() -> ConstraintBundle {
        ConstraintBundle {
            case_id: "tiny".into(),
            vars: vec![VarDecl::new("x", Sort::Real), VarDecl::new("p", Sort::Bool)],
            constraints: vec![
                Constraint::hard("h", "law", Expr::iff(Expr::var("p"), Expr::lt(Expr::var("x"), Expr::dec("10")))),
                Constraint::soft("f", "fact", 2, Expr::eq(Expr::var("x"), Expr::dec("-2.5"))),
            ],
            penalty_var: "p".into(),
            facts: Default::default(),
            meta: Default::default(),
        }
    }

    #[test]
    fn decimals_are_exact_rationals() {
        assert_eq!(term(&Expr::dec("111.09")).unwrap(), "(/ 11109 100)");
        assert_eq!(term(&Expr::dec("200")).unwrap(), "200.0");
        assert_eq!(term(&Expr::dec("-2.5")).unwrap(), "(- (/ 5 2))");
        assert_eq!(term(&Expr::int(-3)).unwrap(), "(- 3)");
    }

    #[test]
    fn relaxation_adds_selectors_and_bound() {
        let opts = EmitOptions { bound: Some(0), ..Default::default() };
        let s = emit_script(&tiny(), Mode::Relaxation, &opts).unwrap();
        assert!(s.text.contains("(declare-fun lexv_sel_1 () Bool)"));
        assert!(s.text.contains("(assert (! (or (= x (- (/ 5 2))) lexv_sel_1) :named f))"));
        assert!(s.text.contains("(assert (! (<= (ite lexv_sel_1 2 0) 0) :named lexv_cost_bound))"));
        assert!(!s.text.contains(PIN_NAME));
        assert_eq!(s.selectors.get("lexv_sel_1").map(String::as_str), Some("f"));
    }

    #[test]
    fn consistency_asserts_only_hard() {
        let s = emit_script(&tiny(), Mode::Consistency, &EmitOptions::default()).unwrap();
        assert_eq!(s.name_map.len(), 1);
        assert!(s.name_map.contains_key("h"));
        assert!(s.text.contains("(get-unsat-core)"));
    }

    #[test]
    fn illegality_pins_penalty() {
        let s = emit_script(&tiny(), Mode::Illegality, &EmitOptions::default()).unwrap();
        assert!(s.text.contains("(assert (! (not p) :named lexv_penalty_pin))"));
        assert_eq!(s.name_map.get(PIN_NAME), Some(&AssertionRef::PenaltyPin));
    }

    #[test]
    fn colliding_ids_are_renamed_and_odd_ids_quoted() {
        let mut b = tiny();
        b.constraints[0].id = "x".into();
        b.constraints[1].id = "fact:1".into();
        let s = emit_script(&b, Mode::Illegality, &EmitOptions::default()).unwrap();
        assert_eq!(s.name_map.get("lexv_n0"), Some(&AssertionRef::Constraint("x".into())));
        assert!(s.text.contains(":named |fact:1|"));
    }

    #[test]
    fn emission_is_deterministic() {
        let a = emit_script(&tiny(), Mode::Hardened, &EmitOptions::default()).unwrap();
        let b = emit_script(&tiny(), Mode::Hardened, &EmitOptions::default()).unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn nonlinear_product_is_rejected() {
        let mut b = tiny();
        b.constraints[0].expr = Expr::gt(Expr::mul(Expr::var("x"), Expr::var("x")), Expr::dec("0"));
        assert!(matches!(
            emit_script(&b, Mode::Consistency, &EmitOptions::default()),
            Err(EmitError::UnsupportedExpr { .. })
        ));
    }
}
