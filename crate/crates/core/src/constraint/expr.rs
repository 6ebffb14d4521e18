use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value as Json;

use super::value::{format_decimal, looks_numeric, parse_decimal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "distinct",
        }
    }

    fn infix(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "≤",
            CmpOp::Gt => ">",
            CmpOp::Ge => "≥",
            CmpOp::Eq => "=",
            CmpOp::Ne => "≠",
        }
    }
}

/// Typed expression tree over declared variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Bool(bool),
    Int(BigInt),
    /// Exact decimal literal, sort REAL.
    Decimal(BigRational),
    Var(String),
    Neg(Box<Expr>),
    Add(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Iff(Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    /// Decimal literal from its text form; panics on malformed input.
    pub fn dec(text: &str) -> Expr {
        Expr::Decimal(parse_decimal(text).unwrap_or_else(|| panic!("invalid decimal {text:?}")))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(items: Vec<Expr>) -> Expr {
        Expr::And(items)
    }

    pub fn or(items: Vec<Expr>) -> Expr {
        Expr::Or(items)
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Expr, b: Expr) -> Expr {
        Expr::Iff(Box::new(a), Box::new(b))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn lt(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Lt, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Le, a, b)
    }

    pub fn gt(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Gt, a, b)
    }

    pub fn ge(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Ge, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, a, b)
    }

    pub fn ne(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Ne, a, b)
    }

    pub fn add(items: Vec<Expr>) -> Expr {
        Expr::Add(items)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    /// Numeric literal, possibly negated.
    pub fn is_numeric_literal(&self) -> bool {
        match self {
            Expr::Int(_) | Expr::Decimal(_) => true,
            Expr::Neg(inner) => inner.is_numeric_literal(),
            _ => false,
        }
    }

    /// Value of a numeric literal, if this is one.
    pub fn literal_value(&self) -> Option<BigRational> {
        match self {
            Expr::Int(i) => Some(BigRational::from_integer(i.clone())),
            Expr::Decimal(d) => Some(d.clone()),
            Expr::Neg(inner) => inner.literal_value().map(|v| -v),
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Bool(_) | Expr::Int(_) | Expr::Decimal(_) | Expr::Var(_) => Vec::new(),
            Expr::Neg(a) | Expr::Not(a) => vec![a],
            Expr::Add(items) | Expr::And(items) | Expr::Or(items) => items.iter().collect(),
            Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::Implies(a, b)
            | Expr::Iff(a, b) => vec![a, b],
            Expr::Ite(c, t, e) => vec![c, t, e],
        }
    }

    /// Every variable name referenced, in first-occurrence order without duplicates.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.collect_vars(&mut seen, &mut out);
        out
    }

    fn collect_vars(&self, seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
        if let Expr::Var(name) = self {
            if seen.insert(name.clone()) {
                out.push(name.clone());
            }
            return;
        }
        for child in self.children() {
            child.collect_vars(seen, out);
        }
    }

    /// True when the tree divides by something other than a literal.
    pub fn has_variable_denominator(&self) -> bool {
        if let Expr::Div(_, den) = self {
            if !den.is_numeric_literal() {
                return true;
            }
        }
        self.children().into_iter().any(Expr::has_variable_denominator)
    }

    pub fn to_json(&self) -> Json {
        fn head(op: &str, args: Vec<Json>) -> Json {
            let mut items = Vec::with_capacity(args.len() + 1);
            items.push(Json::String(op.to_string()));
            items.extend(args);
            Json::Array(items)
        }
        let many = |items: &[Expr]| items.iter().map(Expr::to_json).collect::<Vec<_>>();
        match self {
            Expr::Bool(b) => Json::Bool(*b),
            Expr::Int(i) => match i.to_i64() {
                Some(v) => Json::from(v),
                // Out-of-range integers keep exactness as a list form.
                None => head("int", vec![Json::String(i.to_string())]),
            },
            Expr::Decimal(d) => Json::String(format_decimal(d)),
            Expr::Var(name) => Json::String(name.clone()),
            Expr::Neg(a) => head("-", vec![a.to_json()]),
            Expr::Add(items) => head("+", many(items)),
            Expr::Sub(a, b) => head("-", vec![a.to_json(), b.to_json()]),
            Expr::Mul(a, b) => head("*", vec![a.to_json(), b.to_json()]),
            Expr::Div(a, b) => head("/", vec![a.to_json(), b.to_json()]),
            Expr::Cmp(op, a, b) => head(op.symbol(), vec![a.to_json(), b.to_json()]),
            Expr::Not(a) => head("not", vec![a.to_json()]),
            Expr::And(items) => head("and", many(items)),
            Expr::Or(items) => head("or", many(items)),
            Expr::Implies(a, b) => head("=>", vec![a.to_json(), b.to_json()]),
            Expr::Iff(a, b) => head("iff", vec![a.to_json(), b.to_json()]),
            Expr::Ite(c, t, e) => head("ite", vec![c.to_json(), t.to_json(), e.to_json()]),
        }
    }

    pub fn from_json(raw: &Json) -> Result<Expr, ExprParseError> {
        match raw {
            Json::Bool(b) => Ok(Expr::Bool(*b)),
            Json::Number(n) => n
                .as_i64()
                .map(Expr::int)
                .ok_or_else(|| ExprParseError(format!("number {n} is not an integer; write decimals as strings"))),
            Json::String(s) => {
                if looks_numeric(s) {
                    parse_decimal(s)
                        .map(Expr::Decimal)
                        .ok_or_else(|| ExprParseError(format!("malformed decimal literal `{s}`")))
                } else if s.is_empty() {
                    Err(ExprParseError("empty identifier".into()))
                } else {
                    Ok(Expr::Var(s.clone()))
                }
            }
            Json::Array(items) => {
                let Some((op, args)) = items.split_first() else {
                    return Err(ExprParseError("empty expression list".into()));
                };
                let Json::String(op) = op else {
                    return Err(ExprParseError(format!("operator must be a string, got {op}")));
                };
                let args = args.iter().map(Expr::from_json).collect::<Result<Vec<_>, _>>()?;
                build(op, args)
            }
            other => Err(ExprParseError(format!("unexpected JSON in expression: {other}"))),
        }
    }
}

fn build(op: &str, mut args: Vec<Expr>) -> Result<Expr, ExprParseError> {
    let arity = |want: usize, args: &Vec<Expr>| {
        if args.len() == want {
            Ok(())
        } else {
            Err(ExprParseError(format!("`{op}` expects {want} operands, got {}", args.len())))
        }
    };
    let two = |mut args: Vec<Expr>| {
        let b = args.pop().unwrap();
        let a = args.pop().unwrap();
        (Box::new(a), Box::new(b))
    };
    let cmp = |cop: CmpOp, args: Vec<Expr>| -> Result<Expr, ExprParseError> {
        arity(2, &args)?;
        let (a, b) = two(args);
        Ok(Expr::Cmp(cop, a, b))
    };
    match op {
        "int" => {
            arity(1, &args)?;
            match args.pop().unwrap() {
                Expr::Decimal(d) if d.is_integer() => Ok(Expr::Int(d.to_integer())),
                _ => Err(ExprParseError("`int` takes a digit string".into())),
            }
        }
        "+" => Ok(Expr::Add(args)),
        "-" => match args.len() {
            1 => Ok(Expr::Neg(Box::new(args.pop().unwrap()))),
            2 => {
                let (a, b) = two(args);
                Ok(Expr::Sub(a, b))
            }
            n => Err(ExprParseError(format!("`-` expects 1 or 2 operands, got {n}"))),
        },
        "*" => {
            arity(2, &args)?;
            let (a, b) = two(args);
            Ok(Expr::Mul(a, b))
        }
        "/" => {
            arity(2, &args)?;
            let (a, b) = two(args);
            Ok(Expr::Div(a, b))
        }
        "<" => cmp(CmpOp::Lt, args),
        "<=" => cmp(CmpOp::Le, args),
        ">" => cmp(CmpOp::Gt, args),
        ">=" => cmp(CmpOp::Ge, args),
        "=" | "==" => cmp(CmpOp::Eq, args),
        "distinct" | "!=" => cmp(CmpOp::Ne, args),
        "not" => {
            arity(1, &args)?;
            Ok(Expr::Not(Box::new(args.pop().unwrap())))
        }
        "and" => Ok(Expr::And(args)),
        "or" => Ok(Expr::Or(args)),
        "=>" | "implies" => {
            arity(2, &args)?;
            let (a, b) = two(args);
            Ok(Expr::Implies(a, b))
        }
        "iff" | "<=>" => {
            arity(2, &args)?;
            let (a, b) = two(args);
            Ok(Expr::Iff(a, b))
        }
        "ite" => {
            arity(3, &args)?;
            let e = args.pop().unwrap();
            let t = args.pop().unwrap();
            let c = args.pop().unwrap();
            Ok(Expr::ite(c, t, e))
        }
        other => Err(ExprParseError(format!("unknown operator `{other}`"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("expression parse error: {0}")]
pub struct ExprParseError(pub String);

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Json::deserialize(d)?;
        Expr::from_json(&raw).map_err(serde::de::Error::custom)
    }
}

/// Infix rendering for humans (`r ≥ 200`).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, items: &[Expr], sep: &str, empty: &str| {
            if items.is_empty() {
                return f.write_str(empty);
            }
            f.write_str("(")?;
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{item}")?;
            }
            f.write_str(")")
        };
        match self {
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Decimal(d) => f.write_str(&format_decimal(d)),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Add(items) => join(f, items, " + ", "0"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} × {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.infix()),
            Expr::Not(a) => write!(f, "¬{a}"),
            Expr::And(items) => join(f, items, " ∧ ", "true"),
            Expr::Or(items) => join(f, items, " ∨ ", "false"),
            Expr::Implies(a, b) => write!(f, "({a} ⇒ {b})"),
            Expr::Iff(a, b) => write!(f, "({a} ⇔ {b})"),
            Expr::Ite(c, t, e) => write!(f, "(if {c} then {t} else {e})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let e = Expr::implies(
            Expr::and(vec![Expr::var("plan_submitted"), Expr::var("plan_executed")]),
            Expr::ge(Expr::var("r"), Expr::dec("111.09")),
        );
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"["=>",["and","plan_submitted","plan_executed"],[">=","r","111.09"]]"#);
        let back: Expr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn numbers_versus_names() {
        assert_eq!(Expr::from_json(&serde_json::json!("12")).unwrap(), Expr::dec("12"));
        assert_eq!(Expr::from_json(&serde_json::json!(12)).unwrap(), Expr::int(12));
        assert_eq!(Expr::from_json(&serde_json::json!("x12")).unwrap(), Expr::var("x12"));
        assert!(Expr::from_json(&serde_json::json!("1.2.3")).is_err());
        assert!(Expr::from_json(&serde_json::json!(1.5)).is_err());
    }

    #[test]
    fn unary_minus_and_arity() {
        let e = Expr::from_json(&serde_json::json!(["-", "x"])).unwrap();
        assert_eq!(e, Expr::neg(Expr::var("x")));
        assert!(Expr::from_json(&serde_json::json!(["ite", true, 1])).is_err());
        assert!(Expr::from_json(&serde_json::json!(["frob", 1])).is_err());
        assert!(Expr::from_json(&serde_json::json!([])).is_err());
    }

    #[test]
    fn variable_collection_is_ordered_and_unique() {
        let e = Expr::and(vec![Expr::var("b"), Expr::var("a"), Expr::not(Expr::var("b"))]);
        assert_eq!(e.variables(), vec!["b".to_string(), "a".to_string()]);
    }

    #[test]
    fn infix_display() {
        let e = Expr::ge(Expr::var("r"), Expr::dec("200"));
        assert_eq!(e.to_string(), "r ≥ 200");
    }
}
