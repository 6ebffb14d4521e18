use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The three sorts of the constraint language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl Sort {
    pub fn is_numeric(self) -> bool {
        matches!(self, Sort::Int | Sort::Real)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sort::Bool => "BOOL",
            Sort::Int => "INT",
            Sort::Real => "REAL",
        }
    }

    /// The value a solver-omitted binding of this sort completes to.
    pub fn zero(self) -> Value {
        match self {
            Sort::Bool => Value::Bool(false),
            Sort::Int => Value::Int(BigInt::zero()),
            Sort::Real => Value::Real(BigRational::zero()),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BOOL" | "BOOLEAN" => Ok(Sort::Bool),
            "INT" | "INTEGER" => Ok(Sort::Int),
            "REAL" => Ok(Sort::Real),
            other => Err(format!("unknown sort `{other}`")),
        }
    }
}

impl Serialize for Sort {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Sort {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A concrete value. Numbers are exact; reals are rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Int(BigInt),
    Real(BigRational),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Int(_) => Sort::Int,
            Value::Real(_) => Sort::Real,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Numeric view; integers embed into the rationals.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Value::Int(i) => Some(BigRational::from_integer(i.clone())),
            Value::Real(r) => Some(r.clone()),
            Value::Bool(_) => None,
        }
    }

    pub fn real(text: &str) -> Value {
        Value::Real(parse_decimal(text).unwrap_or_else(|| panic!("invalid decimal literal {text:?}")))
    }

    pub fn int(v: i64) -> Value {
        Value::Int(BigInt::from(v))
    }

    /// Converts to `sort` when that is lossless (integers widen to reals).
    pub fn coerce(self, sort: Sort) -> Option<Value> {
        match (self, sort) {
            (v, s) if v.sort() == s => Some(v),
            (Value::Int(i), Sort::Real) => Some(Value::Real(BigRational::from_integer(i))),
            (Value::Real(r), Sort::Int) if r.is_integer() => Some(Value::Int(r.to_integer())),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => f.write_str(&format_decimal(r)),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => match i.to_i64() {
                Some(v) => s.serialize_i64(v),
                None => Err(serde::ser::Error::custom(format!("integer {i} exceeds 64 bits"))),
            },
            Value::Real(r) => s.serialize_str(&format_decimal(r)),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        value_from_json(&raw).map_err(serde::de::Error::custom)
    }
}

pub fn value_from_json(raw: &serde_json::Value) -> Result<Value, String> {
    match raw {
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Value::Int(BigInt::from(i))),
            None => Err(format!("non-integer number {n}: write real values as decimal strings")),
        },
        serde_json::Value::String(s) => parse_decimal(s)
            .map(Value::Real)
            .ok_or_else(|| format!("`{s}` is not a decimal literal")),
        other => Err(format!("unsupported value {other}")),
    }
}

/// Parses `"-12.345"`, `"7"` or `"1/3"` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_decimal(num)?;
        let den = parse_decimal(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) || (body.contains('.') && frac_part.is_empty()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if negative { -value } else { value })
}

/// True when `text` is shaped like a numeric literal rather than an identifier.
pub fn looks_numeric(text: &str) -> bool {
    let t = text.strip_prefix('-').unwrap_or(text);
    t.bytes().next().is_some_and(|b| b.is_ascii_digit())
}

/// Canonical printer: terminating decimals print positionally, anything else as `p/q`.
pub fn format_decimal(value: &BigRational) -> String {
    let denom = value.denom().clone();
    let mut rest = denom.clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while rest.is_even() && !rest.is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if rest != BigInt::from(1) {
        return format!("{}/{}", value.numer(), denom);
    }
    let places = twos.max(fives);
    if places == 0 {
        return value.numer().to_string();
    }
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = (value * BigRational::from_integer(scale)).to_integer();
    let digits = scaled.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// A (possibly partial) map from variable names to values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub BTreeMap<String, Value>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) -> Option<Value> {
        self.0.insert(name.into(), value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.insert(name, value);
        self
    }
}

impl FromIterator<(String, Value)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Self {
        Assignment(iter.into_iter().collect())
    }
}
