use num_rational::BigRational;
use num_traits::Zero;

use super::expr::{CmpOp, Expr};
use super::value::{Assignment, Value};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("free variable `{0}` encountered")]
    FreeVariableEncountered(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("ill-sorted expression `{0}`")]
    IllSorted(String),
}

/// Reference evaluator with exact arithmetic.
///
/// Connectives short-circuit left to right, so a partial assignment can still
/// decide `false ∧ x`; the first unassigned variable actually reached is reported.
pub fn eval_expr(expr: &Expr, assignment: &Assignment) -> Result<Value, EvalError> {
    Evaluator { assignment }.eval(expr)
}

/// Evaluates a BOOL expression.
pub fn eval_bool(expr: &Expr, assignment: &Assignment) -> Result<bool, EvalError> {
    eval_expr(expr, assignment)?.as_bool().ok_or_else(|| EvalError::IllSorted(expr.to_string()))
}

struct Evaluator<'a> {
    assignment: &'a Assignment,
}

enum Num {
    Int(BigRational),
    Real(BigRational),
}

impl Num {
    fn value(self) -> Value {
        match self {
            Num::Int(r) => Value::Int(r.to_integer()),
            Num::Real(r) => Value::Real(r),
        }
    }

    fn rational(&self) -> &BigRational {
        match self {
            Num::Int(r) | Num::Real(r) => r,
        }
    }

    fn map(self, f: impl FnOnce(BigRational) -> BigRational) -> Num {
        match self {
            Num::Int(r) => Num::Int(f(r)),
            Num::Real(r) => Num::Real(f(r)),
        }
    }
}

impl Evaluator<'_> {
    fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        match e {
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => {
                self.assignment.get(name).cloned().ok_or_else(|| EvalError::FreeVariableEncountered(name.clone()))
            }
            Expr::Not(a) => Ok(Value::Bool(!self.boolean(a)?)),
            Expr::And(items) => {
                for item in items {
                    if !self.boolean(item)? {
                        return Ok(Value::Bool(false));
                    }
                }
                Ok(Value::Bool(true))
            }
            Expr::Or(items) => {
                for item in items {
                    if self.boolean(item)? {
                        return Ok(Value::Bool(true));
                    }
                }
                Ok(Value::Bool(false))
            }
            Expr::Implies(a, b) => {
                if !self.boolean(a)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.boolean(b)?))
            }
            Expr::Iff(a, b) => Ok(Value::Bool(self.boolean(a)? == self.boolean(b)?)),
            Expr::Ite(c, t, f) => {
                if self.boolean(c)? {
                    self.eval(t)
                } else {
                    self.eval(f)
                }
            }
            Expr::Cmp(op, a, b) => {
                let va = self.eval(a)?;
                let vb = self.eval(b)?;
                let result = match (&va, &vb) {
                    (Value::Bool(x), Value::Bool(y)) => match op {
                        CmpOp::Eq => x == y,
                        CmpOp::Ne => x != y,
                        _ => return Err(EvalError::IllSorted(e.to_string())),
                    },
                    _ => {
                        let x = va.as_rational().ok_or_else(|| EvalError::IllSorted(e.to_string()))?;
                        let y = vb.as_rational().ok_or_else(|| EvalError::IllSorted(e.to_string()))?;
                        match op {
                            CmpOp::Lt => x < y,
                            CmpOp::Le => x <= y,
                            CmpOp::Gt => x > y,
                            CmpOp::Ge => x >= y,
                            CmpOp::Eq => x == y,
                            CmpOp::Ne => x != y,
                        }
                    }
                };
                Ok(Value::Bool(result))
            }
            _ => Ok(self.num(e)?.value()),
        }
    }

    fn boolean(&self, e: &Expr) -> Result<bool, EvalError> {
        self.eval(e)?.as_bool().ok_or_else(|| EvalError::IllSorted(e.to_string()))
    }

    fn num(&self, e: &Expr) -> Result<Num, EvalError> {
        match e {
            Expr::Int(i) => Ok(Num::Int(BigRational::from_integer(i.clone()))),
            Expr::Decimal(d) => Ok(Num::Real(d.clone())),
            Expr::Var(name) => match self.assignment.get(name) {
                None => Err(EvalError::FreeVariableEncountered(name.clone())),
                Some(Value::Int(i)) => Ok(Num::Int(BigRational::from_integer(i.clone()))),
                Some(Value::Real(r)) => Ok(Num::Real(r.clone())),
                Some(Value::Bool(_)) => Err(EvalError::IllSorted(e.to_string())),
            },
            Expr::Neg(a) => Ok(self.num(a)?.map(|r| -r)),
            Expr::Add(items) => {
                let mut iter = items.iter();
                let first = iter.next().ok_or_else(|| EvalError::IllSorted(e.to_string()))?;
                let mut acc = self.num(first)?;
                for item in iter {
                    let next = self.num(item)?;
                    acc = acc.map(|r| r + next.rational());
                }
                Ok(acc)
            }
            Expr::Sub(a, b) => {
                let x = self.num(a)?;
                let y = self.num(b)?;
                Ok(x.map(|r| r - y.rational()))
            }
            Expr::Mul(a, b) => {
                let x = self.num(a)?;
                let y = self.num(b)?;
                Ok(x.map(|r| r * y.rational()))
            }
            Expr::Div(a, b) => {
                let x = self.num(a)?;
                let y = self.num(b)?;
                if y.rational().is_zero() {
                    return Err(EvalError::DivisionByZero(e.to_string()));
                }
                Ok(Num::Real(x.rational() / y.rational()))
            }
            Expr::Ite(c, t, f) => {
                if self.boolean(c)? {
                    self.num(t)
                } else {
                    self.num(f)
                }
            }
            _ => Err(EvalError::IllSorted(e.to_string())),
        }
    }
}
