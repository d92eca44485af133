//! Symbolic scalar expressions over state variables `x1..xn` and named
//! parameters.
//!
//! Expressions are immutable trees. [`parse`] reads the infix text format,
//! [`Expr::to_source`] writes it back with explicit parentheses, and
//! [`simplify`] applies the rewrite rules documented in [`simplify`'s
//! module](simplify). Differentiation is exact and always returns a
//! simplified tree.

mod number;
mod parse;
mod print;
pub mod simplify;

use std::collections::BTreeMap;
use std::ops;

use thiserror::Error;

pub use number::Number;
pub use parse::{parse, parse_expr, ParseError};
pub use simplify::simplify;

/// Expression tree node. State indices are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Number),
    Param(String),
    State(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("state variable x{index} is not bound (state has {len} entries)")]
    UnboundState { index: usize, len: usize },
}

/// Named parameter values, e.g. `B`, `G`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Params {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        Params(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

/// Parameter values plus a state vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    pub params: Params,
    pub state: Vec<f64>,
}

impl Bindings {
    pub fn new(params: Params, state: Vec<f64>) -> Self {
        Bindings { params, state }
    }
}

impl Expr {
    pub fn int(n: i64) -> Self {
        Expr::Const(Number::int(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Expr::Const(Number::ratio(num, den))
    }

    pub fn real(x: f64) -> Self {
        Expr::Const(Number::Real(x))
    }

    pub fn zero() -> Self {
        Expr::Const(Number::ZERO)
    }

    pub fn one() -> Self {
        Expr::Const(Number::ONE)
    }

    pub fn param(name: &str) -> Self {
        Expr::Param(name.to_string())
    }

    /// State variable `x<index>`, 1-based.
    pub fn state(index: usize) -> Self {
        Expr::State(index)
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn powi(self, exp: u32) -> Self {
        Expr::Pow(Box::new(self), exp)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn as_const(&self) -> Option<Number> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Largest state index referenced, 0 when none.
    pub fn max_state_index(&self) -> usize {
        let mut max = 0;
        self.visit(&mut |e| {
            if let Expr::State(i) = e {
                max = max.max(*i);
            }
        });
        max
    }

    /// Names of all parameters referenced, sorted and deduplicated.
    pub fn parameters(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                names.push(p.clone());
            }
        });
        names.sort();
        names.dedup();
        names
    }

    /// True when `x<index>` occurs anywhere in the tree.
    pub fn depends_on(&self, index: usize) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::State(i) if *i == index));
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Param(_) | Expr::State(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    fn map_children(&self, f: &impl Fn(&Expr) -> Expr) -> Expr {
        let bx = |e: &Expr| Box::new(f(e));
        match self {
            Expr::Const(_) | Expr::Param(_) | Expr::State(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(bx(a)),
            Expr::Pow(a, n) => Expr::Pow(bx(a), *n),
            Expr::Sin(a) => Expr::Sin(bx(a)),
            Expr::Cos(a) => Expr::Cos(bx(a)),
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Div(a, b) => Expr::Div(bx(a), bx(b)),
        }
    }

    /// Replaces every occurrence of parameter `name` by `value`.
    pub fn substitute_param(&self, name: &str, value: &Expr) -> Expr {
        match self {
            Expr::Param(p) if p == name => value.clone(),
            _ => self.map_children(&|e| e.substitute_param(name, value)),
        }
    }

    /// Replaces every bound parameter by its numeric value so the result
    /// can be evaluated from a state vector alone.
    pub fn bind_params(&self, params: &Params) -> Expr {
        match self {
            Expr::Param(p) => match params.get(p) {
                Some(v) => Expr::real(v),
                None => self.clone(),
            },
            _ => self.map_children(&|e| e.bind_params(params)),
        }
    }

    /// Evaluates in IEEE double precision. Division by an exact zero is an
    /// error carrying the offending subexpression.
    pub fn eval(&self, params: &Params, state: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => c.to_f64(),
            Expr::Param(p) => params
                .get(p)
                .ok_or_else(|| EvalError::UnboundParameter(p.clone()))?,
            Expr::State(i) => *state
                .get(i.wrapping_sub(1))
                .ok_or(EvalError::UnboundState { index: *i, len: state.len() })?,
            Expr::Neg(a) => -a.eval(params, state)?,
            Expr::Add(a, b) => a.eval(params, state)? + b.eval(params, state)?,
            Expr::Sub(a, b) => a.eval(params, state)? - b.eval(params, state)?,
            Expr::Mul(a, b) => a.eval(params, state)? * b.eval(params, state)?,
            Expr::Div(a, b) => {
                let num = a.eval(params, state)?;
                let den = b.eval(params, state)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero { subexpr: self.to_string() });
                }
                num / den
            }
            Expr::Pow(a, n) => a.eval(params, state)?.powi(*n as i32),
            Expr::Sin(a) => a.eval(params, state)?.sin(),
            Expr::Cos(a) => a.eval(params, state)?.cos(),
        })
    }

    /// Unsimplified partial derivative with respect to `x<var>`.
    fn derivative_raw(&self, var: usize) -> Expr {
        use Expr::*;
        let d = |e: &Expr| e.derivative_raw(var);
        match self {
            Const(_) | Param(_) => Expr::zero(),
            State(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Neg(a) => -d(a),
            Add(a, b) => d(a) + d(b),
            Sub(a, b) => d(a) - d(b),
            Mul(a, b) => d(a) * (**b).clone() + (**a).clone() * d(b),
            Div(a, b) => {
                (d(a) * (**b).clone() - (**a).clone() * d(b)) / (**b).clone().powi(2)
            }
            Pow(_, 0) => Expr::zero(),
            Pow(a, n) => Expr::int(*n as i64) * (**a).clone().powi(n - 1) * d(a),
            Sin(a) => (**a).clone().cos() * d(a),
            Cos(a) => -(**a).clone().sin() * d(a),
        }
    }

    /// Exact partial derivative with respect to `x<var>`, simplified.
    pub fn derivative(&self, var: usize) -> Expr {
        simplify(&self.derivative_raw(var))
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("expression references x{index} but the field has dimension {dim}")]
    StateOutOfRange { index: usize, dim: usize },
    #[error("vector field has {len} components, expected {dim}")]
    LengthMismatch { len: usize, dim: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// A scalar function of an `n`-dimensional state.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    expr: Expr,
    dim: usize,
}

impl ScalarField {
    pub fn new(expr: Expr, dim: usize) -> Result<Self, FieldError> {
        if dim == 0 {
            return Err(FieldError::ZeroDimension);
        }
        let index = expr.max_state_index();
        if index > dim {
            return Err(FieldError::StateOutOfRange { index, dim });
        }
        Ok(ScalarField { expr, dim })
    }

    pub fn zero(dim: usize) -> Self {
        ScalarField { expr: Expr::zero(), dim }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn into_expr(self) -> Expr {
        self.expr
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        self.expr.eval(&b.params, &b.state)
    }

    pub fn eval_at(&self, params: &Params, state: &[f64]) -> Result<f64, EvalError> {
        self.expr.eval(params, state)
    }

    /// Panics if `var` is outside `1..=dim`.
    pub fn differentiate(&self, var: usize) -> ScalarField {
        assert!((1..=self.dim).contains(&var), "x{var} outside 1..={}", self.dim);
        ScalarField { expr: self.expr.derivative(var), dim: self.dim }
    }

    pub fn gradient(&self) -> Vec<ScalarField> {
        (1..=self.dim).map(|i| self.differentiate(i)).collect()
    }

    pub fn simplify(&self) -> ScalarField {
        ScalarField { expr: simplify(&self.expr), dim: self.dim }
    }

    pub(crate) fn from_parts(expr: Expr, dim: usize) -> Self {
        debug_assert!(expr.max_state_index() <= dim);
        ScalarField { expr, dim }
    }
}

/// An ordered list of `n` component expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Result<Self, FieldError> {
        let dim = components.len();
        if dim == 0 {
            return Err(FieldError::ZeroDimension);
        }
        for c in &components {
            let index = c.max_state_index();
            if index > dim {
                return Err(FieldError::StateOutOfRange { index, dim });
            }
        }
        Ok(VectorField { components })
    }

    pub fn zero(dim: usize) -> Self {
        VectorField { components: vec![Expr::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> ScalarField {
        ScalarField::from_parts(self.components[i].clone(), self.dim())
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn eval_at(&self, params: &Params, state: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(params, state)).collect()
    }

    pub(crate) fn from_parts(components: Vec<Expr>) -> Self {
        VectorField { components }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_params() -> Params {
        Params::new().with("B", 5.0 / 7.0).with("G", 9.81)
    }

    fn p(text: &str) -> Expr {
        parse(text, 4).unwrap().into_expr()
    }

    #[test]
    fn eval_examples() {
        let params = ball_params();
        assert_eq!(p("sin(x3)").eval(&params, &[0.0; 4]).unwrap(), 0.0);
        let a = p("2*B*x1*x4").eval(&params, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((a - 10.0 / 7.0).abs() < 1e-15);
        let f2 = p("B*(x1*x4^2 - G*sin(x3))").eval(&params, &[1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!((f2 - 20.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn eval_division_by_zero_names_subexpression() {
        let err = p("x2 + 1/x1").eval(&Params::new(), &[0.0, 1.0, 0.0, 0.0]).unwrap_err();
        match err {
            EvalError::DivisionByZero { subexpr } => assert_eq!(subexpr, "1/x1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eval_unbound_parameter() {
        let err = p("G*x1").eval(&Params::new(), &[1.0; 4]).unwrap_err();
        assert_eq!(err, EvalError::UnboundParameter("G".into()));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(p("2*B*x1*x4").derivative(4), simplify(&p("2*B*x1")));
        assert_eq!(p("-B*G*sin(x3)").derivative(3), simplify(&p("-B*G*cos(x3)")));
        assert_eq!(p("B*x4^2*x1").derivative(1), simplify(&p("B*x4^2")));
    }

    #[test]
    fn gradient_examples() {
        let grad = |t: &str| -> Vec<Expr> {
            parse(t, 4).unwrap().gradient().into_iter().map(ScalarField::into_expr).collect()
        };
        assert_eq!(grad("x1"), vec![Expr::int(1), Expr::zero(), Expr::zero(), Expr::zero()]);
        assert_eq!(grad("x4"), vec![Expr::zero(), Expr::zero(), Expr::zero(), Expr::int(1)]);
        assert_eq!(
            grad("cos(x3)"),
            vec![Expr::zero(), Expr::zero(), simplify(&p("-sin(x3)")), Expr::zero()]
        );
    }

    #[test]
    fn quotient_rule() {
        let d = p("x1/x2").derivative(2);
        let v = d.eval(&Params::new(), &[3.0, 2.0, 0.0, 0.0]).unwrap();
        assert!((v + 0.75).abs() < 1e-15);
    }

    #[test]
    fn field_dimension_checked() {
        assert_eq!(
            ScalarField::new(Expr::state(5), 4),
            Err(FieldError::StateOutOfRange { index: 5, dim: 4 })
        );
        assert!(VectorField::new(vec![Expr::state(3), Expr::zero()]).is_err());
    }

    #[test]
    fn bind_params_then_eval_matches() {
        let params = ball_params();
        let e = p("B*(x1*x4^2 - G*sin(x3))");
        let x = [0.3, -0.2, 0.4, 1.1];
        assert_eq!(e.bind_params(&params).eval(&Params::new(), &x), e.eval(&params, &x));
    }
}
