use std::fmt;

use super::{Expr, Number};

// Binding strength, loosest first. Unary minus binds tighter than `^`.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;
const UNARY: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) => PRODUCT,
        Expr::Pow(..) => POWER,
        // `-a*b` reads as `-(a*b)` unless `a` is a power: `-a^2` is `(-a)^2`.
        Expr::Neg(a) if matches!(**a, Expr::Mul(..) | Expr::Div(..)) && !leads_with_power(a) => PRODUCT,
        Expr::Neg(_) => UNARY,
        _ => ATOM,
    }
}

fn leads_with_power(e: &Expr) -> bool {
    match e {
        Expr::Mul(a, _) | Expr::Div(a, _) => leads_with_power(a),
        Expr::Pow(..) => true,
        _ => false,
    }
}

fn source_const(c: Number) -> String {
    match c {
        Number::Rational(q) if *q.denom() == 1 && *q.numer() >= 0 => q.numer().to_string(),
        Number::Rational(q) if *q.denom() == 1 => format!("({})", q.numer()),
        Number::Rational(q) => format!("({}/{})", q.numer(), q.denom()),
        Number::Real(x) if x.is_sign_negative() => format!("(-{:e})", -x),
        Number::Real(x) => format!("{x:e}"),
    }
}

impl Expr {
    /// Fully parenthesised text that [`parse`](super::parse) maps back to
    /// a structurally identical tree.
    pub fn to_source(&self) -> String {
        match self {
            Expr::Const(c) => source_const(*c),
            Expr::Param(p) => p.clone(),
            Expr::State(i) => format!("x{i}"),
            Expr::Neg(a) => match **a {
                Expr::Const(_) => format!("(-({}))", a.to_source()),
                _ => format!("(-{})", a.to_source()),
            },
            Expr::Add(a, b) => format!("({}+{})", a.to_source(), b.to_source()),
            Expr::Sub(a, b) => format!("({}-{})", a.to_source(), b.to_source()),
            Expr::Mul(a, b) => format!("({}*{})", a.to_source(), b.to_source()),
            // `(3/4)` would reparse as a single rational literal.
            Expr::Div(a, b) if matches!(**a, Expr::Const(Number::Rational(q)) if *q.denom() == 1 && *q.numer() >= 0) => {
                format!("(({})/{})", a.to_source(), b.to_source())
            }
            Expr::Div(a, b) => format!("({}/{})", a.to_source(), b.to_source()),
            Expr::Pow(a, n) => format!("({}^{n})", a.to_source()),
            Expr::Sin(a) => format!("sin({})", a.to_source()),
            Expr::Cos(a) => format!("cos({})", a.to_source()),
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if precedence(self) < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(c) if c.is_negative() => write!(f, "({c})"),
            Expr::Const(c @ Number::Rational(q)) if *q.denom() != 1 => write!(f, "({c})"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::State(i) => write!(f, "x{i}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_at(f, precedence(self).max(PRODUCT))
            }
            Expr::Add(a, b) => {
                a.fmt_at(f, SUM)?;
                write!(f, " + ")?;
                b.fmt_at(f, PRODUCT)
            }
            Expr::Sub(a, b) => {
                a.fmt_at(f, SUM)?;
                write!(f, " - ")?;
                b.fmt_at(f, PRODUCT)
            }
            Expr::Mul(a, b) => {
                a.fmt_at(f, PRODUCT)?;
                write!(f, "*")?;
                b.fmt_at(f, POWER)
            }
            Expr::Div(a, b) => {
                a.fmt_at(f, PRODUCT)?;
                write!(f, "/")?;
                b.fmt_at(f, POWER)
            }
            Expr::Pow(a, n) => {
                a.fmt_at(f, POWER)?;
                write!(f, "^{n}")
            }
            Expr::Sin(a) => {
                write!(f, "sin(")?;
                a.fmt_at(f, 0)?;
                write!(f, ")")
            }
            Expr::Cos(a) => {
                write!(f, "cos(")?;
                a.fmt_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

/// Human-oriented form with minimal parentheses. Reparses to a tree that
/// evaluates identically; use [`Expr::to_source`] for an exact round trip.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}
