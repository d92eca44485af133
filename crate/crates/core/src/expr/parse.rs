//! Recursive-descent parser for the expression text format.
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := power (("*" | "/") power)*
//! power   := unary ("^" INTEGER)*
//! unary   := "-" unary | primary
//! primary := NUMBER | IDENT | ("sin" | "cos") "(" sum ")"
//!          | "(" literal ")" | "(" sum ")"
//! literal := "-" NUMBER | "-"? INTEGER "/" INTEGER
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x1^2` is `(-x1)^2`. A decimal
//! without exponent (`9.81`) is an exact rational; one with an exponent
//! (`9.81e0`) is a double. A parenthesised signed number or integer ratio is
//! read as a single constant, which lets the printer round-trip negative and
//! fractional constants.

use num_rational::Rational64;
use thiserror::Error;

use super::{Expr, Number, ScalarField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("state variable x{index} at byte {pos} is outside x1..x{dim}")]
    StateOutOfRange { pos: usize, index: usize, dim: usize },
    #[error("exponent at byte {pos} must be a non-negative integer literal")]
    BadExponent { pos: usize },
}

/// Parses `text` as a scalar field over `dim` state variables.
pub fn parse(text: &str, dim: usize) -> Result<ScalarField, ParseError> {
    if dim == 0 {
        return Err(ParseError::Syntax { pos: 0, msg: "dimension must be positive".into() });
    }
    let expr = parse_expr(text, dim)?;
    Ok(ScalarField::from_parts(expr, dim))
}

/// Parses `text` into a bare expression; state indices are checked against `dim`.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, dim };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

enum NumLit {
    Integer(i64),
    Exact(Number),
    Real(f64),
}

impl NumLit {
    fn number(self) -> Number {
        match self {
            NumLit::Integer(n) => Number::int(n),
            NumLit::Exact(q) => q,
            NumLit::Real(x) => Number::Real(x),
        }
    }
}

impl<'a> Parser<'a> {
    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.product()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.product()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.power()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.power()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.power()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.unary()?;
        while self.eat(b'^') {
            self.skip_ws();
            let at = self.pos;
            match self.number() {
                Some(NumLit::Integer(n)) if n >= 0 && n <= u32::MAX as i64 => {
                    base = base.powi(n as u32);
                }
                _ => return Err(ParseError::BadExponent { pos: at }),
            }
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(-self.unary()?)
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let save = self.pos;
                if let Some(c) = self.paren_literal() {
                    return Ok(Expr::Const(c));
                }
                self.pos = save;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => match self.number() {
                Some(n) => Ok(Expr::Const(n.number())),
                None => Err(self.error("malformed number")),
            },
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
        }
    }

    /// Tries `literal ")"` after an opening parenthesis. Leaves the cursor
    /// undefined on failure; the caller rewinds.
    fn paren_literal(&mut self) -> Option<Number> {
        let negative = self.eat(b'-');
        self.skip_ws();
        let first = self.number()?;
        let value = if self.eat(b'/') {
            self.skip_ws();
            let (NumLit::Integer(n), Some(NumLit::Integer(d))) = (first, self.number()) else {
                return None;
            };
            if d == 0 {
                return None;
            }
            Number::Rational(Rational64::new(n, d))
        } else if negative {
            first.number()
        } else {
            return None;
        };
        if !self.eat(b')') {
            return None;
        }
        Some(if negative { value.neg() } else { value })
    }

    fn number(&mut self) -> Option<NumLit> {
        let s = self.src;
        let start = self.pos;
        let mut i = start;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        let int_end = i;
        let mut frac_end = i;
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
            frac_end = i;
        }
        if frac_end == start || (frac_end == start + 1 && s[start] == b'.') {
            return None;
        }
        let mut has_exp = false;
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            let digits = j;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits {
                has_exp = true;
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).ok()?;
        self.pos = i;
        if has_exp {
            return text.parse::<f64>().ok().filter(|x| x.is_finite()).map(NumLit::Real);
        }
        let int_part = &s[start..int_end];
        let frac_part = if frac_end > int_end { &s[int_end + 1..frac_end] } else { &[][..] };
        if frac_end == int_end {
            return match text.parse::<i64>() {
                Ok(n) => Some(NumLit::Integer(n)),
                Err(_) => text.parse::<f64>().ok().map(NumLit::Real),
            };
        }
        // Exact decimal: digits / 10^len(frac).
        let digits: String = int_part.iter().chain(frac_part).map(|&b| b as char).collect();
        let exact = digits.parse::<i64>().ok().and_then(|n| {
            10i64.checked_pow(frac_part.len() as u32).map(|d| Rational64::new(n, d))
        });
        Some(match exact {
            Some(q) => NumLit::Exact(Number::Rational(q)),
            None => NumLit::Real(text.parse::<f64>().ok()?),
        })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if name == "sin" || name == "cos" {
            if !self.eat(b'(') {
                return Err(self.error(format!("`{name}` must be followed by `(`")));
            }
            let arg = self.sum()?;
            self.expect(b')')?;
            return Ok(if name == "sin" { arg.sin() } else { arg.cos() });
        }
        if self.peek() == Some(b'(') {
            return Err(ParseError::Syntax { pos: start, msg: format!("unknown function `{name}`") });
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index = digits.parse::<usize>().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(ParseError::StateOutOfRange { pos: start, index, dim: self.dim });
                }
                return Ok(Expr::State(index));
            }
        }
        Ok(Expr::Param(name.to_string()))
    }
}
