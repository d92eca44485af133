use std::cmp::Ordering;
use std::fmt;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};

/// Numeric literal carried by [`Expr::Const`](super::Expr::Const).
///
/// Arithmetic stays exact while both operands are rational and nothing
/// overflows; otherwise it degrades to `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Number {
    Rational(Rational64),
    Real(f64),
}

impl Number {
    pub const ZERO: Number = Number::Rational(Rational64::new_raw(0, 1));
    pub const ONE: Number = Number::Rational(Rational64::new_raw(1, 1));

    pub fn int(n: i64) -> Self {
        Number::Rational(Rational64::from_integer(n))
    }

    /// Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Number::Rational(Rational64::new(num, den))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(q) => q.to_f64().unwrap_or(f64::NAN),
            Number::Real(x) => x,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(q) => q.is_zero(),
            Number::Real(x) => x == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(q) => q == Rational64::from_integer(1),
            Number::Real(x) => x == 1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Number::Rational(q) => q.is_negative(),
            Number::Real(x) => x.is_sign_negative() && x != 0.0,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Number::Rational(q) => Number::Rational(-q),
            Number::Real(x) => Number::Real(-x),
        }
    }

    pub fn abs(self) -> Self {
        if self.is_negative() {
            self.neg()
        } else {
            self
        }
    }

    fn lift(
        self,
        other: Self,
        exact: impl Fn(&Rational64, &Rational64) -> Option<Rational64>,
        float: impl Fn(f64, f64) -> f64,
    ) -> Option<Self> {
        if let (Number::Rational(a), Number::Rational(b)) = (self, other) {
            if let Some(q) = exact(&a, &b) {
                return Some(Number::Rational(q));
            }
        }
        let v = float(self.to_f64(), other.to_f64());
        v.is_finite().then_some(Number::Real(v))
    }

    /// `None` when the result would not be finite.
    pub fn add(self, other: Self) -> Option<Self> {
        self.lift(other, |a, b| a.checked_add(b), |a, b| a + b)
    }

    pub fn sub(self, other: Self) -> Option<Self> {
        self.lift(other, |a, b| a.checked_sub(b), |a, b| a - b)
    }

    pub fn mul(self, other: Self) -> Option<Self> {
        self.lift(other, |a, b| a.checked_mul(b), |a, b| a * b)
    }

    /// `None` on a zero divisor or a non-finite result.
    pub fn div(self, other: Self) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        self.lift(other, |a, b| a.checked_div(b), |a, b| a / b)
    }

    pub fn powi(self, exp: u32) -> Option<Self> {
        let mut acc = Number::ONE;
        for _ in 0..exp {
            acc = acc.mul(self)?;
        }
        Some(acc)
    }

    /// Total order used to canonicalise terms; compares by value.
    pub fn cmp_value(self, other: Self) -> Ordering {
        self.to_f64().total_cmp(&other.to_f64())
    }
}

impl From<i64> for Number {
    fn from(n: i64) -> Self {
        Number::int(n)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Real(x)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(q) if *q.denom() == 1 => write!(f, "{}", q.numer()),
            Number::Rational(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Number::Real(x) => write!(f, "{x}"),
        }
    }
}
