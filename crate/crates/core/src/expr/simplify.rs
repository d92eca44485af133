//! Deterministic bottom-up simplifier.
//!
//! Rules, applied to every node after its children:
//!
//! * constant folding of `+ - * /` and `^` over constants (exact while
//!   rational; a fold that would divide by zero or overflow to a non-finite
//!   value is left unfolded);
//! * `0*e -> 0`, `1*e -> e`, `e+0 -> e`, `e-0 -> e`, `0/e -> 0` (for `e` not
//!   the constant zero), `e/1 -> e`, `e/c -> (1/c)*e` for rational `c`;
//! * `e^0 -> 1`, `e^1 -> e`, `-(-e) -> e`, `sin(0) -> 0`, `cos(0) -> 1`;
//! * products are flattened and distributed over sums, numeric factors are
//!   gathered into one leading coefficient, repeated factors merge into a
//!   power, and remaining factors are ordered parameters (by name), state
//!   variables (by index), then everything else (by source text);
//! * terms of a sum with identical factor lists are combined; zero terms
//!   vanish; surviving terms keep first-occurrence order and a negative
//!   coefficient turns `a + (-t)` into `a - t`.
//!
//! There are no trigonometric identities and no factorisation. The result
//! is a fixed point: simplifying it again yields the same tree.

use std::cmp::Ordering;

use super::{Expr, Number};

/// Applies the rule set above. Evaluates identically to the input wherever
/// the input evaluates without error.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) | Expr::Neg(_) => from_terms(terms_of(e)),
        _ => simplify_atom(e),
    }
}

/// A monomial `coeff * Π base^exp`. Bases are never constants, powers or
/// products; a sum only appears as the base of an unexpanded power.
#[derive(Clone, Debug, PartialEq)]
struct Term {
    coeff: Number,
    factors: Vec<(Expr, u32)>,
}

impl Term {
    fn constant(c: Number) -> Self {
        Term { coeff: c, factors: Vec::new() }
    }

    fn times(&self, other: &Term) -> Option<Term> {
        let coeff = self.coeff.mul(other.coeff)?;
        let mut factors = self.factors.clone();
        for (base, exp) in &other.factors {
            match factors.iter_mut().find(|(b, _)| b == base) {
                Some((_, e)) => *e += exp,
                None => factors.push((base.clone(), *exp)),
            }
        }
        factors.sort_by(|a, b| factor_order(&a.0, &b.0));
        Some(Term { coeff, factors })
    }
}

fn factor_key(e: &Expr) -> (u8, usize, String) {
    match e {
        Expr::Param(p) => (0, 0, p.clone()),
        Expr::State(i) => (1, *i, String::new()),
        _ => (2, 0, e.to_source()),
    }
}

fn factor_order(a: &Expr, b: &Expr) -> Ordering {
    factor_key(a).cmp(&factor_key(b))
}

fn negate(terms: Vec<Term>) -> Vec<Term> {
    terms.into_iter().map(|t| Term { coeff: t.coeff.neg(), ..t }).collect()
}

/// Flattens sums, products and negations into a list of monomials.
fn terms_of(e: &Expr) -> Vec<Term> {
    match e {
        Expr::Add(a, b) => {
            let mut t = terms_of(a);
            t.extend(terms_of(b));
            t
        }
        Expr::Sub(a, b) => {
            let mut t = terms_of(a);
            t.extend(negate(terms_of(b)));
            t
        }
        Expr::Neg(a) => negate(terms_of(a)),
        Expr::Mul(a, b) => {
            let lhs = collect(terms_of(a));
            let rhs = collect(terms_of(b));
            let mut out = Vec::with_capacity(lhs.len() * rhs.len());
            for l in &lhs {
                for r in &rhs {
                    match l.times(r) {
                        Some(t) => out.push(t),
                        // Coefficient overflowed to a non-finite value; keep the product opaque.
                        None => return vec![opaque(Expr::Mul(Box::new(from_terms(lhs)), Box::new(from_terms(rhs))))],
                    }
                }
            }
            out
        }
        _ => {
            let s = simplify_atom(e);
            match s {
                Expr::Const(c) => vec![Term::constant(c)],
                Expr::Pow(ref base, n) => {
                    vec![Term { coeff: Number::ONE, factors: vec![((**base).clone(), n)] }]
                }
                Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) | Expr::Neg(_) => terms_of(&s),
                other => vec![opaque(other)],
            }
        }
    }
}

fn opaque(e: Expr) -> Term {
    Term { coeff: Number::ONE, factors: vec![(e, 1)] }
}

/// Combines terms with identical factor lists and drops zero terms.
fn collect(terms: Vec<Term>) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        let t = Term { factors: t.factors.into_iter().filter(|(_, e)| *e != 0).collect(), ..t };
        match out.iter_mut().find(|o| o.factors == t.factors) {
            Some(o) => match o.coeff.add(t.coeff) {
                Some(c) => o.coeff = c,
                None => out.push(t),
            },
            None => out.push(t),
        }
    }
    out.retain(|t| !t.coeff.is_zero());
    out
}

fn term_magnitude(t: &Term) -> Expr {
    let coeff = t.coeff.abs();
    let mut factors = t.factors.iter().map(|(b, e)| if *e == 1 { b.clone() } else { b.clone().powi(*e) });
    let first = if coeff.is_one() {
        match factors.next() {
            Some(f) => f,
            None => return Expr::one(),
        }
    } else {
        Expr::Const(coeff)
    };
    factors.fold(first, |acc, f| acc * f)
}

fn from_terms(terms: Vec<Term>) -> Expr {
    let terms = collect(terms);
    let mut iter = terms.iter();
    let Some(first) = iter.next() else {
        return Expr::zero();
    };
    let mut acc = if first.factors.is_empty() {
        Expr::Const(first.coeff)
    } else if first.coeff.is_negative() {
        -term_magnitude(first)
    } else {
        term_magnitude(first)
    };
    for t in iter {
        acc = if t.coeff.is_negative() { acc - term_magnitude(t) } else { acc + term_magnitude(t) };
    }
    acc
}

/// Simplifies a node that is not a sum, product or negation.
fn simplify_atom(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Param(_) | Expr::State(_) => e.clone(),
        Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) | Expr::Neg(_) => simplify(e),
        Expr::Div(a, b) => {
            let num = simplify(a);
            let den = simplify(b);
            match (num.as_const(), den.as_const()) {
                (_, Some(d)) if d.is_one() => num,
                (Some(n), Some(d)) => match n.div(d) {
                    Some(q) => Expr::Const(q),
                    None => Expr::Div(Box::new(num), Box::new(den)),
                },
                (Some(n), _) if n.is_zero() => Expr::zero(),
                (_, Some(d @ Number::Rational(_))) if !d.is_zero() => match Number::ONE.div(d) {
                    Some(inv) => simplify(&(Expr::Const(inv) * num)),
                    None => Expr::Div(Box::new(num), Box::new(den)),
                },
                _ => Expr::Div(Box::new(num), Box::new(den)),
            }
        }
        Expr::Pow(a, n) => {
            let base = simplify(a);
            match (*n, base.as_const()) {
                (0, _) => Expr::one(),
                (1, _) => base,
                (_, Some(c)) => match c.powi(*n) {
                    Some(v) => Expr::Const(v),
                    None => Expr::Pow(Box::new(base), *n),
                },
                (_, None) => match base {
                    Expr::Pow(inner, m) => match m.checked_mul(*n) {
                        Some(k) => Expr::Pow(inner, k),
                        None => Expr::Pow(Box::new(Expr::Pow(inner, m)), *n),
                    },
                    // Single monomial: distribute the exponent so factors stay mergeable.
                    Expr::Mul(..) | Expr::Neg(_) => {
                        let terms = collect(terms_of(&base));
                        if terms.len() == 1 {
                            let mut acc = Term::constant(Number::ONE);
                            for _ in 0..*n {
                                match acc.times(&terms[0]) {
                                    Some(t) => acc = t,
                                    None => return Expr::Pow(Box::new(base), *n),
                                }
                            }
                            from_terms(vec![acc])
                        } else {
                            Expr::Pow(Box::new(base), *n)
                        }
                    }
                    other => Expr::Pow(Box::new(other), *n),
                },
            }
        }
        Expr::Sin(a) => {
            let arg = simplify(a);
            if arg.is_zero() {
                Expr::zero()
            } else {
                arg.sin()
            }
        }
        Expr::Cos(a) => {
            let arg = simplify(a);
            if arg.is_zero() {
                Expr::one()
            } else {
                arg.cos()
            }
        }
    }
}
