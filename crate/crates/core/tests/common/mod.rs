#![allow(dead_code)]

use hybridlin::expr::{Expr, Number, Params};
use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Zero};
use proptest::prelude::*;

pub const DIM: usize = 4;

pub fn ballbeam_params() -> Params {
    Params::new().with("B", 5.0 / 7.0).with("G", 9.81)
}

fn leaf(allow_real: bool) -> BoxedStrategy<Expr> {
    let rational = prop_oneof![
        (-9i64..=9).prop_map(Expr::int),
        ((-9i64..=9), (1i64..=9)).prop_map(|(n, d)| Expr::ratio(n, d)),
    ];
    let symbols = prop_oneof![
        (1usize..=DIM).prop_map(Expr::state),
        prop::sample::select(vec!["B", "G"]).prop_map(Expr::param),
    ];
    if allow_real {
        prop_oneof![rational, symbols, (-50.0f64..50.0).prop_map(Expr::real)].boxed()
    } else {
        prop_oneof![rational, symbols].boxed()
    }
}

/// Random trees of bounded depth. Exponents stay in 0..=3.
pub fn arb_expr(allow_real: bool, allow_trig: bool) -> BoxedStrategy<Expr> {
    leaf(allow_real)
        .prop_recursive(4, 24, 2, move |inner| {
            let mut options: Vec<BoxedStrategy<Expr>> = vec![
                inner.clone().prop_map(|a| -a).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a / b).boxed(),
                (inner.clone(), 0u32..=3).prop_map(|(a, n)| a.powi(n)).boxed(),
            ];
            if allow_trig {
                options.push(inner.clone().prop_map(Expr::sin).boxed());
                options.push(inner.prop_map(Expr::cos).boxed());
            }
            prop::strategy::Union::new(options)
        })
        .boxed()
}

pub fn arb_state(half: f64) -> impl Strategy<Value = [f64; DIM]> {
    prop::array::uniform4(-half..=half)
}

pub fn arb_rational_state() -> impl Strategy<Value = [Rational64; DIM]> {
    prop::array::uniform4(((-20i64..=20), (1i64..=8)).prop_map(|(n, d)| Rational64::new(n, d)))
}

/// Exact evaluation over rationals. `None` on division by zero, overflow,
/// trig or floating constants.
pub fn eval_exact(e: &Expr, x: &[Rational64; DIM]) -> Option<Rational64> {
    Some(match e {
        Expr::Const(Number::Rational(q)) => *q,
        Expr::Const(Number::Real(_)) => return None,
        Expr::Param(p) => match p.as_str() {
            "B" => Rational64::new(5, 7),
            "G" => Rational64::new(981, 100),
            _ => return None,
        },
        Expr::State(i) => x[i - 1],
        Expr::Neg(a) => -eval_exact(a, x)?,
        Expr::Add(a, b) => eval_exact(a, x)?.checked_add(&eval_exact(b, x)?)?,
        Expr::Sub(a, b) => eval_exact(a, x)?.checked_sub(&eval_exact(b, x)?)?,
        Expr::Mul(a, b) => eval_exact(a, x)?.checked_mul(&eval_exact(b, x)?)?,
        Expr::Div(a, b) => {
            let d = eval_exact(b, x)?;
            if d.is_zero() {
                return None;
            }
            eval_exact(a, x)?.checked_div(&d)?
        }
        Expr::Pow(a, n) => {
            let base = eval_exact(a, x)?;
            let mut acc = Rational64::new(1, 1);
            for _ in 0..*n {
                acc = acc.checked_mul(&base)?;
            }
            acc
        }
        Expr::Sin(_) | Expr::Cos(_) => return None,
    })
}

/// Upper bound on the rounding-error scale of evaluating `e`: every
/// subtraction is counted as an addition of magnitudes. `None` when a
/// denominator is within 1e-3 of zero.
pub fn magnitude(e: &Expr, params: &Params, x: &[f64]) -> Option<f64> {
    Some(match e {
        Expr::Const(_) | Expr::Param(_) | Expr::State(_) => e.eval(params, x).ok()?.abs(),
        Expr::Neg(a) => magnitude(a, params, x)?,
        Expr::Add(a, b) | Expr::Sub(a, b) => magnitude(a, params, x)? + magnitude(b, params, x)?,
        Expr::Mul(a, b) => magnitude(a, params, x)? * magnitude(b, params, x)?,
        Expr::Div(a, b) => {
            let den = b.eval(params, x).ok()?;
            if den.abs() < 1e-3 {
                return None;
            }
            let q = (a.eval(params, x).ok()? / den).abs();
            (magnitude(a, params, x)? + q * magnitude(b, params, x)?) / den.abs()
        }
        Expr::Pow(a, n) => {
            let m = magnitude(a, params, x)?;
            let v = a.eval(params, x).ok()?.abs();
            (*n as f64) * m * v.max(m).powi(n.saturating_sub(1) as i32) + if *n == 0 { 1.0 } else { 0.0 }
        }
        Expr::Sin(a) | Expr::Cos(a) => magnitude(a, params, x)?.max(1.0),
    })
}
