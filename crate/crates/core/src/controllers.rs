//! The three ball-and-beam control laws, their outer tracking loop and the
//! memoryless supervisor that selects among them.
//!
//! | law | order | coefficient `a_i`  | valid where     |
//! |-----|-------|--------------------|-----------------|
//! | 1   | 3     | `2B x1 x4`         | `x1 ≠ 0, x4 ≠ 0`|
//! | 2   | 4     | `−BG cos x3`       | `cos x3 ≠ 0`    |
//! | 3   | 4     | `−BG`              | everywhere      |
//!
//! Every law has the form `u = (−b_i(x) + v) / a_i(x)`. Law 3 is the
//! constant-coefficient law obtained from law 2 at the operating point
//! `x1 = x4 = 0`; [`LawDescriptor::law3_alternate`] is the state-dependent
//! g-modification `a = 2B x2 x4 − BG cos x3`, kept for coverage analysis.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ballbeam::{symbolic_system, PlantParams, State};
use crate::coverage::SingularityFactor;
use crate::expr::{parse_expr, Params, ScalarField};
use crate::geometry::{derivative_chain, lie_derivative};

/// Laws refuse to divide by a coefficient smaller than this.
pub const SINGULAR_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LawId {
    Law1 = 1,
    Law2 = 2,
    Law3 = 3,
}

impl LawId {
    pub const ALL: [LawId; 3] = [LawId::Law1, LawId::Law2, LawId::Law3];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(LawId::Law1),
            2 => Some(LawId::Law2),
            3 => Some(LawId::Law3),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for LawId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("law {law} is singular here: coefficient {coefficient:e}")]
    Singular { law: LawId, coefficient: f64 },
    #[error("pole must be negative, got {0}")]
    NonNegativePole(f64),
    #[error("gain order {gains} does not match law order {law}")]
    OrderMismatch { gains: usize, law: usize },
    #[error("order must be at least 1")]
    ZeroOrder,
}

/// How the outer loop measures tracking-error derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCoordinates {
    /// `(x1, x2, L_f² h)`, exact output derivatives.
    Output,
    /// `ξ = (x1, x2, −BG sin x3, −BG x4 cos x3)`.
    Xi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LawDescriptor {
    pub id: LawId,
    pub label: String,
    pub order: usize,
    pub coefficient: ScalarField,
    pub offset: ScalarField,
    /// The law is valid exactly where every factor is nonzero. Empty means
    /// valid everywhere.
    pub factors: Vec<SingularityFactor>,
    pub error_coordinates: ErrorCoordinates,
}

fn field(text: &str) -> ScalarField {
    ScalarField::new(parse_expr(text, 4).expect("built-in expression"), 4).expect("dim 4")
}

fn factor(text: &str, label: &str) -> SingularityFactor {
    SingularityFactor::new(field(text), label)
}

fn xi4() -> ScalarField {
    field("-B*G*x4*cos(x3)")
}

impl LawDescriptor {
    /// Standard input–output linearisation at relative degree 3.
    pub fn law1() -> Self {
        let chain = derivative_chain(&symbolic_system(), 3).expect("order 3 <= 4");
        LawDescriptor {
            id: LawId::Law1,
            label: "input-output linearisation".into(),
            order: 3,
            coefficient: chain.coefficient,
            offset: chain.offset,
            factors: vec![factor("x1", "x1 (ball at pivot)"), factor("x4", "x4 (beam at rest)")],
            error_coordinates: ErrorCoordinates::Output,
        }
    }

    /// Approximate linearisation with the centrifugal term dropped from `f`.
    pub fn law2() -> Self {
        let sys = symbolic_system();
        LawDescriptor {
            id: LawId::Law2,
            label: "f-modification".into(),
            order: 4,
            coefficient: lie_derivative(&xi4(), sys.input()),
            offset: lie_derivative(&xi4(), sys.drift()),
            factors: vec![factor("cos(x3)", "cos x3 (beam vertical)")],
            error_coordinates: ErrorCoordinates::Xi,
        }
    }

    /// Constant-coefficient law used near `x1 = x4 = 0`; never singular.
    pub fn law3() -> Self {
        LawDescriptor {
            id: LawId::Law3,
            label: "g-modification (constant coefficient)".into(),
            order: 4,
            coefficient: field("-B*G").simplify(),
            offset: ScalarField::zero(4),
            factors: Vec::new(),
            error_coordinates: ErrorCoordinates::Xi,
        }
    }

    /// State-dependent g-modification: differentiates `L_f³ h` once more
    /// with the `a(x)u` term of `y⁽³⁾` removed, giving
    /// `a = 2B x2 x4 − BG cos x3`.
    pub fn law3_alternate() -> Self {
        let sys = symbolic_system();
        let chain = derivative_chain(&sys, 3).expect("order 3 <= 4");
        let coefficient = lie_derivative(&chain.offset, sys.input());
        let offset = lie_derivative(&chain.offset, sys.drift());
        LawDescriptor {
            id: LawId::Law3,
            label: "g-modification (state-dependent)".into(),
            order: 4,
            factors: vec![SingularityFactor::new(coefficient.clone(), "2B x2 x4 - BG cos x3")],
            coefficient,
            offset,
            error_coordinates: ErrorCoordinates::Xi,
        }
    }

    pub fn table() -> Vec<LawDescriptor> {
        vec![Self::law1(), Self::law2(), Self::law3()]
    }

    /// Copy with every parameter replaced by its numeric value.
    pub fn bind_params(&self, params: &Params) -> LawDescriptor {
        let bind = |f: &ScalarField| {
            ScalarField::new(f.expr().bind_params(params), f.dim()).expect("same dim")
        };
        LawDescriptor {
            coefficient: bind(&self.coefficient),
            offset: bind(&self.offset),
            factors: self
                .factors
                .iter()
                .map(|f| SingularityFactor::new(bind(&f.field), &f.label))
                .collect(),
            ..self.clone()
        }
    }

    /// True when every factor exceeds `margin` in magnitude at `x`. A factor
    /// that cannot be evaluated counts as vanishing.
    pub fn is_valid_at(&self, params: &Params, x: &[f64], margin: f64) -> bool {
        self.factors.iter().all(|f| match f.field.eval_at(params, x) {
            Ok(v) => v.abs() > margin,
            Err(_) => false,
        })
    }

    /// Symbolic `u = (−b + v)/a`, evaluated. Used to cross-check the
    /// closed-form laws.
    pub fn control(&self, params: &Params, x: &[f64], v: f64) -> Result<f64, ControlError> {
        let a = self.coefficient.eval_at(params, x).unwrap_or(0.0);
        if a.abs() < SINGULAR_FLOOR {
            return Err(ControlError::Singular { law: self.id, coefficient: a });
        }
        let b = self.offset.eval_at(params, x).unwrap_or(f64::NAN);
        Ok((-b + v) / a)
    }
}

/// `u = (−Bx2x4² + BGx4 cos x3 + v) / (2Bx1x4)`; achieves `y⁽³⁾ = v`.
pub fn law1(x: &State, v: f64, p: &PlantParams) -> Result<f64, ControlError> {
    let [x1, x2, x3, x4] = x.0;
    let b = p.b();
    let a = 2.0 * b * x1 * x4;
    if a.abs() < SINGULAR_FLOOR {
        return Err(ControlError::Singular { law: LawId::Law1, coefficient: a });
    }
    Ok((-b * x2 * x4 * x4 + b * p.g * x4 * x3.cos() + v) / a)
}

/// `u = (BGx4² sin x3 − v) / (BG cos x3)`; achieves `ξ̇4 = v`.
pub fn law2(x: &State, v: f64, p: &PlantParams) -> Result<f64, ControlError> {
    let [_, _, x3, x4] = x.0;
    let bg = p.b() * p.g;
    let a = -bg * x3.cos();
    if a.abs() < SINGULAR_FLOOR {
        return Err(ControlError::Singular { law: LawId::Law2, coefficient: a });
    }
    Ok((bg * x4 * x4 * x3.sin() - v) / (bg * x3.cos()))
}

/// `u = v / (−BG)`.
pub fn law3(_x: &State, v: f64, p: &PlantParams) -> f64 {
    v / (-p.b() * p.g)
}

pub fn apply_law(id: LawId, x: &State, v: f64, p: &PlantParams) -> Result<f64, ControlError> {
    match id {
        LawId::Law1 => law1(x, v, p),
        LawId::Law2 => law2(x, v, p),
        LawId::Law3 => Ok(law3(x, v, p)),
    }
}

/// `a_1(x) = 2B x1 x4`.
pub fn law1_coefficient(x: &State, p: &PlantParams) -> f64 {
    2.0 * p.b() * x.r() * x.theta_dot()
}

/// `(x1, x2, −BG sin x3, −BG x4 cos x3)`.
pub fn xi_coordinates(x: &State, p: &PlantParams) -> [f64; 4] {
    let [x1, x2, x3, x4] = x.0;
    let bg = p.b() * p.g;
    [x1, x2, -bg * x3.sin(), -bg * x4 * x3.cos()]
}

/// `y_d(t) = A cos(2πt/T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingReference {
    pub amplitude: f64,
    pub period: f64,
}

impl TrackingReference {
    pub fn new(amplitude: f64, period: f64) -> Self {
        TrackingReference { amplitude, period }
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// k-th time derivative of `y_d` at `t`.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        let w = self.omega();
        let phase = w * t;
        let scale = self.amplitude * w.powi(k as i32);
        scale
            * match k % 4 {
                0 => phase.cos(),
                1 => -phase.sin(),
                2 => -phase.cos(),
                _ => phase.sin(),
            }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }
}

/// Coefficients of `(s − pole)^order` below the leading term:
/// `alphas[j]` multiplies `s^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSet {
    pub order: usize,
    pub pole: f64,
    pub alphas: Vec<f64>,
}

impl GainSet {
    /// Companion matrix of `s^ℓ + α_{ℓ−1}s^{ℓ−1} + … + α_0`.
    pub fn companion(&self) -> nalgebra::DMatrix<f64> {
        let n = self.order;
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j {
                1.0
            } else if i == n - 1 {
                -self.alphas[j]
            } else {
                0.0
            }
        })
    }
}

/// `α_j = C(ℓ, j)·(−pole)^(ℓ−j)`.
pub fn pole_gains(pole: f64, order: usize) -> Result<GainSet, ControlError> {
    if pole >= 0.0 || pole.is_nan() {
        return Err(ControlError::NonNegativePole(pole));
    }
    if order == 0 {
        return Err(ControlError::ZeroOrder);
    }
    let mut binom = 1.0;
    let mut alphas = Vec::with_capacity(order);
    for j in 0..order {
        alphas.push(binom * (-pole).powi((order - j) as i32));
        binom = binom * (order - j) as f64 / (j + 1) as f64;
    }
    Ok(GainSet { order, pole, alphas })
}

/// Outer-loop input `v = y_d^(ℓ)(t) − Σ α_j e^(j)` for the given law.
pub fn outer_loop_v(
    x: &State,
    reference: &TrackingReference,
    t: f64,
    law: &LawDescriptor,
    gains: &GainSet,
    p: &PlantParams,
) -> Result<f64, ControlError> {
    if gains.order != law.order {
        return Err(ControlError::OrderMismatch { gains: gains.order, law: law.order });
    }
    Ok(outer_loop_v_with(x, reference, t, law.error_coordinates, gains, p))
}

pub(crate) fn outer_loop_v_with(
    x: &State,
    reference: &TrackingReference,
    t: f64,
    coords: ErrorCoordinates,
    gains: &GainSet,
    p: &PlantParams,
) -> f64 {
    let [x1, x2, x3, x4] = x.0;
    let measured = match coords {
        ErrorCoordinates::Output => [x1, x2, p.b() * (x1 * x4 * x4 - p.g * x3.sin()), 0.0],
        ErrorCoordinates::Xi => xi_coordinates(x, p),
    };
    let feedback: f64 = gains
        .alphas
        .iter()
        .enumerate()
        .map(|(j, alpha)| alpha * (measured[j] - reference.derivative(j, t)))
        .sum();
    reference.derivative(gains.order, t) - feedback
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchThresholds {
    pub eps1: f64,
    pub eps4: f64,
}

impl SwitchThresholds {
    pub fn new(eps1: f64, eps4: f64) -> Self {
        SwitchThresholds { eps1, eps4 }
    }

    pub fn is_valid(&self) -> bool {
        self.eps1 > 0.0 && self.eps4 > 0.0 && self.eps1.is_finite() && self.eps4.is_finite()
    }
}

/// σ(x): law 1 when both `|x1| > ε1` and `|x4| > ε4`, law 3 when neither,
/// law 2 otherwise.
pub fn supervisor(x: &State, th: &SwitchThresholds) -> LawId {
    let far1 = x.r().abs() > th.eps1;
    let far4 = x.theta_dot().abs() > th.eps4;
    match (far1, far4) {
        (true, true) => LawId::Law1,
        (false, false) => LawId::Law3,
        _ => LawId::Law2,
    }
}
