//! Lie calculus on SISO control-affine systems `ẋ = f(x) + g(x)u, y = h(x)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{simplify, EvalError, Expr, Params, ScalarField, VectorField};

/// Default threshold on `|L_g L_f^(γ-1) h|` when deciding relative degree.
pub const DEFAULT_RELATIVE_DEGREE_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for numeric rank.
pub const RANK_RTOL: f64 = 1e-9;
const NEIGHBOURHOOD_RADIUS: f64 = 1e-3;
const NEIGHBOURHOOD_SAMPLES: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("derivative order {order} outside 1..={dim}")]
    OrderOutOfRange { order: usize, dim: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlAffineSystem {
    f: VectorField,
    g: VectorField,
    h: ScalarField,
}

impl ControlAffineSystem {
    pub fn new(f: VectorField, g: VectorField, h: ScalarField) -> Result<Self, GeometryError> {
        if f.dim() != g.dim() {
            return Err(GeometryError::DimensionMismatch(f.dim(), g.dim()));
        }
        if f.dim() != h.dim() {
            return Err(GeometryError::DimensionMismatch(f.dim(), h.dim()));
        }
        Ok(ControlAffineSystem { f, g, h })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn drift(&self) -> &VectorField {
        &self.f
    }

    pub fn input(&self) -> &VectorField {
        &self.g
    }

    pub fn output(&self) -> &ScalarField {
        &self.h
    }

    /// Same system with output `h` replaced.
    pub fn with_output(&self, h: ScalarField) -> Result<Self, GeometryError> {
        Self::new(self.f.clone(), self.g.clone(), h)
    }
}

/// `L_v φ = Σ ∂φ/∂x_i · v_i`, simplified.
///
/// Panics if the dimensions differ.
pub fn lie_derivative(phi: &ScalarField, v: &VectorField) -> ScalarField {
    assert_eq!(phi.dim(), v.dim(), "lie_derivative: dimension mismatch");
    let raw = v
        .components()
        .iter()
        .enumerate()
        .map(|(i, vi)| phi.expr().derivative(i + 1) * vi.clone())
        .reduce(|acc, t| acc + t)
        .unwrap_or_else(Expr::zero);
    ScalarField::from_parts(simplify(&raw), phi.dim())
}

/// `[f, g] = (∂g/∂x) f − (∂f/∂x) g`, componentwise simplified.
///
/// Panics if the dimensions differ.
pub fn lie_bracket(f: &VectorField, g: &VectorField) -> VectorField {
    assert_eq!(f.dim(), g.dim(), "lie_bracket: dimension mismatch");
    let n = f.dim();
    let components = (0..n)
        .map(|i| {
            let gi = &g.components()[i];
            let fi = &f.components()[i];
            let raw = (0..n)
                .map(|j| {
                    gi.derivative(j + 1) * f.components()[j].clone()
                        - fi.derivative(j + 1) * g.components()[j].clone()
                })
                .reduce(|acc, t| acc + t)
                .unwrap_or_else(Expr::zero);
            simplify(&raw)
        })
        .collect();
    VectorField::from_parts(components)
}

/// `ad_f^j g`, with `ad_f^0 g = g`.
pub fn ad_power(f: &VectorField, g: &VectorField, j: usize) -> VectorField {
    (0..j).fold(g.clone(), |acc, _| lie_bracket(f, &acc))
}

/// Output derivatives up to a chosen order.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeChain {
    /// `[h, L_f h, ..., L_f^order h]`.
    pub drift_derivatives: Vec<ScalarField>,
    /// `[L_g h, L_g L_f h, ..., L_g L_f^(order-1) h]`.
    pub input_derivatives: Vec<ScalarField>,
    /// `a = L_g L_f^(order-1) h`.
    pub coefficient: ScalarField,
    /// `b = L_f^order h`.
    pub offset: ScalarField,
    pub order: usize,
}

impl DerivativeChain {
    /// True when every `L_g L_f^j h` with `j < order - 1` simplified to zero.
    pub fn is_uniform(&self) -> bool {
        self.input_derivatives[..self.order - 1].iter().all(ScalarField::is_zero)
    }
}

pub fn derivative_chain(
    sys: &ControlAffineSystem,
    order: usize,
) -> Result<DerivativeChain, GeometryError> {
    let dim = sys.dim();
    if order == 0 || order > dim {
        return Err(GeometryError::OrderOutOfRange { order, dim });
    }
    let mut drift = vec![sys.output().simplify()];
    let mut input = Vec::with_capacity(order);
    for j in 0..order {
        input.push(lie_derivative(&drift[j], sys.input()));
        drift.push(lie_derivative(&drift[j], sys.drift()));
    }
    Ok(DerivativeChain {
        coefficient: input[order - 1].clone(),
        offset: drift[order].clone(),
        drift_derivatives: drift,
        input_derivatives: input,
        order,
    })
}

/// Relative degree at `x0`: the smallest `γ ≤ max_order` with
/// `|L_g L_f^(γ-1) h (x0)| > tol` such that every lower `L_g L_f^j h`
/// vanishes near `x0`.
///
/// A lower derivative vanishes when it simplifies to zero; otherwise it is
/// sampled at 32 points within 1e-3 of `x0` and must stay within `tol`.
/// The sampling fallback is a heuristic. Returns `None` when no order
/// qualifies.
pub fn relative_degree_at(
    sys: &ControlAffineSystem,
    params: &Params,
    x0: &[f64],
    max_order: usize,
    tol: f64,
) -> Result<Option<usize>, GeometryError> {
    let dim = sys.dim();
    if x0.len() != dim {
        return Err(GeometryError::DimensionMismatch(x0.len(), dim));
    }
    let max_order = max_order.min(dim);
    if max_order == 0 {
        return Ok(None);
    }
    let chain = derivative_chain(sys, max_order)?;
    for (j, lg) in chain.input_derivatives.iter().enumerate() {
        if lg.is_zero() {
            continue;
        }
        if lg.eval_at(params, x0)?.abs() > tol {
            return Ok(Some(j + 1));
        }
        if !vanishes_near(lg, params, x0, tol)? {
            return Ok(None);
        }
    }
    Ok(None)
}

fn vanishes_near(
    phi: &ScalarField,
    params: &Params,
    x0: &[f64],
    tol: f64,
) -> Result<bool, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = x0.to_vec();
    for _ in 0..NEIGHBOURHOOD_SAMPLES {
        for (xi, ci) in x.iter_mut().zip(x0) {
            *xi = ci + rng.random_range(-NEIGHBOURHOOD_RADIUS..=NEIGHBOURHOOD_RADIUS);
        }
        if phi.eval_at(params, &x)?.abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Numeric rank of the stacked rows: singular values above
/// `1e-9 × σ_max` are counted.
pub fn numeric_rank(rows: &[Vec<f64>]) -> usize {
    let Some(width) = rows.first().map(Vec::len) else {
        return 0;
    };
    assert!(rows.iter().all(|r| r.len() == width), "numeric_rank: ragged rows");
    if width == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// Rank of stacked differentials at a point. Full rank `k` means the `k`
/// zero-level hypersurfaces intersect transversally there.
pub fn transversality_rank(differentials: &[Vec<f64>]) -> usize {
    numeric_rank(differentials)
}

/// Evaluated gradient (differential) of `phi` at `x`.
pub fn differential_at(
    phi: &ScalarField,
    params: &Params,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    phi.gradient().iter().map(|d| d.eval_at(params, x)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvolutivityWitness {
    /// `[g, ad_f^(n-2) g]` evaluated at the probe point.
    pub bracket: Vec<f64>,
    /// Rank of `{g, ad_f g, ..., ad_f^(n-2) g}` at the point.
    pub rank_without: usize,
    /// Rank after appending the bracket.
    pub rank_with: usize,
}

impl InvolutivityWitness {
    pub fn escalates(&self) -> bool {
        self.rank_with > self.rank_without
    }
}

/// Symbolic `[g, ad_f^(n-2) g]`, the bracket whose escape from
/// `span{g, ..., ad_f^(n-2) g}` witnesses non-involutivity.
pub fn involutivity_bracket(sys: &ControlAffineSystem) -> VectorField {
    let top = ad_power(sys.drift(), sys.input(), sys.dim().saturating_sub(2));
    lie_bracket(sys.input(), &top)
}

/// Evaluates the involutivity witness at `x0`. Requires `n ≥ 2`.
pub fn involutivity_witness(
    sys: &ControlAffineSystem,
    params: &Params,
    x0: &[f64],
) -> Result<InvolutivityWitness, GeometryError> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(GeometryError::DimensionMismatch(x0.len(), n));
    }
    if n < 2 {
        return Err(GeometryError::OrderOutOfRange { order: 2, dim: n });
    }
    let mut rows = Vec::with_capacity(n);
    let mut ad = sys.input().clone();
    for j in 0..=n - 2 {
        if j > 0 {
            ad = lie_bracket(sys.drift(), &ad);
        }
        rows.push(ad.eval_at(params, x0)?);
    }
    let bracket = lie_bracket(sys.input(), &ad).eval_at(params, x0)?;
    let rank_without = numeric_rank(&rows);
    rows.push(bracket.clone());
    let rank_with = numeric_rank(&rows);
    Ok(InvolutivityWitness { bracket, rank_without, rank_with })
}
