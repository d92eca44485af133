//! Sampled evidence for the controller-count lemma: factorisation of a
//! control coefficient, samplers for the pure parts of a singularity set,
//! validity-domain coverage and necessity witnesses for law subsets.
//!
//! All searches are deterministic. Random sampling uses ChaCha8 streams
//! keyed by a caller seed and the chunk index, so results do not depend on
//! the rayon thread count.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::controllers::{LawDescriptor, LawId};
use crate::expr::{EvalError, Expr, Params, ScalarField};
use crate::geometry::{differential_at, transversality_rank};
use crate::numfmt::g9;

/// A factor counts as vanishing when `|φ| ≤ margin + ZERO_TOL`.
pub const ZERO_TOL: f64 = 1e-9;
/// Pure-part samples keep every other factor at least this far from zero.
pub const PURE_PART_SEPARATION: f64 = 0.1;
/// Accuracy demanded of sampled zero-set points.
pub const ZERO_SET_TOL: f64 = 1e-12;
/// Necessity witnesses need every supplied coefficient below this.
pub const WITNESS_TOL: f64 = 1e-9;

const CHUNK: usize = 4096;
const MAX_STORED_WITNESSES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverageError {
    #[error("factor index {index} out of range for {count} factors")]
    FactorIndex { index: usize, count: usize },
    #[error("found only {found} of {requested} points within {attempts} attempts")]
    Exhausted { found: usize, requested: usize, attempts: usize },
    #[error("point {index} is off the zero set: |{label}| = {value:e}")]
    OffZeroSet { index: usize, label: String, value: f64 },
    #[error("state box bounds are inconsistent")]
    BadBox,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One smooth factor `φ` of a control coefficient. The law is singular on
/// `{φ = 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularityFactor {
    pub field: ScalarField,
    pub label: String,
}

impl SingularityFactor {
    pub fn new(field: ScalarField, label: &str) -> Self {
        SingularityFactor { field, label: label.to_string() }
    }

    pub fn eval(&self, params: &Params, x: &[f64]) -> Result<f64, EvalError> {
        self.field.eval_at(params, x)
    }

    /// `Some(k)` when the factor is the bare coordinate `x_(k+1)`.
    pub fn coordinate(&self) -> Option<usize> {
        match self.field.expr() {
            Expr::State(i) => Some(i - 1),
            _ => None,
        }
    }

    fn depends_on(&self, k: usize) -> bool {
        self.field.expr().depends_on(k + 1)
    }

    /// Coordinates (0-based) appearing inside a `sin` or `cos`.
    fn trig_coordinates(&self) -> Vec<usize> {
        fn walk(e: &Expr, inside: bool, out: &mut Vec<usize>) {
            match e {
                Expr::State(i) if inside && !out.contains(&(i - 1)) => out.push(i - 1),
                Expr::Sin(a) | Expr::Cos(a) => walk(a, true, out),
                Expr::Neg(a) | Expr::Pow(a, _) => walk(a, inside, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a, inside, out);
                    walk(b, inside, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(self.field.expr(), false, &mut out);
        out
    }
}

/// Axis-aligned sampling region.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, CoverageError> {
        let ok = lower.len() == upper.len()
            && !lower.is_empty()
            && lower.iter().zip(&upper).all(|(l, u)| l.is_finite() && u.is_finite() && l < u);
        if ok {
            Ok(StateBox { lower, upper })
        } else {
            Err(CoverageError::BadBox)
        }
    }

    /// `[−half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Self {
        StateBox { lower: vec![-half; dim], upper: vec![half; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| l <= v && v <= u)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| rng.random_range(*l..=*u)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorCheck {
    /// Mean of `a / Π φ_i` over the samples.
    pub constant: f64,
    /// `max |c(x) − constant| / |constant|`.
    pub max_relative_residual: f64,
    pub samples: usize,
}

/// Estimates `c(x) = a(x) / Π φ_i(x)` at `n` points of the box and
/// reports how far it strays from constant. Points where the product is
/// below 1e-12 are resampled.
pub fn factor_check(
    a: &ScalarField,
    factors: &[SingularityFactor],
    params: &Params,
    bx: &StateBox,
    n: usize,
    seed: u64,
) -> Result<FactorCheck, CoverageError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotients = Vec::with_capacity(n);
    let mut attempts = 0;
    while quotients.len() < n {
        attempts += 1;
        if attempts > 100 * n.max(1) {
            return Err(CoverageError::Exhausted { found: quotients.len(), requested: n, attempts });
        }
        let x = bx.sample(&mut rng);
        let mut prod = 1.0;
        for f in factors {
            prod *= f.eval(params, &x)?;
        }
        if prod.abs() < 1e-12 {
            continue;
        }
        quotients.push(a.eval_at(params, &x)? / prod);
    }
    let constant = quotients.iter().sum::<f64>() / n.max(1) as f64;
    let spread = quotients.iter().map(|q| (q - constant).abs()).fold(0.0, f64::max);
    let max_relative_residual =
        if constant == 0.0 { if spread == 0.0 { 0.0 } else { f64::INFINITY } } else { spread / constant.abs() };
    Ok(FactorCheck { constant, max_relative_residual, samples: n })
}

/// Finds `t` in `[lo, hi]` with `φ(p + t d) ≈ 0`, preferring the root
/// nearest `t = 0`.
fn root_on_line(
    phi: &SingularityFactor,
    params: &Params,
    p: &[f64],
    d: &[f64],
    lo: f64,
    hi: f64,
) -> Result<Option<Vec<f64>>, EvalError> {
    const STEPS: usize = 256;
    let at = |t: f64| -> Vec<f64> { p.iter().zip(d).map(|(pi, di)| pi + t * di).collect() };
    let value = |t: f64| phi.eval(params, &at(t));
    let ts: Vec<f64> = (0..=STEPS).map(|k| lo + (hi - lo) * k as f64 / STEPS as f64).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut prev = (ts[0], value(ts[0])?);
    for &t in &ts[1..] {
        let v = value(t)?;
        if prev.1 == 0.0 || prev.1.signum() != v.signum() {
            let dist = prev.0.abs().min(t.abs());
            if best.is_none_or(|b| dist < b.2) {
                best = Some((prev.0, t, dist));
            }
        }
        prev = (t, v);
    }
    let Some((mut a, mut b, _)) = best else {
        return Ok(None);
    };
    let mut fa = value(a)?;
    if fa == 0.0 {
        return Ok(Some(at(a)));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = value(m)?;
        if fm == 0.0 {
            return Ok(Some(at(m)));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let t = if fa.abs() <= value(b)?.abs() { a } else { b };
    Ok(Some(at(t)))
}

/// Parameter range of `p + t d` inside the box.
fn line_range(bx: &StateBox, p: &[f64], d: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..p.len() {
        if d[k] == 0.0 {
            continue;
        }
        let t1 = (bx.lower[k] - p[k]) / d[k];
        let t2 = (bx.upper[k] - p[k]) / d[k];
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    (lo, hi)
}

/// One random point of the box on `⋂ zero`, with every factor in
/// `nonzero` above `separation`. Coordinate factors are pinned, the rest
/// are root-solved along random lines through coordinates not yet used.
fn zero_set_attempt(
    zero: &[&SingularityFactor],
    nonzero: &[&SingularityFactor],
    separation: f64,
    params: &Params,
    bx: &StateBox,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>, EvalError> {
    let n = bx.dim();
    let mut x = bx.sample(rng);
    let mut locked = vec![false; n];
    for f in zero {
        if let Some(k) = f.coordinate() {
            if bx.lower[k] > 0.0 || bx.upper[k] < 0.0 {
                return Ok(None);
            }
            x[k] = 0.0;
            locked[k] = true;
        }
    }
    for f in zero.iter().filter(|f| f.coordinate().is_none()) {
        let free: Vec<usize> = (0..n).filter(|&k| !locked[k] && f.depends_on(k)).collect();
        if free.is_empty() {
            return Ok(None);
        }
        let mut d = vec![0.0; n];
        for &k in &free {
            d[k] = rng.random_range(-1.0..=1.0);
        }
        let (lo, hi) = line_range(bx, &x, &d);
        if lo >= hi {
            return Ok(None);
        }
        match root_on_line(f, params, &x, &d, lo, hi)? {
            Some(y) => x = y,
            None => return Ok(None),
        }
        // Later solves must not move this factor off its zero set.
        for k in 0..n {
            if f.depends_on(k) {
                locked[k] = true;
            }
        }
    }
    for f in zero {
        if f.eval(params, &x)?.abs() >= ZERO_SET_TOL {
            return Ok(None);
        }
    }
    for f in nonzero {
        if f.eval(params, &x)?.abs() <= separation {
            return Ok(None);
        }
    }
    Ok(bx.contains(&x).then_some(x))
}

/// `n` points of the box on the joint zero set of `zero`, each keeping
/// every `nonzero` factor above `separation`. Gives up after `100 n`
/// attempts.
pub fn zero_set_sample(
    zero: &[&SingularityFactor],
    nonzero: &[&SingularityFactor],
    separation: f64,
    params: &Params,
    bx: &StateBox,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CoverageError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let budget = 100 * n.max(1);
    for _ in 0..budget {
        if out.len() == n {
            break;
        }
        if let Some(x) = zero_set_attempt(zero, nonzero, separation, params, bx, &mut rng)? {
            out.push(x);
        }
    }
    if out.len() < n {
        return Err(CoverageError::Exhausted { found: out.len(), requested: n, attempts: budget });
    }
    Ok(out)
}

/// `n` points of the pure part `X_i = S_i \ ⋃_(j≠i) S_j`: `φ_i = 0` and
/// `|φ_j| > 0.1` for every other factor. `i` is 0-based.
pub fn pure_part_sample(
    i: usize,
    factors: &[SingularityFactor],
    params: &Params,
    bx: &StateBox,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CoverageError> {
    if i >= factors.len() {
        return Err(CoverageError::FactorIndex { index: i, count: factors.len() });
    }
    let others: Vec<&SingularityFactor> =
        factors.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f).collect();
    zero_set_sample(&[&factors[i]], &others, PURE_PART_SEPARATION, params, bx, n, seed)
}

/// Probe values per coordinate, simplest first: `0, ±1, ±0.5`, the rest
/// of the 21-point grid on `[−1, 1]`, and for the angle coordinate
/// `±π/4, ±π/2` right after zero.
fn probe_values(k: usize, angle_axis: Option<usize>) -> Vec<f64> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    let mut grid: Vec<f64> = (-10..=10).map(|i| i as f64 / 10.0).collect();
    grid.sort_by(|a, b| {
        let rank = |v: f64| match v.abs() {
            x if x == 0.0 => 0,
            x if x == 1.0 => 1,
            x if x == 0.5 => 2,
            _ => 3,
        };
        (rank(*a), a.abs(), a.is_sign_negative()).partial_cmp(&(rank(*b), b.abs(), b.is_sign_negative())).unwrap()
    });
    if Some(k) == angle_axis {
        let mut v = vec![0.0, FRAC_PI_4, -FRAC_PI_4, FRAC_PI_2, -FRAC_PI_2];
        v.extend(grid.into_iter().filter(|g| *g != 0.0));
        v
    } else {
        grid
    }
}

/// Newton's method on coordinate `k` of `x` for `φ = 0`.
fn newton(phi: &SingularityFactor, params: &Params, x: &mut [f64], k: usize) -> Result<bool, EvalError> {
    let dphi = phi.field.differentiate(k + 1);
    for _ in 0..60 {
        let v = phi.eval(params, x)?;
        if v.abs() < ZERO_SET_TOL {
            return Ok(true);
        }
        let slope = dphi.eval_at(params, x)?;
        if slope == 0.0 || !slope.is_finite() {
            return Ok(false);
        }
        let step = v / slope;
        x[k] -= step;
        if !x[k].is_finite() || x[k].abs() > 1e6 {
            return Ok(false);
        }
    }
    Ok(phi.eval(params, x)?.abs() < ZERO_SET_TOL)
}

/// How each factor of a zero-set combination is enforced.
#[derive(Clone, Copy)]
enum Enforce {
    Pin(usize),
    Solve(usize),
}

/// Assigns each factor a coordinate: coordinate factors pin their own axis,
/// others solve along an unused axis they depend on (angles first).
fn plans(zero: &[&SingularityFactor], dim: usize) -> Vec<Vec<Enforce>> {
    let mut pinned = Vec::new();
    let mut base = Vec::new();
    for f in zero {
        if let Some(k) = f.coordinate() {
            if !pinned.contains(&k) {
                pinned.push(k);
            }
            base.push(Enforce::Pin(k));
        }
    }
    let rest: Vec<&&SingularityFactor> = zero.iter().filter(|f| f.coordinate().is_none()).collect();
    let mut out = Vec::new();
    fn extend(
        rest: &[&&SingularityFactor],
        used: &mut Vec<usize>,
        current: &mut Vec<Enforce>,
        dim: usize,
        out: &mut Vec<Vec<Enforce>>,
    ) {
        let Some((f, tail)) = rest.split_first() else {
            out.push(current.clone());
            return;
        };
        let mut axes = f.trig_coordinates();
        axes.extend((0..dim).filter(|k| f.depends_on(*k)));
        let mut seen = Vec::new();
        for k in axes {
            if seen.contains(&k) || used.contains(&k) {
                continue;
            }
            seen.push(k);
            used.push(k);
            current.push(Enforce::Solve(k));
            extend(tail, used, current, dim, out);
            current.pop();
            used.pop();
        }
    }
    let mut used = pinned.clone();
    let mut current = base;
    extend(&rest, &mut used, &mut current, dim, &mut out);
    out
}

/// Walks the deterministic probe grid on `⋂ zero` in order, calling
/// `visit` on every point found. Stops when `visit` returns `true` and
/// hands back that point.
fn search_zero_set(
    zero: &[&SingularityFactor],
    params: &Params,
    dim: usize,
    angle_axis: Option<usize>,
    levels: usize,
    visit: &mut dyn FnMut(&[f64]) -> Result<bool, EvalError>,
) -> Result<Option<Vec<f64>>, EvalError> {
    let values: Vec<Vec<f64>> =
        (0..dim).map(|k| probe_values(k, angle_axis).into_iter().take(levels).collect()).collect();
    for plan in plans(zero, dim) {
        let fixed: Vec<usize> = plan
            .iter()
            .map(|e| match e {
                Enforce::Pin(k) => *k,
                Enforce::Solve(k) => *k,
            })
            .collect();
        let free: Vec<usize> = (0..dim).filter(|k| !fixed.contains(k)).collect();
        let solves: Vec<(usize, usize)> = plan
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e {
                Enforce::Solve(k) => Some((i, *k)),
                Enforce::Pin(_) => None,
            })
            .collect();
        let rest: Vec<&SingularityFactor> = zero.iter().filter(|f| f.coordinate().is_none()).copied().collect();
        // Odometer over free axes (outer) and solve start values (inner).
        let mut idx = vec![0usize; free.len() + solves.len()];
        let axes: Vec<usize> = free.iter().copied().chain(solves.iter().map(|s| s.1)).collect();
        'grid: loop {
            let mut x = vec![0.0; dim];
            for (slot, &k) in axes.iter().enumerate() {
                x[k] = values[k][idx[slot]];
            }
            let mut ok = true;
            for (j, (_, k)) in solves.iter().enumerate() {
                if !newton(rest[j], params, &mut x, *k)? {
                    ok = false;
                    break;
                }
            }
            if ok && zero.iter().all(|f| f.eval(params, &x).is_ok_and(|v| v.abs() < ZERO_SET_TOL)) && visit(&x)? {
                return Ok(Some(x));
            }
            // Advance: the last axis varies fastest.
            let mut slot = axes.len();
            loop {
                if slot == 0 {
                    break 'grid;
                }
                slot -= 1;
                idx[slot] += 1;
                if idx[slot] < values[axes[slot]].len() {
                    break;
                }
                idx[slot] = 0;
            }
        }
    }
    Ok(None)
}

fn angle_axis_of(factors: &[&SingularityFactor]) -> Option<usize> {
    factors.iter().flat_map(|f| f.trig_coordinates()).next()
}

/// Distinct factors across the laws, in first-appearance order.
fn distinct_factors(laws: &[LawDescriptor]) -> Vec<SingularityFactor> {
    let mut out: Vec<SingularityFactor> = Vec::new();
    for f in laws.iter().flat_map(|l| &l.factors) {
        if !out.iter().any(|o| o.field == f.field) {
            out.push(f.clone());
        }
    }
    out
}

/// State where every supplied law's coefficient vanishes (`|a| < 1e-9`),
/// or `None`. Searches one factor per law at a time, pure parts first
/// (the unchosen factors of the same laws kept above 0.1), then without
/// that restriction. A law with no singular factor cannot be defeated.
pub fn necessity_witness(laws: &[LawDescriptor], params: &Params) -> Result<Option<Vec<f64>>, CoverageError> {
    if laws.is_empty() || laws.iter().any(|l| l.factors.is_empty()) {
        return Ok(None);
    }
    let dim = laws[0].coefficient.dim();
    let all = distinct_factors(laws);
    let combos = factor_combinations(laws);
    for pure in [true, false] {
        for combo in &combos {
            let chosen: Vec<&SingularityFactor> = combo.iter().map(|&(l, f)| &laws[l].factors[f]).collect();
            let mut zero: Vec<&SingularityFactor> = Vec::new();
            for f in &chosen {
                if !zero.iter().any(|z| z.field == f.field) {
                    zero.push(f);
                }
            }
            let others: Vec<&SingularityFactor> =
                all.iter().filter(|f| !zero.iter().any(|z| z.field == f.field)).collect();
            let angle = angle_axis_of(&all.iter().collect::<Vec<_>>());
            let mut visit = |x: &[f64]| -> Result<bool, EvalError> {
                if pure {
                    for f in &others {
                        if f.eval(params, x)?.abs() <= PURE_PART_SEPARATION {
                            return Ok(false);
                        }
                    }
                }
                for law in laws {
                    if law.coefficient.eval_at(params, x)?.abs() >= WITNESS_TOL {
                        return Ok(false);
                    }
                }
                Ok(true)
            };
            if let Some(x) = search_zero_set(&zero, params, dim, angle, usize::MAX, &mut visit)? {
                return Ok(Some(x));
            }
        }
    }
    Ok(None)
}

/// Every way of choosing one factor index per law.
fn factor_combinations(laws: &[LawDescriptor]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for (l, law) in laws.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..law.factors.len()).map(move |f| {
                    let mut c = c.clone();
                    c.push((l, f));
                    c
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncoveredState {
    pub state: Vec<f64>,
    /// Coefficient of each supplied law at the state.
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub samples: usize,
    pub probes: usize,
    pub margin: f64,
    pub laws: Vec<(LawId, String)>,
    /// Fraction of random samples each law covers.
    pub coverage_fractions: Vec<f64>,
    /// Total uncovered states found, including any not stored.
    pub witness_count: usize,
    /// Up to 1000 uncovered states, sorted lexicographically.
    pub witnesses: Vec<UncoveredState>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.witness_count == 0
    }

    /// CSV with header `x1,x2,x3,x4,failed_laws`; failed laws are
    /// separated by `;`.
    pub fn witness_csv(&self) -> String {
        let dim = self.witnesses.first().map_or(4, |w| w.state.len());
        let mut out: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        out.push("failed_laws".into());
        let mut s = out.join(",");
        s.push('\n');
        let failed = self.laws.iter().map(|(id, _)| id.to_string()).collect::<Vec<_>>().join(";");
        for w in &self.witnesses {
            for v in &w.state {
                s.push_str(&g9(*v));
                s.push(',');
            }
            s.push_str(&failed);
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_complete() {
            writeln!(f, "coverage complete, 0 witnesses")?;
        } else {
            writeln!(f, "coverage incomplete, {} witnesses", self.witness_count)?;
        }
        writeln!(f, "samples: {}", self.samples)?;
        writeln!(f, "probes: {}", self.probes)?;
        writeln!(f, "margin: {}", g9(self.margin))?;
        for ((id, label), frac) in self.laws.iter().zip(&self.coverage_fractions) {
            writeln!(f, "law {id} ({label}): covers {} of samples", g9(*frac))?;
        }
        for w in self.witnesses.iter().take(20) {
            let state: Vec<String> = w.state.iter().map(|v| g9(*v)).collect();
            let coeffs: Vec<String> = w.coefficients.iter().map(|v| g9(*v)).collect();
            writeln!(f, "witness ({}) coefficients [{}]", state.join(", "), coeffs.join(", "))?;
        }
        Ok(())
    }
}

fn covers(law: &LawDescriptor, params: &Params, x: &[f64], margin: f64) -> bool {
    law.is_valid_at(params, x, margin + ZERO_TOL)
}

/// Samples `n` uniform states of the box and probes every factor zero set
/// and every pairwise intersection; reports states no law covers.
pub fn coverage_check(
    laws: &[LawDescriptor],
    params: &Params,
    bx: &StateBox,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<CoverageReport, CoverageError> {
    let margin = margin.max(0.0);
    let dim = bx.dim();
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<(Vec<usize>, Vec<Vec<f64>>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut hits = vec![0usize; laws.len()];
            let mut uncovered = Vec::new();
            for _ in 0..count {
                let x = bx.sample(&mut rng);
                let mut any = false;
                for (i, law) in laws.iter().enumerate() {
                    if covers(law, params, &x, margin) {
                        hits[i] += 1;
                        any = true;
                    }
                }
                if !any {
                    uncovered.push(x);
                }
            }
            (hits, uncovered)
        })
        .collect();
    let mut hits = vec![0usize; laws.len()];
    let mut uncovered = Vec::new();
    for (h, u) in partial {
        for (a, b) in hits.iter_mut().zip(h) {
            *a += b;
        }
        uncovered.extend(u);
    }

    let factors = distinct_factors(laws);
    let refs: Vec<&SingularityFactor> = factors.iter().collect();
    let angle = angle_axis_of(&refs);
    let mut sets: Vec<Vec<&SingularityFactor>> = refs.iter().map(|f| vec![*f]).collect();
    for i in 0..refs.len() {
        for j in i + 1..refs.len() {
            sets.push(vec![refs[i], refs[j]]);
        }
    }
    let mut probes = 0;
    for set in &sets {
        let mut visit = |x: &[f64]| -> Result<bool, EvalError> {
            probes += 1;
            if !laws.iter().any(|l| covers(l, params, x, margin)) {
                uncovered.push(x.to_vec());
            }
            Ok(false)
        };
        search_zero_set(set, params, dim, angle, 5, &mut visit)?;
    }

    uncovered.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    uncovered.dedup();
    let witness_count = uncovered.len();
    let witnesses = uncovered
        .into_iter()
        .take(MAX_STORED_WITNESSES)
        .map(|state| {
            let coefficients =
                laws.iter().map(|l| l.coefficient.eval_at(params, &state).unwrap_or(f64::NAN)).collect();
            UncoveredState { state, coefficients }
        })
        .collect();
    Ok(CoverageReport {
        samples: n,
        probes,
        margin,
        laws: laws.iter().map(|l| (l.id, l.label.clone())).collect(),
        coverage_fractions: hits.iter().map(|&h| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect(),
        witness_count,
        witnesses,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransversalityRow {
    pub point: Vec<f64>,
    pub rank: usize,
    /// Number of stacked differentials; rank equal to this is transverse.
    pub stacked: usize,
}

/// Rank of the stacked differentials of both factor lists at each point.
/// Every point must lie on the zero set of every factor.
pub fn transversality_report(
    a: &[SingularityFactor],
    b: &[SingularityFactor],
    params: &Params,
    points: &[Vec<f64>],
) -> Result<Vec<TransversalityRow>, CoverageError> {
    let stacked: Vec<&SingularityFactor> = a.iter().chain(b).collect();
    points
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let mut rows = Vec::with_capacity(stacked.len());
            for f in &stacked {
                let v = f.eval(params, x)?;
                if v.abs() >= ZERO_TOL {
                    return Err(CoverageError::OffZeroSet { index, label: f.label.clone(), value: v });
                }
                rows.push(differential_at(&f.field, params, x)?);
            }
            Ok(TransversalityRow { point: x.clone(), rank: transversality_rank(&rows), stacked: stacked.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballbeam::PlantParams;
    use crate::expr::parse;
    use std::f64::consts::FRAC_PI_2;

    fn factor(t: &str) -> SingularityFactor {
        SingularityFactor::new(parse(t, 4).unwrap(), t)
    }

    fn params() -> Params {
        PlantParams::benchmark().bindings()
    }

    fn unit_box() -> StateBox {
        StateBox::symmetric(4, 1.0)
    }

    #[test]
    fn factor_check_examples() {
        let p = params();
        let fc = factor_check(&parse("2*B*x1*x4", 4).unwrap(), &[factor("x1"), factor("x4")], &p, &unit_box(), 1000, 1)
            .unwrap();
        assert!((fc.constant - 10.0 / 7.0).abs() < 1e-12);
        assert!(fc.max_relative_residual < 1e-12);

        let fc = factor_check(&parse("x1^2", 4).unwrap(), &[factor("x1")], &p, &unit_box(), 1000, 1).unwrap();
        assert!(fc.max_relative_residual > 1.0);

        let fc = factor_check(&parse("-B*G*cos(x3)", 4).unwrap(), &[factor("cos(x3)")], &p, &unit_box(), 1000, 1)
            .unwrap();
        assert!((fc.constant + 7.007142857142857).abs() < 1e-12);
        assert!(fc.max_relative_residual < 1e-12);
    }

    #[test]
    fn pure_parts_are_pure_and_disjoint() {
        let p = params();
        let fs = [factor("x1"), factor("x4")];
        let x1 = pure_part_sample(0, &fs, &p, &unit_box(), 200, 3).unwrap();
        let x2 = pure_part_sample(1, &fs, &p, &unit_box(), 200, 4).unwrap();
        assert!(x1.iter().all(|x| x[0] == 0.0 && x[3].abs() > 0.1));
        assert!(x2.iter().all(|x| x[3] == 0.0 && x[0].abs() > 0.1));
        assert!(x1.iter().all(|a| !x2.contains(a)));
        assert_eq!(pure_part_sample(2, &fs, &p, &unit_box(), 1, 0), Err(CoverageError::FactorIndex { index: 2, count: 2 }));
    }

    #[test]
    fn root_solved_pure_part() {
        let p = params();
        let fs = [factor("cos(x3)"), factor("x1")];
        let bx = StateBox::symmetric(4, 2.0);
        let pts = pure_part_sample(0, &fs, &p, &bx, 50, 9).unwrap();
        for x in pts {
            assert!(x[2].cos().abs() < 1e-12);
            assert!(x[0].abs() > 0.1);
        }
    }

    #[test]
    fn coverage_examples() {
        let p = params();
        let bx = StateBox::symmetric(4, 2.0);
        let full = coverage_check(&LawDescriptor::table(), &p, &bx, 20_000, 0.0, 7).unwrap();
        assert!(full.is_complete(), "{full}");
        assert!(full.probes > 0);

        let only1 = coverage_check(&[LawDescriptor::law1()], &p, &bx, 1000, 0.0, 7).unwrap();
        assert!(!only1.is_complete());
        assert!(only1.witnesses.iter().any(|w| w.state == vec![0.0, 0.0, 0.0, 1.0]));

        let pair = coverage_check(&[LawDescriptor::law1(), LawDescriptor::law2()], &p, &bx, 1000, 0.0, 7).unwrap();
        assert!(pair
            .witnesses
            .iter()
            .any(|w| w.state[0] == 0.0 && w.state[1] == 1.0 && (w.state[2] - FRAC_PI_2).abs() < 1e-12 && w.state[3] == 1.0));
        let csv = pair.witness_csv();
        assert!(csv.starts_with("x1,x2,x3,x4,failed_laws\n"));
        assert!(csv.contains(",1;2\n"));
    }

    #[test]
    fn coverage_is_deterministic() {
        let p = params();
        let bx = StateBox::symmetric(4, 2.0);
        let laws = [LawDescriptor::law1(), LawDescriptor::law2()];
        let a = coverage_check(&laws, &p, &bx, 10_000, 0.5, 11).unwrap();
        let b = coverage_check(&laws, &p, &bx, 10_000, 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.witness_count > 0);
    }

    #[test]
    fn witness_examples() {
        let p = params();
        let w = necessity_witness(&[LawDescriptor::law1()], &p).unwrap().unwrap();
        assert_eq!(w, vec![0.0, 0.0, 0.0, 1.0]);

        let w = necessity_witness(&[LawDescriptor::law1(), LawDescriptor::law2()], &p).unwrap().unwrap();
        assert_eq!(w[0] * w[3], 0.0);
        assert!(w[2].cos().abs() < 1e-9);

        let laws = [LawDescriptor::law1(), LawDescriptor::law3_alternate()];
        let w = necessity_witness(&laws, &p).unwrap().unwrap();
        for l in &laws {
            assert!(l.coefficient.eval_at(&p, &w).unwrap().abs() < WITNESS_TOL);
        }

        assert_eq!(necessity_witness(&LawDescriptor::table(), &p).unwrap(), None);
    }

    #[test]
    fn transversality_examples() {
        let p = params();
        let rows = transversality_report(&[factor("x1"), factor("x4")], &[factor("cos(x3)")], &p, &[vec![0.0, 1.0, FRAC_PI_2, 0.0]])
            .unwrap();
        assert_eq!((rows[0].rank, rows[0].stacked), (3, 3));
        let rows = transversality_report(&[factor("x1")], &[factor("x1")], &p, &[vec![0.0; 4]]).unwrap();
        assert_eq!(rows[0].rank, 1);
        let rows = transversality_report(&[factor("x1")], &[factor("x4")], &p, &[vec![0.0; 4]]).unwrap();
        assert_eq!(rows[0].rank, 2);
        assert!(matches!(
            transversality_report(&[factor("x1")], &[], &p, &[vec![1.0, 0.0, 0.0, 0.0]]),
            Err(CoverageError::OffZeroSet { index: 0, .. })
        ));
    }
}
