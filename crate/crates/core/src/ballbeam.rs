//! Ball-and-beam plant: Euler–Lagrange dynamics, the preliminary feedback
//! that turns beam torque into beam angular acceleration, and the reduced
//! control-affine model with output `y = r`.

use serde::{Deserialize, Serialize};

use crate::expr::{parse_expr, Expr, Params, ScalarField, VectorField};
use crate::geometry::ControlAffineSystem;

/// Physical parameters. Units: kg, m, kg·m², kg·m², m/s².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Ball mass.
    #[serde(rename = "M")]
    pub m: f64,
    /// Ball radius.
    #[serde(rename = "R")]
    pub r: f64,
    /// Beam moment of inertia about the pivot.
    #[serde(rename = "J")]
    pub j: f64,
    /// Ball moment of inertia about its centre.
    #[serde(rename = "J_b")]
    pub j_b: f64,
    /// Gravitational acceleration.
    #[serde(rename = "G")]
    pub g: f64,
}

impl PlantParams {
    /// M = 0.05 kg, R = 0.01 m, J = 0.02 kg·m², J_b = 2e-6 kg·m², G = 9.81 m/s².
    pub fn benchmark() -> Self {
        PlantParams { m: 0.05, r: 0.01, j: 0.02, j_b: 2e-6, g: 9.81 }
    }

    /// Solid sphere: `J_b = 2/5 M R²`, hence `B = 5/7`.
    pub fn solid_sphere(m: f64, r: f64, j: f64, g: f64) -> Self {
        let p = PlantParams { m, r, j, j_b: 0.4 * m * r * r, g };
        assert!((p.b() - 5.0 / 7.0).abs() < 1e-12, "solid sphere must give B = 5/7");
        p
    }

    /// `B = M / (M + J_b / R²)`.
    pub fn b(&self) -> f64 {
        self.m / (self.m + self.j_b / (self.r * self.r))
    }

    pub fn is_valid(&self) -> bool {
        [self.m, self.r, self.j, self.j_b, self.g].iter().all(|v| v.is_finite() && *v > 0.0)
    }

    /// Parameter bindings for the symbolic model: `B`, `G`, `M`, `R`, `J`, `J_b`.
    pub fn bindings(&self) -> Params {
        Params::new()
            .with("B", self.b())
            .with("G", self.g)
            .with("M", self.m)
            .with("R", self.r)
            .with("J", self.j)
            .with("J_b", self.j_b)
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::benchmark()
    }
}

/// `(r, ṙ, θ, θ̇)` in m, m/s, rad, rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub [f64; 4]);

impl State {
    pub const ZERO: State = State([0.0; 4]);

    pub fn new(r: f64, r_dot: f64, theta: f64, theta_dot: f64) -> Self {
        State([r, r_dot, theta, theta_dot])
    }

    pub fn r(&self) -> f64 {
        self.0[0]
    }

    pub fn r_dot(&self) -> f64 {
        self.0[1]
    }

    pub fn theta(&self) -> f64 {
        self.0[2]
    }

    pub fn theta_dot(&self) -> f64 {
        self.0[3]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 4]> for State {
    fn from(x: [f64; 4]) -> Self {
        State(x)
    }
}

/// `(x2, B(x1 x4² − G sin x3), x4, u)`.
pub fn reduced_dynamics(x: &State, u: f64, p: &PlantParams) -> [f64; 4] {
    let [x1, x2, x3, x4] = x.0;
    [x2, p.b() * (x1 * x4 * x4 - p.g * x3.sin()), x4, u]
}

/// Euler–Lagrange equations solved for `r̈` and `θ̈` under beam torque `tau`.
pub fn full_dynamics(x: &State, tau: f64, p: &PlantParams) -> [f64; 4] {
    let [r, r_dot, theta, theta_dot] = x.0;
    let r_ddot = p.m * (r * theta_dot * theta_dot - p.g * theta.sin()) / (p.m + p.j_b / (p.r * p.r));
    let inertia = p.m * r * r + p.j + p.j_b;
    let theta_ddot =
        (tau - 2.0 * p.m * r * r_dot * theta_dot - p.m * p.g * r * theta.cos()) / inertia;
    [r_dot, r_ddot, theta_dot, theta_ddot]
}

/// Preliminary feedback `τ = 2Mrṙθ̇ + Mgr cos θ + (Mr² + J + J_b)u`, which
/// makes `θ̈ = u`.
pub fn torque_from_u(x: &State, u: f64, p: &PlantParams) -> f64 {
    let [r, r_dot, theta, theta_dot] = x.0;
    2.0 * p.m * r * r_dot * theta_dot
        + p.m * p.g * r * theta.cos()
        + (p.m * r * r + p.j + p.j_b) * u
}

/// Reduced model with symbolic parameters `B` and `G`, output `h = x1`.
pub fn symbolic_system() -> ControlAffineSystem {
    let parse = |t: &str| parse_expr(t, 4).expect("built-in expression");
    let f = VectorField::new(vec![
        parse("x2"),
        parse("B*(x1*x4^2 - G*sin(x3))"),
        parse("x4"),
        Expr::zero(),
    ])
    .expect("4 components");
    let g = VectorField::new(vec![Expr::zero(), Expr::zero(), Expr::zero(), Expr::one()])
        .expect("4 components");
    let h = ScalarField::new(Expr::state(1), 4).expect("x1 in range");
    ControlAffineSystem::new(f, g, h).expect("consistent dimensions")
}

/// As [`symbolic_system`] with `B` replaced by the exact rational 5/7.
pub fn symbolic_system_solid_sphere() -> ControlAffineSystem {
    let sys = symbolic_system();
    let five_sevenths = Expr::ratio(5, 7);
    let subst = |v: &VectorField| {
        VectorField::new(
            v.components().iter().map(|c| c.substitute_param("B", &five_sevenths)).collect(),
        )
        .expect("same dimension")
    };
    ControlAffineSystem::new(subst(sys.drift()), subst(sys.input()), sys.output().clone())
        .expect("consistent dimensions")
}
