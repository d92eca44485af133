//! Fixed-step closed-loop simulation of the reduced ball-and-beam under the
//! supervised three-law controller.
//!
//! Each step evaluates the supervisor and the selected law once, at the
//! start of the step, and holds `u` across a classical RK4 update.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ballbeam::{reduced_dynamics, PlantParams, State};
use crate::controllers::{
    apply_law, law1_coefficient, outer_loop_v_with, pole_gains, supervisor, ControlError, ErrorCoordinates,
    GainSet, LawId, SwitchThresholds, TrackingReference,
};
use crate::numfmt::g9;

pub const CSV_HEADER: &str = "t,x1,x2,x3,x4,u,law,a1,err,abscos3";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("|x3| = {x3} exceeds pi at t = {t}; the model leaves its meaningful regime")]
    RegimeExceeded { t: f64, x3: f64, partial: Box<Trajectory> },
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Outer-loop pole for each law; every pole is placed with full
/// multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Poles {
    pub law1: f64,
    pub law2: f64,
    pub law3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Length of the final window over which the RMS error is taken, s.
    pub tail_window: f64,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions { tail_window: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub plant: PlantParams,
    pub initial_state: State,
    pub reference: TrackingReference,
    pub thresholds: SwitchThresholds,
    pub poles: Poles,
    /// Integration step, s.
    pub step: f64,
    /// Simulated time span, s.
    pub duration: f64,
    #[serde(default)]
    pub output: OutputOptions,
}

impl Scenario {
    /// Benchmark plant tracking `0.4 cos(2πt/3)` for 30 s from rest at the
    /// origin, thresholds (0.05, 0.08), poles −4 / −3 / −3, h = 1 ms.
    pub fn benchmark() -> Self {
        Scenario {
            plant: PlantParams::benchmark(),
            initial_state: State::ZERO,
            reference: TrackingReference::new(0.4, 3.0),
            thresholds: SwitchThresholds::new(0.05, 0.08),
            poles: Poles { law1: -4.0, law2: -3.0, law3: -3.0 },
            step: 1e-3,
            duration: 30.0,
            output: OutputOptions::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if !self.plant.is_valid() {
            return bad("plant parameters must be positive and finite");
        }
        if !self.initial_state.is_finite() {
            return bad("initial_state must be finite");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if !(self.duration.is_finite() && self.duration >= self.step) {
            return bad("duration must be at least one step");
        }
        if !(self.reference.amplitude >= 0.0 && self.reference.amplitude.is_finite()) {
            return bad("reference.amplitude must be non-negative");
        }
        if !(self.reference.period > 0.0 && self.reference.period.is_finite()) {
            return bad("reference.period must be positive");
        }
        if !self.thresholds.is_valid() {
            return bad("thresholds must be positive");
        }
        if !(self.output.tail_window > 0.0) {
            return bad("output.tail_window must be positive");
        }
        for (name, p) in [("law1", self.poles.law1), ("law2", self.poles.law2), ("law3", self.poles.law3)] {
            if !(p < 0.0 && p.is_finite()) {
                return Err(SimError::InvalidScenario(format!("poles.{name} must be negative")));
            }
        }
        Ok(())
    }

    /// `floor(duration / step) + 1`, tolerant of representation error in
    /// the ratio.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.step + 1e-9).floor() as usize + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: State,
    pub u: f64,
    pub law: LawId,
    /// `2B x1 x4`.
    pub a1: f64,
    /// `x1 − y_d(t)`.
    pub err: f64,
    pub abscos3: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(96 * (self.samples.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for p in &self.samples {
            let [x1, x2, x3, x4] = p.x.0;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                g9(p.t),
                g9(x1),
                g9(x2),
                g9(x3),
                g9(x4),
                g9(p.u),
                p.law,
                g9(p.a1),
                g9(p.err),
                g9(p.abscos3)
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub tail_rms_error: f64,
    pub tail_window: f64,
    pub max_abs_x3: f64,
    pub switch_count: usize,
    pub min_abs_a1: f64,
    /// Fraction of samples spent under laws 1, 2, 3.
    pub dwell_fractions: [f64; 3],
    /// Sign changes of `a_1` along the run, ignoring exact zeros.
    pub a1_sign_changes: usize,
    pub min_abs_x1: f64,
    pub min_abs_x4: f64,
    pub min_abs_cos3: f64,
    pub all_finite: bool,
}

impl Metrics {
    pub fn compute(tr: &Trajectory, tail_window: f64) -> Metrics {
        let n = tr.samples.len().max(1) as f64;
        let t_end = tr.samples.last().map_or(0.0, |s| s.t);
        let tail: Vec<f64> =
            tr.samples.iter().filter(|s| s.t >= t_end - tail_window - 1e-12).map(|s| s.err).collect();
        let tail_rms_error = if tail.is_empty() {
            0.0
        } else {
            (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
        };
        let mut dwell_counts = [0usize; 3];
        let mut switch_count = 0;
        let mut sign_changes = 0;
        let mut last_sign = 0.0;
        for (k, s) in tr.samples.iter().enumerate() {
            dwell_counts[s.law.index()] += 1;
            if k > 0 && tr.samples[k - 1].law != s.law {
                switch_count += 1;
            }
            if s.a1 != 0.0 {
                let sign = s.a1.signum();
                if last_sign != 0.0 && sign != last_sign {
                    sign_changes += 1;
                }
                last_sign = sign;
            }
        }
        let min_of = |f: &dyn Fn(&Sample) -> f64| tr.samples.iter().map(f).fold(f64::INFINITY, f64::min);
        Metrics {
            tail_rms_error,
            tail_window,
            max_abs_x3: tr.samples.iter().map(|s| s.x.theta().abs()).fold(0.0, f64::max),
            switch_count,
            min_abs_a1: min_of(&|s| s.a1.abs()),
            dwell_fractions: dwell_counts.map(|c| c as f64 / n),
            a1_sign_changes: sign_changes,
            min_abs_x1: min_of(&|s| s.x.r().abs()),
            min_abs_x4: min_of(&|s| s.x.theta_dot().abs()),
            min_abs_cos3: min_of(&|s| s.abscos3),
            all_finite: tr.samples.iter().all(|s| {
                s.x.is_finite() && [s.t, s.u, s.a1, s.err, s.abscos3].iter().all(|v| v.is_finite())
            }),
        }
    }

    /// Laws that were active for at least one sample.
    pub fn active_laws(&self) -> Vec<LawId> {
        LawId::ALL.into_iter().filter(|l| self.dwell_fractions[l.index()] > 0.0).collect()
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tail_window_s: {}", g9(self.tail_window))?;
        writeln!(f, "tail_rms_error_m: {}", g9(self.tail_rms_error))?;
        writeln!(f, "max_abs_x3_rad: {}", g9(self.max_abs_x3))?;
        writeln!(f, "max_abs_x3_deg: {}", g9(self.max_abs_x3.to_degrees()))?;
        writeln!(f, "switch_count: {}", self.switch_count)?;
        writeln!(f, "min_abs_a1: {}", g9(self.min_abs_a1))?;
        writeln!(f, "a1_sign_changes: {}", self.a1_sign_changes)?;
        for (i, d) in self.dwell_fractions.iter().enumerate() {
            writeln!(f, "dwell_law{}: {}", i + 1, g9(*d))?;
        }
        writeln!(f, "min_abs_x1: {}", g9(self.min_abs_x1))?;
        writeln!(f, "min_abs_x4: {}", g9(self.min_abs_x4))?;
        writeln!(f, "min_abs_cos3: {}", g9(self.min_abs_cos3))?;
        writeln!(f, "all_finite: {}", self.all_finite)
    }
}

/// One classical RK4 step of `ẋ = deriv(t, x)` from time `t`.
pub fn rk4_step<const N: usize>(
    deriv: impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    x: &[f64; N],
    h: f64,
) -> Result<[f64; N], SimError> {
    let offset = |base: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] {
        std::array::from_fn(|i| base[i] + s * k[i])
    };
    let k1 = deriv(t, x);
    let k2 = deriv(t + h / 2.0, &offset(x, &k1, h / 2.0));
    let k3 = deriv(t + h / 2.0, &offset(x, &k2, h / 2.0));
    let k4 = deriv(t + h, &offset(x, &k3, h));
    let next: [f64; N] = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(SimError::NonFinite { t: t + h })
    }
}

/// Integrates `ẋ = deriv(t, x)` over `steps` fixed steps from `t0`.
pub fn integrate<const N: usize>(
    deriv: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    x0: [f64; N],
    h: f64,
    steps: usize,
) -> Result<[f64; N], SimError> {
    let mut x = x0;
    for k in 0..steps {
        x = rk4_step(&deriv, t0 + k as f64 * h, &x, h)?;
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub metrics: Metrics,
}

struct Controller {
    gains: [GainSet; 3],
}

impl Controller {
    fn new(sc: &Scenario) -> Result<Self, ControlError> {
        Ok(Controller {
            gains: [pole_gains(sc.poles.law1, 3)?, pole_gains(sc.poles.law2, 4)?, pole_gains(sc.poles.law3, 4)?],
        })
    }

    fn control(&self, sc: &Scenario, t: f64, x: &State) -> Result<(LawId, f64), ControlError> {
        let law = supervisor(x, &sc.thresholds);
        let coords = if law == LawId::Law1 { ErrorCoordinates::Output } else { ErrorCoordinates::Xi };
        let v = outer_loop_v_with(x, &sc.reference, t, coords, &self.gains[law.index()], &sc.plant);
        Ok((law, apply_law(law, x, v, &sc.plant)?))
    }
}

/// Runs the closed loop and summarises it. Stops with
/// [`SimError::RegimeExceeded`], carrying the samples so far, once
/// `|x3| > π`.
pub fn run(sc: &Scenario) -> Result<RunOutput, SimError> {
    sc.validate()?;
    let ctl = Controller::new(sc)?;
    let n = sc.sample_count();
    let p = sc.plant;
    let mut tr = Trajectory { samples: Vec::with_capacity(n) };
    let mut x = sc.initial_state;
    for k in 0..n {
        let t = k as f64 * sc.step;
        let (law, u) = ctl.control(sc, t, &x)?;
        tr.samples.push(Sample {
            t,
            x,
            u,
            law,
            a1: law1_coefficient(&x, &p),
            err: x.r() - sc.reference.value(t),
            abscos3: x.theta().cos().abs(),
        });
        if x.theta().abs() > std::f64::consts::PI {
            return Err(SimError::RegimeExceeded { t, x3: x.theta(), partial: Box::new(tr) });
        }
        if !u.is_finite() {
            return Err(SimError::NonFinite { t });
        }
        if k + 1 < n {
            x = State(rk4_step(|_, y| reduced_dynamics(&State(*y), u, &p), t, &x.0, sc.step)?);
        }
    }
    let metrics = Metrics::compute(&tr, sc.output.tail_window);
    Ok(RunOutput { trajectory: tr, metrics })
}

/// Independent runs in parallel; results keep the input order.
pub fn sweep(scenarios: &[Scenario]) -> Vec<Result<RunOutput, SimError>> {
    scenarios.par_iter().map(run).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_zero_field_is_identity() {
        let x = [1.0, -2.0, 3.5];
        assert_eq!(rk4_step(|_, _| [0.0; 3], 0.0, &x, 0.1).unwrap(), x);
    }

    #[test]
    fn rk4_exponential_step() {
        let y = rk4_step(|_, y: &[f64; 1]| [y[0]], 0.0, &[1.0], 0.1).unwrap()[0];
        assert!((y - 0.1f64.exp()).abs() < 1e-7);
        assert!((y - 1.105170833333).abs() < 1e-12);
    }

    #[test]
    fn rk4_error_ratio_near_sixteen() {
        let err = |h: f64| (integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], h, (1.0 / h).round() as usize).unwrap()[0] - 1f64.exp()).abs();
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn rk4_reports_non_finite() {
        let r = rk4_step(|_, y: &[f64; 1]| [1.0 / (y[0] - 1.0)], 2.0, &[1.0], 0.1);
        assert_eq!(r, Err(SimError::NonFinite { t: 2.1 }));
    }

    #[test]
    fn sample_count_matches_duration() {
        assert_eq!(Scenario::benchmark().sample_count(), 30001);
        let sc = Scenario { duration: 0.3, step: 0.1, ..Scenario::benchmark() };
        assert_eq!(sc.sample_count(), 4);
    }

    #[test]
    fn zero_reference_at_rest_stays_put() {
        let sc = Scenario {
            reference: TrackingReference::new(0.0, 3.0),
            duration: 2.0,
            ..Scenario::benchmark()
        };
        let out = run(&sc).unwrap();
        assert_eq!(out.trajectory.len(), 2001);
        for s in &out.trajectory.samples {
            assert_eq!(s.x, State::ZERO);
            assert_eq!(s.u, 0.0);
            assert_eq!(s.law, LawId::Law3);
        }
        assert_eq!(out.metrics.dwell_fractions, [0.0, 0.0, 1.0]);
        assert_eq!(out.metrics.switch_count, 0);
    }

    #[test]
    fn runs_are_deterministic_and_sweep_keeps_order() {
        let a = Scenario { duration: 1.0, ..Scenario::benchmark() };
        let b = Scenario { duration: 1.0, initial_state: State::new(0.4, 0.0, 0.0, 0.0), ..Scenario::benchmark() };
        let results = sweep(&[a.clone(), b.clone(), a.clone()]);
        assert_eq!(results.len(), 3);
        assert_eq!(results[0], results[2]);
        assert_eq!(results[0], run(&a));
        assert_eq!(results[1], run(&b));
        assert!(sweep(&[]).is_empty());
    }

    #[test]
    fn metrics_on_handmade_trajectory() {
        let mk = |t: f64, law: LawId, a1: f64, err: f64| Sample {
            t,
            x: State::new(err, 0.0, -0.2, 0.0),
            u: 0.0,
            law,
            a1,
            err,
            abscos3: 0.2f64.cos(),
        };
        let tr = Trajectory {
            samples: vec![
                mk(0.0, LawId::Law1, 1.0, 3.0),
                mk(1.0, LawId::Law1, 0.0, 3.0),
                mk(2.0, LawId::Law2, -1.0, 1.0),
                mk(3.0, LawId::Law3, 2.0, -1.0),
            ],
        };
        let m = Metrics::compute(&tr, 1.0);
        assert_eq!(m.tail_rms_error, 1.0);
        assert_eq!(m.switch_count, 2);
        assert_eq!(m.a1_sign_changes, 2);
        assert_eq!(m.min_abs_a1, 0.0);
        assert_eq!(m.dwell_fractions, [0.5, 0.25, 0.25]);
        assert!((m.max_abs_x3 - 0.2).abs() < 1e-15);
        assert_eq!(m.active_laws(), LawId::ALL.to_vec());
    }

    #[test]
    fn scenario_toml_round_trip_and_rejections() {
        let sc = Scenario::benchmark();
        assert_eq!(Scenario::from_toml_str(&sc.to_toml_string()).unwrap(), sc);

        let text = sc.to_toml_string().replace("duration", "durration");
        match Scenario::from_toml_str(&text) {
            Err(SimError::Parse(m)) => assert!(m.contains("durration"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = sc.to_toml_string().replace("step = 0.001", "step = -0.001");
        assert!(matches!(Scenario::from_toml_str(&text), Err(SimError::InvalidScenario(_))));
    }

    #[test]
    fn csv_layout() {
        let sc = Scenario { duration: 0.002, ..Scenario::benchmark() };
        let csv = run(&sc).unwrap().trajectory.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,0,0,0,"));
        assert_eq!(lines[1].split(',').count(), 10);
    }
}
