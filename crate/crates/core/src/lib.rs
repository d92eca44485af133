//! Symbolic Lie calculus, singularity analysis and supervised multi-law
//! feedback linearisation for SISO control-affine systems, with the
//! ball-and-beam as the worked plant.

pub mod ballbeam;
pub mod controllers;
pub mod coverage;
pub mod expr;
pub mod geometry;
pub mod numfmt;
pub mod sim;

pub use ballbeam::{PlantParams, State};
pub use controllers::{LawDescriptor, LawId, SwitchThresholds, TrackingReference};
pub use coverage::{CoverageReport, SingularityFactor, StateBox};
pub use expr::{parse, Expr, Params, ScalarField, VectorField};
pub use geometry::ControlAffineSystem;
pub use sim::{Scenario, Trajectory, Metrics};
