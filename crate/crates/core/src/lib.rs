//! Controllability analysis for linear systems with Markov mode switching
//! and state jumps.
//!
//! The [`criteria`] module decides the algebraic invariance conditions; the
//! [`pdmp`], [`synth`], [`riccati`] and [`mc`] modules cross-check the
//! verdicts by simulation.

pub mod criteria;
pub mod error;
pub mod fixtures;
pub mod mc;
pub mod model;
pub mod numeric;
pub mod pdmp;
pub mod riccati;
pub mod subspace;
pub mod synth;

pub use criteria::{CriteriaReport, CriterionVerdict, ModeVerdict, Overall, Verdict};
pub use error::{Error, Result};
pub use mc::McEstimate;
pub use model::{
    as_constant, parse_spec, serialize_spec, validate, ConstantSystem, Mark, Mode, SwitchSystem, Violation,
};
pub use pdmp::{DualControl, ModePath, Trajectory};
pub use riccati::{RiccatiRun, Viability, ViabilityResult};
pub use subspace::{Subspace, SubspaceView, DEFAULT_RANK_TOL};
pub use synth::ControlPolicy;
