//! Mode-independent systems.

use nalgebra::DMatrix;

use super::SwitchSystem;
use crate::error::{Error, Result};

const MATCH_TOL: f64 = 1e-12;

/// A jump mark with intensity `weight` and jump matrix `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mark {
    pub weight: f64,
    pub c: DMatrix<f64>,
}

/// System whose coefficients and jump measure do not depend on the mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSystem {
    pub n: usize,
    pub d: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub marks: Vec<Mark>,
}

impl ConstantSystem {
    pub fn total_mass(&self) -> f64 {
        self.marks.iter().map(|m| m.weight).sum()
    }
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= MATCH_TOL * (1.0 + a.amax().max(b.amax()))
}

/// Jump measure of one mode with weights merged over equal jump matrices,
/// sorted so two modes can be compared entrywise.
fn aggregated_marks(system: &SwitchSystem, g: usize) -> Vec<Mark> {
    let mut marks: Vec<Mark> = Vec::new();
    for (t, w) in system.support(g) {
        let c = system.jump_matrix(g, t);
        match marks.iter_mut().find(|m| close(&m.c, &c)) {
            Some(m) => m.weight += w,
            None => marks.push(Mark { weight: w, c }),
        }
    }
    marks.sort_by(|x, y| {
        x.c.iter()
            .zip(y.c.iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    marks
}

fn same_measure(x: &[Mark], y: &[Mark]) -> bool {
    x.len() == y.len()
        && x.iter()
            .zip(y)
            .all(|(p, q)| (p.weight - q.weight).abs() <= MATCH_TOL * (1.0 + p.weight.abs()) && close(&p.c, &q.c))
}

/// Views the system as a constant one, or reports the first pair of modes
/// that disagree.
///
/// Besides exact mode independence of `λ(γ)Q(γ,·)`, this accepts systems
/// whose per-mode jump measures coincide once marks carrying the same jump
/// matrix are merged: the mode label is then invisible to the state.
pub fn as_constant(system: &SwitchSystem) -> Result<ConstantSystem> {
    let first = system.modes.first().ok_or(Error::NoModes)?;
    let base_marks = aggregated_marks(system, 0);
    let base_beta = system.beta_rate(0);
    for (g, mode) in system.modes.iter().enumerate().skip(1) {
        let refuse = |field| Error::NotConstant {
            first: first.id.clone(),
            second: mode.id.clone(),
            field,
        };
        if !close(&first.a, &mode.a) {
            return Err(refuse("A"));
        }
        if !close(&first.b0, &mode.b0) {
            return Err(refuse("B0"));
        }
        if (system.beta_rate(g) - base_beta).abs() > MATCH_TOL {
            return Err(refuse("beta"));
        }
        if !same_measure(&base_marks, &aggregated_marks(system, g)) {
            return Err(refuse("jump-measure"));
        }
    }
    Ok(ConstantSystem {
        n: system.n,
        d: system.d,
        a: first.a.clone(),
        b: first.b0.clone(),
        marks: base_marks,
    })
}
