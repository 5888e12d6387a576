//! Switch-system data model.
//!
//! A system is a finite list of modes. Each mode carries its own drift `A`,
//! its control matrix `B⁰`, a jump intensity and an embedding vector in ℝᵐ.
//! The post-jump law is the row-stochastic matrix `Q` and every edge
//! `γ → θ` with `Q(γ,θ) > 0` carries a jump matrix `C(γ,θ)` acting on the
//! continuous state as `X ← (I + C)X₋`.

mod constant;
mod io;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::numeric::operator_norm;

pub use constant::{as_constant, ConstantSystem, Mark};
pub use io::{parse_spec, serialize_spec};

/// Jump weights `λ(γ)Q(γ,θ)` at or below this are treated as null marks.
pub const SUPPORT_EPS: f64 = 1e-12;

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub id: String,
    pub embedding: Vec<f64>,
    pub rate: f64,
    pub a: DMatrix<f64>,
    pub b0: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSystem {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub beta: Vec<f64>,
    pub modes: Vec<Mode>,
    pub q: DMatrix<f64>,
    /// Jump matrices keyed by `(from, to)` mode indices.
    pub c: BTreeMap<(usize, usize), DMatrix<f64>>,
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: String,
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(code: &str, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.message)
    }
}

impl SwitchSystem {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_index(&self, id: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.id == id)
    }

    pub fn mode_id(&self, idx: usize) -> &str {
        &self.modes[idx].id
    }

    /// `a₀ = max_γ ‖A(γ)‖₂`.
    pub fn a0(&self) -> f64 {
        self.modes.iter().map(|m| operator_norm(&m.a)).fold(0.0, f64::max)
    }

    /// `c₀ = max_γ λ(γ)`.
    pub fn c0(&self) -> f64 {
        self.modes.iter().map(|m| m.rate).fold(0.0, f64::max)
    }

    /// Jump intensity toward `to`: `λ(from)·Q(from,to)`.
    pub fn jump_weight(&self, from: usize, to: usize) -> f64 {
        self.modes[from].rate * self.q[(from, to)]
    }

    /// Edges out of `from` carrying positive jump mass, with their weights.
    pub fn support(&self, from: usize) -> Vec<(usize, f64)> {
        (0..self.mode_count())
            .filter_map(|to| {
                let w = self.jump_weight(from, to);
                (w > SUPPORT_EPS).then_some((to, w))
            })
            .collect()
    }

    /// Jump matrix on an edge; edges without one act as zero.
    pub fn jump_matrix(&self, from: usize, to: usize) -> DMatrix<f64> {
        self.c
            .get(&(from, to))
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.n, self.n))
    }

    /// Scalar growth rate `β·γ` of the control matrix while in `mode`.
    pub fn beta_rate(&self, mode: usize) -> f64 {
        self.beta
            .iter()
            .zip(&self.modes[mode].embedding)
            .map(|(b, g)| b * g)
            .sum()
    }

    /// True when `B⁰` differs between some pair of modes.
    pub fn b0_varies(&self) -> bool {
        self.modes.windows(2).any(|w| (&w[0].b0 - &w[1].b0).amax() > 0.0)
    }

    /// True when every jump matrix is exactly zero.
    pub fn jumps_are_zero(&self) -> bool {
        self.c.values().all(|c| c.amax() == 0.0)
    }

    pub fn edge_label(&self, from: usize, to: usize) -> String {
        format!("{}->{}", self.modes[from].id, self.modes[to].id)
    }
}

fn shape_check(out: &mut Vec<Violation>, code: &str, path: String, m: &DMatrix<f64>, rows: usize, cols: usize) -> bool {
    if m.shape() != (rows, cols) {
        out.push(Violation::new(
            code,
            path,
            format!("expected {rows}x{cols}, found {}x{}", m.nrows(), m.ncols()),
        ));
        false
    } else {
        true
    }
}

fn finite_check(out: &mut Vec<Violation>, path: String, values: &[f64]) {
    if values.iter().any(|x| !x.is_finite()) {
        out.push(Violation::new("non-finite", path, "entries must be finite"));
    }
}

/// Returns every invariant violation; an empty list means the system is valid.
pub fn validate(system: &SwitchSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let (n, d, m) = (system.n, system.d, system.m);
    let e = system.modes.len();

    if e == 0 {
        out.push(Violation::new("no-modes", "modes", "at least one mode is required"));
    }
    if n == 0 || d == 0 {
        out.push(Violation::new(
            "dim-zero",
            "n/d",
            "state and control dimensions must be positive",
        ));
    }
    if system.beta.len() != m {
        out.push(Violation::new(
            "dim-mismatch:beta",
            "beta",
            format!("expected length {m}, found {}", system.beta.len()),
        ));
    }
    finite_check(&mut out, "beta".into(), &system.beta);

    let mut seen = BTreeMap::new();
    for (i, mode) in system.modes.iter().enumerate() {
        let p = format!("modes[{i}]");
        if mode.id.is_empty() || mode.id.contains("->") {
            out.push(Violation::new(
                "bad-id",
                format!("{p}.id"),
                "ids must be nonempty and must not contain `->`",
            ));
        }
        if let Some(prev) = seen.insert(mode.id.clone(), i) {
            out.push(Violation::new(
                "duplicate-id",
                format!("{p}.id"),
                format!("id `{}` already used by modes[{prev}]", mode.id),
            ));
        }
        if mode.embedding.len() != m {
            out.push(Violation::new(
                "dim-mismatch:embedding",
                format!("{p}.embedding"),
                format!("expected length {m}, found {}", mode.embedding.len()),
            ));
        }
        finite_check(&mut out, format!("{p}.embedding"), &mode.embedding);
        if !mode.rate.is_finite() {
            out.push(Violation::new(
                "non-finite",
                format!("{p}.lambda"),
                "rate must be finite",
            ));
        } else if mode.rate < 0.0 {
            out.push(Violation::new(
                "negative-rate",
                format!("{p}.lambda"),
                format!("rate {} < 0", mode.rate),
            ));
        }
        shape_check(&mut out, "dim-mismatch:A", format!("{p}.A"), &mode.a, n, n);
        finite_check(&mut out, format!("{p}.A"), mode.a.as_slice());
        shape_check(&mut out, "dim-mismatch:B0", format!("{p}.B0"), &mode.b0, n, d);
        finite_check(&mut out, format!("{p}.B0"), mode.b0.as_slice());
    }

    let q_ok = shape_check(&mut out, "dim-mismatch:Q", "Q".into(), &system.q, e, e);
    finite_check(&mut out, "Q".into(), system.q.as_slice());
    if q_ok {
        for g in 0..e {
            let row = system.q.row(g);
            if row.iter().any(|x| *x < 0.0) {
                out.push(Violation::new(
                    "negative-entry",
                    format!("Q[{g}]"),
                    "transition probabilities must be nonnegative",
                ));
            }
            if system.q[(g, g)] != 0.0 {
                out.push(Violation::new(
                    "diagonal-nonzero",
                    format!("Q[{g}][{g}]"),
                    format!("self-transition {} must be 0", system.q[(g, g)]),
                ));
            }
            let s: f64 = row.iter().sum();
            let absorbing = system.modes[g].rate == 0.0 && row.iter().all(|x| *x == 0.0);
            if (s - 1.0).abs() > STOCHASTIC_TOL && !absorbing {
                out.push(Violation::new(
                    "row-not-stochastic",
                    format!("Q[{g}]"),
                    format!("row sums to {s}"),
                ));
            }
        }
        for g in 0..e {
            for t in 0..e {
                if system.q[(g, t)] > 0.0 && !system.c.contains_key(&(g, t)) {
                    out.push(Violation::new(
                        "missing-C",
                        format!("C[{}]", system.edge_label(g, t)),
                        "every edge with Q > 0 needs a jump matrix",
                    ));
                }
            }
        }
    }
    for (&(g, t), c) in &system.c {
        if g >= e || t >= e {
            out.push(Violation::new(
                "unknown-edge",
                format!("C[{g}->{t}]"),
                "edge refers to a missing mode",
            ));
            continue;
        }
        let label = format!("C[{}]", system.edge_label(g, t));
        if q_ok && system.q[(g, t)] <= 0.0 {
            out.push(Violation::new(
                "extraneous-C",
                label.clone(),
                "jump matrix given for an edge with Q = 0",
            ));
        }
        shape_check(&mut out, "dim-mismatch:C", label.clone(), c, n, n);
        finite_check(&mut out, label, c.as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn codes(s: &SwitchSystem) -> Vec<String> {
        validate(s).into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn reference_fixtures_are_valid() {
        for name in fixtures::NAMES {
            let sys = fixtures::by_name(name).unwrap();
            assert!(validate(&sys).is_empty(), "{name}: {:?}", validate(&sys));
        }
        assert!(validate(&fixtures::cont_switch_bound()).is_empty());
    }

    #[test]
    fn row_not_stochastic() {
        let mut s = fixtures::nec1_not_det();
        s.q = nalgebra::dmatrix![0.0, 0.4; 1.0, 0.0];
        assert!(codes(&s).contains(&"row-not-stochastic".to_string()));
    }

    #[test]
    fn diagonal_nonzero() {
        let mut s = fixtures::nec1_not_det();
        s.q = nalgebra::dmatrix![0.1, 0.9; 1.0, 0.0];
        s.c.insert((0, 0), DMatrix::zeros(2, 2));
        assert!(codes(&s).contains(&"diagonal-nonzero".to_string()));
    }

    #[test]
    fn absorbing_mode_may_have_zero_row() {
        let mut s = fixtures::nec1_not_det();
        s.modes[1].rate = 0.0;
        s.q = nalgebra::dmatrix![0.0, 1.0; 0.0, 0.0];
        s.c.remove(&(1, 0));
        assert!(validate(&s).is_empty(), "{:?}", validate(&s));
        // A jumping mode may not.
        s.modes[1].rate = 1.0;
        assert!(codes(&s).contains(&"row-not-stochastic".to_string()));
    }

    #[test]
    fn missing_and_extraneous_jump_matrices() {
        let mut s = fixtures::nec1_not_det();
        s.c.remove(&(0, 1));
        s.c.insert((0, 0), DMatrix::zeros(2, 2));
        let c = codes(&s);
        assert!(c.contains(&"missing-C".to_string()));
        assert!(c.contains(&"extraneous-C".to_string()));
    }

    #[test]
    fn bounds_are_computed() {
        let s = fixtures::cont_switch_bound();
        assert!((s.a0() - 1.0).abs() < 1e-12);
        assert_eq!(s.c0(), 1.0);
    }
}
