//! Built-in example systems.
//!
//! Every example uses two modes labelled `"0"` and `"1"` with unit jump rate
//! and zero β. The first four are the named reference examples; the fifth is
//! the continuous-switching system used for the terminal-bound check.

use std::collections::BTreeMap;

use nalgebra::{dmatrix, DMatrix};

use crate::model::{Mode, SwitchSystem};

pub const NAMES: [&str; 4] = [
    "nec1-not-det",
    "nec1-det-not-nec2",
    "nec2-det-not-nec1",
    "ctrl-not-suf1",
];

pub fn by_name(name: &str) -> Option<SwitchSystem> {
    match name {
        "nec1-not-det" => Some(nec1_not_det()),
        "nec1-det-not-nec2" => Some(nec1_det_not_nec2()),
        "nec2-det-not-nec1" => Some(nec2_det_not_nec1()),
        "ctrl-not-suf1" => Some(ctrl_not_suf1()),
        "cont-switch-bound" => Some(cont_switch_bound()),
        _ => None,
    }
}

fn bimodal(a: [DMatrix<f64>; 2], b0: DMatrix<f64>, c01: DMatrix<f64>, c10: DMatrix<f64>) -> SwitchSystem {
    let (n, d) = b0.shape();
    let modes = a
        .into_iter()
        .enumerate()
        .map(|(i, a)| Mode {
            id: i.to_string(),
            embedding: vec![i as f64],
            rate: 1.0,
            a,
            b0: b0.clone(),
        })
        .collect();
    let mut c = BTreeMap::new();
    c.insert((0, 1), c01);
    c.insert((1, 0), c10);
    SwitchSystem {
        n,
        d,
        m: 1,
        beta: vec![0.0],
        modes,
        q: dmatrix![0.0, 1.0; 1.0, 0.0],
        c,
    }
}

fn e1(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, 1);
    b[(0, 0)] = 1.0;
    b
}

/// `A ≡ 0`, `B⁰ = e₁`, symmetric half-swap jumps. Kalman rank 1 but the
/// first necessary condition holds.
pub fn nec1_not_det() -> SwitchSystem {
    let c = dmatrix![0.0, 0.5; 0.5, 0.0];
    bimodal([DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)], e1(2), c.clone(), c)
}

/// Swap drift with the same jumps: deterministically controllable, but
/// `span(e₂)` is strictly invariant.
pub fn nec1_det_not_nec2() -> SwitchSystem {
    let a = dmatrix![0.0, 1.0; 1.0, 0.0];
    let c = dmatrix![0.0, 0.5; 0.5, 0.0];
    bimodal([a.clone(), a], e1(2), c.clone(), c)
}

/// Two shift drifts in ℝ³ whose jumps move `e₂` and `e₃` into each other.
pub fn nec2_det_not_nec1() -> SwitchSystem {
    let a0 = dmatrix![0.0, 0.0, 0.0; 1.0, 0.0, 0.0; 0.0, 1.0, 0.0];
    let a1 = dmatrix![0.0, 0.0, 0.0; 0.0, 0.0, 1.0; 1.0, 0.0, 0.0];
    let mut c01 = DMatrix::zeros(3, 3);
    c01[(2, 1)] = 1.0;
    let mut c10 = DMatrix::zeros(3, 3);
    c10[(1, 2)] = 1.0;
    bimodal([a0, a1], e1(3), c01, c10)
}

/// Constant shift drift with jumps `diag(1,0,0)`: controllable although the
/// sufficient condition fails.
pub fn ctrl_not_suf1() -> SwitchSystem {
    let a = dmatrix![0.0, 0.0, 0.0; 1.0, 0.0, 0.0; 0.0, 1.0, 0.0];
    let c = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0, 0.0]);
    bimodal([a.clone(), a], e1(3), c.clone(), c)
}

/// Full-rank control, symmetric drifts commuting with `BB* = I`, no jumps on
/// the state.
pub fn cont_switch_bound() -> SwitchSystem {
    bimodal(
        [dmatrix![0.0, 1.0; 1.0, 0.0], dmatrix![1.0, 0.0; 0.0, -1.0]],
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 2),
        DMatrix::zeros(2, 2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_spec, serialize_spec};

    #[test]
    fn shipped_json_matches_builders() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        for name in NAMES.iter().chain(std::iter::once(&"cont-switch-bound")) {
            let path = dir.join(format!("{name}.json"));
            let text = std::fs::read(&path).unwrap();
            let sys = parse_spec(&text).unwrap();
            assert_eq!(sys, by_name(name).unwrap(), "{name}");
            assert_eq!(serialize_spec(&sys).as_bytes(), text.as_slice(), "{name}");
        }
    }
}
