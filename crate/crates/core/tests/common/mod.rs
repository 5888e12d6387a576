//! Random systems shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use switchctrl_core::{Mode, SwitchSystem};

/// Entries in `{-1, 0, 1}` with the given probability of zero. Sparse small
/// integers hit degenerate structure far more often than Gaussian draws.
pub fn sparse_int<R: Rng>(rng: &mut R, r: usize, c: usize, p_zero: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| {
        if rng.gen_bool(p_zero) {
            0.0
        } else if rng.gen_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    })
}

pub fn uniform<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn uniform_vec<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// A valid system with `n` states, `d` controls and `e` modes. Transition
/// rows are uniform over the other modes.
pub fn random_system<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    e: usize,
    mut draw: impl FnMut(&mut R, usize, usize) -> DMatrix<f64>,
    with_jumps: bool,
) -> SwitchSystem {
    let rate = if e > 1 { 1.0 } else { 0.0 };
    let modes = (0..e)
        .map(|i| Mode {
            id: format!("m{i}"),
            embedding: vec![0.0],
            rate: rate * rng.gen_range(0.5..2.0),
            a: draw(rng, n, n),
            b0: draw(rng, n, d),
        })
        .collect();
    let mut q = DMatrix::zeros(e, e);
    let mut c = BTreeMap::new();
    if e > 1 {
        for g in 0..e {
            for t in 0..e {
                if g != t {
                    q[(g, t)] = 1.0 / (e - 1) as f64;
                    let jump = if with_jumps {
                        draw(rng, n, n) * 0.5
                    } else {
                        DMatrix::zeros(n, n)
                    };
                    c.insert((g, t), jump);
                }
            }
        }
    }
    SwitchSystem {
        n,
        d,
        m: 1,
        beta: vec![0.0],
        modes,
        q,
        c,
    }
}
