//! Monte Carlo estimates over independent mode paths.
//!
//! Path `i` always draws from stream `i` of the master seed and per-path
//! values are summed in index order, so results do not depend on how many
//! worker threads ran them.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::FeedbackWitness;
use crate::error::{Error, Result};
use crate::model::SwitchSystem;
use crate::numeric::compensated_sum;
use crate::pdmp::{
    path_rng, sample_mode_path, simulate_dual, simulate_duality_pair, simulate_forward_terminal, DualControl,
    SegmentPlanner,
};
use crate::synth::{commuting_hypothesis, piecewise_null_policy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub dt: f64,
}

impl McEstimate {
    /// Sample mean and standard error of given values.
    pub fn from_samples(values: &[f64], seed: u64, dt: f64) -> Self {
        let n = values.len();
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let constant = values.iter().all(|v| *v == values[0]);
        let std_error = if constant || n < 2 {
            0.0
        } else {
            let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        };
        Self {
            mean,
            std_error,
            n_samples: n,
            seed,
            dt,
        }
    }

    /// `|mean − target| ≤ k·std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Evaluates `sample(i, rng_i)` for `i < n` in parallel and aggregates in
/// index order.
pub fn estimate<F>(n: usize, seed: u64, dt: f64, sample: F) -> Result<McEstimate>
where
    F: Fn(u64, &mut ChaCha8Rng) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample(i, &mut path_rng(seed, i)))
        .collect();
    Ok(McEstimate::from_samples(&values, seed, dt))
}

/// Terminal states of `n` forward paths started at `(x0, g0)`.
#[allow(clippy::too_many_arguments)]
pub fn terminal_states(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    g0: usize,
    policy: &dyn SegmentPlanner,
    t_end: f64,
    n: usize,
    seed: u64,
    dt: f64,
) -> Vec<DVector<f64>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_mode_path(system, g0, t_end, &mut path_rng(seed, i));
            simulate_forward_terminal(system, x0, policy, &path, dt)
        })
        .collect()
}

/// `E|X_T|²` under `policy`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_terminal_msq(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    g0: usize,
    policy: &dyn SegmentPlanner,
    t_end: f64,
    n: usize,
    seed: u64,
    dt: f64,
) -> Result<McEstimate> {
    estimate_terminal(system, x0, g0, policy, t_end, n, seed, dt, |x| x.norm_squared())
}

/// `E[φ(X_T)]` for a scalar functional `φ`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_terminal<P>(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    g0: usize,
    policy: &dyn SegmentPlanner,
    t_end: f64,
    n: usize,
    seed: u64,
    dt: f64,
    phi: P,
) -> Result<McEstimate>
where
    P: Fn(&DVector<f64>) -> f64 + Sync,
{
    estimate(n, seed, dt, |_, rng| {
        let path = sample_mode_path(system, g0, t_end, rng);
        phi(&simulate_forward_terminal(system, x0, policy, &path, dt))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NullBoundRow {
    pub n_restarts: usize,
    pub estimate: McEstimate,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NullBoundReport {
    pub rows: Vec<NullBoundRow>,
    /// Estimates nonincreasing in `N` up to three combined standard errors.
    pub monotone: bool,
    /// The bound is only claimed when the commuting hypothesis holds.
    pub commuting: bool,
    pub pass: bool,
}

/// `e^{2a₀T}|x₀|²(1 − e^{−c₀T/N})`.
pub fn null_bound(system: &SwitchSystem, x0: &DVector<f64>, t_end: f64, restarts: usize) -> f64 {
    (2.0 * system.a0() * t_end).exp() * x0.norm_squared() * (1.0 - (-system.c0() * t_end / restarts as f64).exp())
}

/// Compares `E|X_T|²` under the `N`-restart policy with its bound for each `N`.
#[allow(clippy::too_many_arguments)]
pub fn null_bound_check(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    g0: usize,
    t_end: f64,
    restarts: &[usize],
    n: usize,
    seed: u64,
    dt: f64,
    rank_tol: f64,
) -> Result<NullBoundReport> {
    let commuting = commuting_hypothesis(system, 1e-12);
    let mut rows = Vec::with_capacity(restarts.len());
    for &r in restarts {
        let policy = piecewise_null_policy(system, r, t_end, rank_tol)?;
        let estimate = estimate_terminal_msq(system, x0, g0, &policy, t_end, n, seed, dt)?;
        let bound = null_bound(system, x0, t_end, r);
        rows.push(NullBoundRow {
            n_restarts: r,
            pass: estimate.mean <= bound + 3.0 * estimate.std_error,
            estimate,
            bound,
        });
    }
    let monotone = rows.windows(2).all(|w| {
        let (a, b) = (&w[0].estimate, &w[1].estimate);
        b.mean <= a.mean + 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
    });
    let pass = monotone && (!commuting || rows.iter().all(|r| r.pass));
    Ok(NullBoundReport {
        rows,
        monotone,
        commuting,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityCheck {
    /// Estimate of `E[⟨X_T,Y_T⟩ − ∫⟨B_t u_t, Y_t⟩dt]`.
    pub defect: McEstimate,
    /// `⟨x₀, y₀⟩`.
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `E⟨X_T,Y_T⟩ = ⟨x₀,y₀⟩ + E∫⟨B_t u_t, Y_t⟩dt` within `3σ + 5·dt`.
#[allow(clippy::too_many_arguments)]
pub fn duality_check(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    g0: usize,
    policy: &dyn SegmentPlanner,
    v: &DualControl,
    t_end: f64,
    n: usize,
    seed: u64,
    dt: f64,
) -> Result<DualityCheck> {
    let defect = estimate(n, seed, dt, |_, rng| {
        let path = sample_mode_path(system, g0, t_end, rng);
        simulate_duality_pair(system, x0, y0, policy, v, &path, dt).defect()
    })?;
    let expected = x0.dot(y0);
    let tolerance = 3.0 * defect.std_error + 5.0 * dt;
    Ok(DualityCheck {
        pass: (defect.mean - expected).abs() <= tolerance,
        defect,
        expected,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessDualReport {
    pub paths: usize,
    /// `max |B⁰(γ₀)* Y_t|` over all paths and grid points.
    pub max_control_image: f64,
    /// Largest distance of `Y_t` from the witness subspace.
    pub max_distance: f64,
}

/// Runs the dual under the feedback witness from `y0 ∈ V_∞` and measures how
/// far it leaves `Ker B*` and `V_∞`.
pub fn witness_dual_check(
    system: &SwitchSystem,
    witness: &FeedbackWitness,
    y0: &DVector<f64>,
    t_end: f64,
    n: usize,
    seed: u64,
    dt: f64,
) -> WitnessDualReport {
    let control = DualControl::Feedback(witness.maps.clone());
    let bstar = system.modes[witness.mode].b0.transpose();
    let per_path: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_mode_path(system, witness.mode, t_end, &mut path_rng(seed, i));
            let traj = simulate_dual(system, y0, &control, &path, dt);
            traj.states.iter().fold((0.0f64, 0.0f64), |(b, d), y| {
                let scale = y.norm().max(1.0);
                (
                    b.max((&bstar * y).norm() / scale),
                    d.max(witness.subspace.distance(y) / scale),
                )
            })
        })
        .collect();
    let (max_control_image, max_distance) = per_path
        .iter()
        .fold((0.0f64, 0.0f64), |(b, d), (pb, pd)| (b.max(*pb), d.max(*pd)));
    WitnessDualReport {
        paths: n,
        max_control_image,
        max_distance,
    }
}
