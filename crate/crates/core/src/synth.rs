//! Controllability Gramians and minimal-energy steering controls.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::criteria;
use crate::error::{Error, Result};
use crate::model::SwitchSystem;
use crate::numeric::{is_positive, rk4_step_mat, step_count, symmetrize};
use crate::pdmp::{SegmentContext, SegmentControl, SegmentPlanner, Trajectory};

/// `𝓖(t) = ∫₀ᵗ e^{A(t−s)} B B* e^{A*(t−s)} ds`, by RK4 on
/// `Ġ = AG + GA* + BB*`, `G(0) = 0`.
pub fn gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64, dt: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let bb = b * b.transpose();
    let at = a.transpose();
    let mut f = |_t: f64, g: &DMatrix<f64>| a * g + g * &at + &bb;
    let steps = step_count(t, dt);
    let mut g = DMatrix::zeros(n, n);
    if steps == 0 {
        return g;
    }
    let h = t / steps as f64;
    for i in 0..steps {
        g = symmetrize(&rk4_step_mat(&mut f, i as f64 * h, &g, h));
    }
    g
}

/// Step used for Gramians over a horizon `h` when the caller has no opinion.
pub fn gramian_step(h: f64) -> f64 {
    (h / 200.0).min(1e-4)
}

/// Inverse of a symmetric positive-definite matrix with its 2-norm condition
/// number. `None` when the smallest eigenvalue is at or below
/// `rank_tol·λ_max`.
pub fn invert_spd(g: &DMatrix<f64>, rank_tol: f64) -> (Option<DMatrix<f64>>, f64) {
    let eig = symmetrize(g).symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if max <= 0.0 || min <= rank_tol * max {
        return (None, condition);
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let v = &eig.eigenvectors;
    (Some(symmetrize(&(v * inv_diag * v.transpose()))), condition)
}

/// Steering operator `e^{A*h} 𝓖(h)⁻¹ e^{Ah}`, mapping a start state to the
/// initial exosystem value of the minimal-energy control.
fn steering_operator(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    h: f64,
    rank_tol: f64,
    label: &str,
) -> Result<(DMatrix<f64>, f64)> {
    let g = gramian(a, b, h, gramian_step(h));
    let (inv, condition) = invert_spd(&g, rank_tol);
    let inv = inv.ok_or_else(|| Error::SingularGramian {
        mode: label.to_string(),
        condition,
    })?;
    let e = (a * h).exp();
    Ok((e.transpose() * inv * e, condition))
}

/// Control steering `Ẋ = AX + b·e^{r s}·B u` from `y` to `0` in time `h` with
/// least energy:
/// `u(s) = −(1/b)·e^{−r s}·B* e^{A*(h−s)} 𝓖⁻¹(h) e^{Ah} y` on `[0,h]`, `0` after.
#[derive(Debug, Clone)]
pub struct MinEnergyControl {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub horizon: f64,
    pub rate: f64,
    pub b_scale: f64,
    /// `e^{A*h} 𝓖⁻¹ e^{Ah} y`.
    pub z0: DVector<f64>,
    pub condition: f64,
}

impl MinEnergyControl {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        y: &DVector<f64>,
        horizon: f64,
        rate: f64,
        b_scale: f64,
        rank_tol: f64,
        label: &str,
    ) -> Result<Self> {
        let (s, condition) = steering_operator(a, b, horizon, rank_tol, label)?;
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            horizon,
            rate,
            b_scale,
            z0: s * y,
            condition,
        })
    }

    /// Control value at elapsed time `s`.
    pub fn eval(&self, s: f64) -> DVector<f64> {
        if s >= self.horizon {
            return DVector::zeros(self.b.ncols());
        }
        let z = (self.a.transpose() * (-s)).exp() * &self.z0;
        self.b.transpose() * z * (-(-self.rate * s).exp() / self.b_scale)
    }

    /// The same control as a linear exosystem the simulator integrates
    /// alongside the state.
    pub fn segment(&self) -> SegmentControl {
        SegmentControl::Exo {
            z0: self.z0.clone(),
            a_star: self.a.transpose(),
            b_star: self.b.transpose(),
            rate: self.rate,
            b_scale: self.b_scale,
            horizon: self.horizon,
        }
    }
}

/// Minimal-energy control for mode `g` of `system`, with that mode's drift
/// and control matrix and no jumps.
pub fn min_energy_control(
    system: &SwitchSystem,
    g: usize,
    y: &DVector<f64>,
    horizon: f64,
    rank_tol: f64,
) -> Result<MinEnergyControl> {
    let mode = &system.modes[g];
    MinEnergyControl::new(
        &mode.a,
        &mode.b0,
        y,
        horizon,
        system.beta_rate(g),
        1.0,
        rank_tol,
        &mode.id,
    )
}

/// Restarts the minimal-energy control with horizon `T/N` at the start and
/// at each of the first `N − 1` jumps; zero afterwards.
#[derive(Debug, Clone)]
pub struct PiecewiseNull {
    pub restarts: usize,
    pub horizon: f64,
    /// Steering operators keyed by `(initial mode, current mode)`.
    steer: BTreeMap<(usize, usize), DMatrix<f64>>,
    a_star: Vec<DMatrix<f64>>,
    b_star: Vec<DMatrix<f64>>,
    rates: Vec<f64>,
    /// Largest Gramian condition number met.
    pub condition: f64,
}

impl PiecewiseNull {
    fn plan(&self, ctx: &SegmentContext<'_>) -> SegmentControl {
        if ctx.index >= self.restarts {
            return SegmentControl::Zero;
        }
        let s = &self.steer[&(ctx.initial_mode, ctx.mode)];
        SegmentControl::Exo {
            z0: s * ctx.state,
            a_star: self.a_star[ctx.mode].clone(),
            b_star: self.b_star[ctx.initial_mode].clone(),
            rate: self.rates[ctx.mode],
            b_scale: ctx.b_scale,
            horizon: self.horizon,
        }
    }
}

/// Piecewise open-loop controls used by the simulators.
#[derive(Clone)]
pub enum ControlPolicy {
    Zero,
    Constant(DVector<f64>),
    MinEnergy(PiecewiseNull),
    Custom(Arc<dyn SegmentPlanner + Send>),
}

impl std::fmt::Debug for ControlPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(u) => write!(f, "Constant({:?})", u.as_slice()),
            Self::MinEnergy(p) => write!(f, "MinEnergy {{ restarts: {}, horizon: {} }}", p.restarts, p.horizon),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SegmentPlanner for ControlPolicy {
    fn plan(&self, ctx: &SegmentContext<'_>) -> SegmentControl {
        match self {
            Self::Zero => SegmentControl::Zero,
            Self::Constant(u) => SegmentControl::Constant(u.clone()),
            Self::MinEnergy(p) => p.plan(ctx),
            Self::Custom(p) => p.plan(ctx),
        }
    }
}

/// Builds the restart policy. Requires zero jump matrices and a passing
/// continuous-switching criterion.
pub fn piecewise_null_policy(
    system: &SwitchSystem,
    restarts: usize,
    t_end: f64,
    rank_tol: f64,
) -> Result<ControlPolicy> {
    if restarts == 0 || !is_positive(t_end) {
        return Err(Error::InvalidArgument("N must be positive and T > 0".into()));
    }
    let verdict = criteria::crit_cont_switch_check(system, rank_tol)?;
    if let Some(bad) = verdict.per_mode.iter().find(|m| !m.pass) {
        return Err(Error::CriterionFails(bad.mode.clone()));
    }
    let horizon = t_end / restarts as f64;
    let e = system.mode_count();
    let mut steer = BTreeMap::new();
    let mut condition = 0.0f64;
    for g0 in 0..e {
        for g in 0..e {
            let label = if g0 == g {
                system.mode_id(g).to_string()
            } else {
                format!("{} (control of {})", system.mode_id(g), system.mode_id(g0))
            };
            let (s, c) = steering_operator(&system.modes[g].a, &system.modes[g0].b0, horizon, rank_tol, &label)?;
            condition = condition.max(c);
            steer.insert((g0, g), s);
        }
    }
    Ok(ControlPolicy::MinEnergy(PiecewiseNull {
        restarts,
        horizon,
        steer,
        a_star: system.modes.iter().map(|m| m.a.transpose()).collect(),
        b_star: system.modes.iter().map(|m| m.b0.transpose()).collect(),
        rates: (0..e).map(|g| system.beta_rate(g)).collect(),
        condition,
    }))
}

/// Whether every `A(γ)` is symmetric and commutes with every `B⁰B⁰*`.
pub fn commuting_hypothesis(system: &SwitchSystem, tol: f64) -> bool {
    system.modes.iter().all(|m| {
        let scale = m.a.norm().max(1.0);
        (&m.a - m.a.transpose()).norm() <= tol * scale
            && system.modes.iter().all(|k| {
                let bb = &k.b0 * k.b0.transpose();
                (&m.a * &bb - &bb * &m.a).norm() <= tol * scale * bb.norm().max(1.0)
            })
    })
}

/// `‖𝓖(t)𝓖⁻¹(t′) − 𝓖⁻¹(t′)𝓖(t)‖`; `None` if `𝓖(t′)` is singular.
pub fn gramian_commutator(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64, t2: f64, rank_tol: f64) -> Option<f64> {
    let g = gramian(a, b, t, gramian_step(t.max(t2)));
    let (inv, _) = invert_spd(&gramian(a, b, t2, gramian_step(t.max(t2))), rank_tol);
    inv.map(|inv| (&g * &inv - &inv * &g).norm())
}

/// `|X_t| ≤ e^{a₀t}|x₀|·(1 + 1e-6)` along a trajectory.
pub fn excursion_bound_holds(traj: &Trajectory, a0: f64) -> bool {
    let x0 = traj.states.first().map_or(0.0, |x| x.norm());
    traj.grid
        .iter()
        .zip(&traj.states)
        .all(|(t, x)| x.norm() <= (a0 * t).exp() * x0 * (1.0 + 1e-6) + 1e-300)
}
