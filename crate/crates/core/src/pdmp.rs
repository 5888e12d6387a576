//! Simulation of the mode chain, the controlled state and its dual.
//!
//! Between jumps every process here is a linear ODE in an augmented state;
//! it is integrated with classical RK4 on a uniform grid per sub-interval,
//! where sub-intervals are cut at jump times and at control breakpoints.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, WeightedIndex};

use crate::model::SwitchSystem;
use crate::numeric::{fmt17, rk4_step, step_count};

/// Independent random stream number `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One realization of the mode chain on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePath {
    pub t_end: f64,
    pub jump_times: Vec<f64>,
    /// Mode indices: the initial mode followed by each post-jump mode.
    pub modes: Vec<usize>,
}

impl ModePath {
    pub fn constant(mode: usize, t_end: f64) -> Self {
        Self {
            t_end,
            jump_times: Vec::new(),
            modes: vec![mode],
        }
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    /// `(start, end, mode)` for each inter-jump segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let starts = std::iter::once(0.0).chain(self.jump_times.iter().copied());
        let ends = self.jump_times.iter().copied().chain(std::iter::once(self.t_end));
        starts.zip(ends).zip(&self.modes).map(|((s, e), &m)| (s, e, m))
    }

    pub fn mode_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.modes[k]
    }
}

/// Exponential holding times with rate `λ(γ)`, post-jump mode drawn from the
/// row `Q(γ,·)`.
pub fn sample_mode_path<R: Rng + ?Sized>(system: &SwitchSystem, g0: usize, t_end: f64, rng: &mut R) -> ModePath {
    let mut path = ModePath::constant(g0, t_end);
    let mut t = 0.0;
    let mut g = g0;
    loop {
        let support = system.support(g);
        let rate = system.modes[g].rate;
        if rate <= 0.0 || support.is_empty() {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t > t_end {
            break;
        }
        let pick = WeightedIndex::new(support.iter().map(|&(_, w)| w)).expect("positive weights");
        g = support[pick.sample(rng)].0;
        path.jump_times.push(t);
        path.modes.push(g);
    }
    path
}

/// Drift between jumps: `A(γ) − λ(γ) Σ_θ Q(γ,θ) C(γ,θ)`.
pub fn effective_drift(system: &SwitchSystem, g: usize) -> DMatrix<f64> {
    let mut a = system.modes[g].a.clone();
    for (t, w) in system.support(g) {
        a -= system.jump_matrix(g, t) * w;
    }
    a
}

/// Open-loop control over one inter-jump segment, in time `s` elapsed since
/// the segment started.
#[derive(Clone)]
pub enum SegmentControl {
    Zero,
    Constant(DVector<f64>),
    /// `u(s) = −(1/b)·e^{−r s}·B*·z(s)` for `s < horizon` and `0` after,
    /// where `ż = −A* z`, `z(0) = z0`, `r = β·γ` and `b` the scale of `B`
    /// at the start of the segment.
    Exo {
        z0: DVector<f64>,
        a_star: DMatrix<f64>,
        b_star: DMatrix<f64>,
        rate: f64,
        b_scale: f64,
        horizon: f64,
    },
    Func(Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>),
}

impl std::fmt::Debug for SegmentControl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(u) => write!(f, "Constant({:?})", u.as_slice()),
            Self::Exo { horizon, .. } => write!(f, "Exo {{ horizon: {horizon} }}"),
            Self::Func(_) => write!(f, "Func"),
        }
    }
}

/// What a policy sees when a segment starts.
#[derive(Debug, Clone, Copy)]
pub struct SegmentContext<'a> {
    pub index: usize,
    pub mode: usize,
    pub initial_mode: usize,
    pub start: f64,
    pub state: &'a DVector<f64>,
    /// `e^{∫₀ˢᵗᵃʳᵗ β·γ_r dr}`: the factor multiplying `B⁰(γ₀)` at the start.
    pub b_scale: f64,
}

/// Rule choosing the control of each segment from the state at its start.
pub trait SegmentPlanner: Sync {
    fn plan(&self, ctx: &SegmentContext<'_>) -> SegmentControl;
}

impl<F> SegmentPlanner for F
where
    F: Fn(&SegmentContext<'_>) -> SegmentControl + Sync,
{
    fn plan(&self, ctx: &SegmentContext<'_>) -> SegmentControl {
        self(ctx)
    }
}

/// Zero control.
pub struct NoControl;

impl SegmentPlanner for NoControl {
    fn plan(&self, _: &SegmentContext<'_>) -> SegmentControl {
        SegmentControl::Zero
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Pre,
    Post,
}

impl Side {
    fn label(self) -> &'static str {
        match self {
            Side::Interior => "",
            Side::Pre => "pre",
            Side::Post => "post",
        }
    }
}

/// Sampled trajectory. Jump times appear twice, as `Pre` (left limit) and
/// `Post` rows.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub modes: Vec<usize>,
    pub sides: Vec<Side>,
}

impl Trajectory {
    fn push(&mut self, t: f64, x: DVector<f64>, mode: usize, side: Side) {
        self.grid.push(t);
        self.states.push(x);
        self.modes.push(mode);
        self.sides.push(side);
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectories start with a row")
    }

    /// CSV with header `t,mode,x1,…,xn,side`.
    pub fn to_csv(&self, system: &SwitchSystem) -> String {
        let n = self.states.first().map_or(system.n, |x| x.len());
        let mut out = String::from("t,mode");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push_str(",side\n");
        for k in 0..self.grid.len() {
            out.push_str(&fmt17(self.grid[k]));
            out.push(',');
            out.push_str(&csv_field(system.mode_id(self.modes[k])));
            for x in self.states[k].iter() {
                out.push(',');
                out.push_str(&fmt17(*x));
            }
            out.push(',');
            out.push_str(self.sides[k].label());
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Right-hand side of one segment plus the elapsed times at which it stops
/// being smooth. The right-hand side receives the absolute time and the
/// midpoint of the current smooth piece, so that stages evaluated exactly at
/// a breakpoint use the one-sided limit from inside the piece.
/// Right-hand side `(t, piece midpoint, y)`.
type Rhs<'a> = Box<dyn Fn(f64, f64, &DVector<f64>) -> DVector<f64> + 'a>;

struct SegmentDynamics<'a> {
    rhs: Rhs<'a>,
    breaks: Vec<f64>,
    /// Constant generator `M` of the piece at the given midpoint when the
    /// dynamics are `y' = M y`; steps then use the exact RK4 propagator.
    linear: Option<Box<dyn Fn(f64) -> DMatrix<f64> + 'a>>,
}

/// `I + hM + (hM)²/2 + (hM)³/6 + (hM)⁴/24`, one RK4 step of `y' = M y`.
fn rk4_propagator(m: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let hm = m * h;
    let mut p = DMatrix::identity(m.nrows(), m.ncols());
    let mut term = p.clone();
    for k in 1..=4 {
        term = &term * &hm / k as f64;
        p += &term;
    }
    p
}

/// Drives an augmented state along a path. `plan` may reinitialize auxiliary
/// components of the state when a segment starts; `jump` applies the jump map.
fn drive<'a>(
    path: &ModePath,
    dt: f64,
    mut state: DVector<f64>,
    mut plan: impl FnMut(usize, usize, f64, &mut DVector<f64>) -> SegmentDynamics<'a>,
    mut jump: impl FnMut(usize, usize, &mut DVector<f64>),
    mut observe: impl FnMut(f64, &DVector<f64>, usize, Side),
) -> DVector<f64> {
    let segments: Vec<_> = path.segments().collect();
    for (k, &(start, end, mode)) in segments.iter().enumerate() {
        let dynamics = plan(k, mode, start, &mut state);
        if k == 0 {
            observe(start, &state, mode, Side::Interior);
        }
        let mut cuts: Vec<f64> = dynamics
            .breaks
            .iter()
            .map(|b| start + b)
            .filter(|&b| b > start && b < end)
            .collect();
        cuts.push(end);
        let mut t0 = start;
        for &t1 in &cuts {
            let mid = 0.5 * (t0 + t1);
            let mut f = |t: f64, y: &DVector<f64>| (dynamics.rhs)(t, mid, y);
            let steps = step_count(t1 - t0, dt);
            let h = (t1 - t0) / steps.max(1) as f64;
            let prop = dynamics.linear.as_ref().map(|m| rk4_propagator(&m(mid), h));
            for i in 0..steps {
                let t = t0 + i as f64 * h;
                state = match &prop {
                    Some(p) => p * &state,
                    None => rk4_step(&mut f, t, &state, h),
                };
                let t_next = if i + 1 == steps { t1 } else { t + h };
                let last = k + 1 < segments.len() && t_next == end;
                observe(t_next, &state, mode, if last { Side::Pre } else { Side::Interior });
            }
            t0 = t1;
        }
        if k + 1 < segments.len() {
            let next = segments[k + 1].2;
            jump(mode, next, &mut state);
            observe(end, &state, next, Side::Post);
        }
    }
    state
}

/// Forward-process bookkeeping shared by the simulators.
struct Forward {
    g0: usize,
    drifts: Vec<DMatrix<f64>>,
    b0: DMatrix<f64>,
    b_scale: f64,
}

impl Forward {
    fn new(system: &SwitchSystem, g0: usize) -> Self {
        Self {
            g0,
            drifts: (0..system.mode_count()).map(|g| effective_drift(system, g)).collect(),
            b0: system.modes[g0].b0.clone(),
            b_scale: 1.0,
        }
    }

    fn context<'s>(&self, index: usize, mode: usize, start: f64, x: &'s DVector<f64>) -> SegmentContext<'s> {
        SegmentContext {
            index,
            mode,
            initial_mode: self.g0,
            start,
            state: x,
            b_scale: self.b_scale,
        }
    }
}

/// Control value at elapsed time `s` inside the smooth piece whose midpoint
/// is at elapsed time `piece`; `aux` is the exosystem state.
fn control_value(ctl: &SegmentControl, s: f64, piece: f64, aux: &DVector<f64>, d: usize) -> DVector<f64> {
    match ctl {
        SegmentControl::Zero => DVector::zeros(d),
        SegmentControl::Constant(u) => u.clone(),
        SegmentControl::Exo {
            b_star,
            rate,
            b_scale,
            horizon,
            ..
        } => {
            if piece >= *horizon {
                DVector::zeros(d)
            } else {
                b_star * aux * (-(-rate * s).exp() / b_scale)
            }
        }
        SegmentControl::Func(f) => f(s),
    }
}

fn control_breaks(ctl: &SegmentControl) -> Vec<f64> {
    match ctl {
        SegmentControl::Exo { horizon, .. } => vec![*horizon],
        _ => Vec::new(),
    }
}

fn aux_init(ctl: &SegmentControl, n: usize) -> DVector<f64> {
    match ctl {
        SegmentControl::Exo { z0, .. } => z0.clone(),
        _ => DVector::zeros(n),
    }
}

fn aux_drift(ctl: &SegmentControl, aux: &DVector<f64>) -> DVector<f64> {
    match ctl {
        SegmentControl::Exo { a_star, .. } => -(a_star * aux),
        _ => DVector::zeros(aux.len()),
    }
}

/// Dual control `v_t(θ)`.
#[derive(Clone)]
pub enum DualControl {
    Zero,
    /// `v_t(θ) = F(γ_{t−}, θ) Y_{t−}`; missing edges act as zero.
    Feedback(BTreeMap<(usize, usize), DMatrix<f64>>),
    /// `v(mode, θ, t)` as a deterministic function.
    OpenLoop(Arc<dyn Fn(usize, usize, f64) -> DVector<f64> + Send + Sync>),
}

struct Dual<'a> {
    system: &'a SwitchSystem,
    control: &'a DualControl,
    a_star: Vec<DMatrix<f64>>,
    /// Closed-loop drift per mode under feedback.
    closed: Vec<DMatrix<f64>>,
}

impl<'a> Dual<'a> {
    fn new(system: &'a SwitchSystem, control: &'a DualControl) -> Self {
        let n = system.n;
        let a_star: Vec<_> = system.modes.iter().map(|m| m.a.transpose()).collect();
        let closed = (0..system.mode_count())
            .map(|g| {
                let mut m = -&a_star[g];
                if let DualControl::Feedback(f) = control {
                    for (t, w) in system.support(g) {
                        if let Some(fm) = f.get(&(g, t)) {
                            let c = system.jump_matrix(g, t).transpose() + DMatrix::identity(n, n);
                            m -= c * fm * w;
                        }
                    }
                }
                m
            })
            .collect();
        Self {
            system,
            control,
            a_star,
            closed,
        }
    }

    fn drift(&self, g: usize, t: f64, y: &DVector<f64>) -> DVector<f64> {
        match self.control {
            DualControl::Zero | DualControl::Feedback(_) => &self.closed[g] * y,
            DualControl::OpenLoop(v) => {
                let n = self.system.n;
                let mut out = -(&self.a_star[g] * y);
                for (th, w) in self.system.support(g) {
                    let c = self.system.jump_matrix(g, th).transpose() + DMatrix::identity(n, n);
                    out -= c * v(g, th, t) * w;
                }
                out
            }
        }
    }

    fn jump(&self, from: usize, to: usize, t: f64, y: &DVector<f64>) -> DVector<f64> {
        match self.control {
            DualControl::Zero => y.clone(),
            DualControl::Feedback(f) => match f.get(&(from, to)) {
                Some(fm) => y + fm * y,
                None => y.clone(),
            },
            DualControl::OpenLoop(v) => y + v(from, to, t),
        }
    }
}

/// Full trajectory of the controlled state. The initial mode is `path.modes[0]`.
pub fn simulate_forward(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    policy: &dyn SegmentPlanner,
    path: &ModePath,
    dt: f64,
) -> Trajectory {
    let mut traj = Trajectory::default();
    let n = system.n;
    forward_impl(system, x0, policy, path, dt, |t, s, g, side| {
        traj.push(t, s.rows(0, n).into_owned(), g, side)
    });
    traj
}

/// Terminal state `X_T` only.
pub fn simulate_forward_terminal(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    policy: &dyn SegmentPlanner,
    path: &ModePath,
    dt: f64,
) -> DVector<f64> {
    let out = forward_impl(system, x0, policy, path, dt, |_, _, _, _| {});
    out.rows(0, system.n).into_owned()
}

fn forward_impl(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    policy: &dyn SegmentPlanner,
    path: &ModePath,
    dt: f64,
    observe: impl FnMut(f64, &DVector<f64>, usize, Side),
) -> DVector<f64> {
    let n = system.n;
    let d = system.d;
    let g0 = path.modes[0];
    let mut fwd = Forward::new(system, g0);
    let mut state = DVector::zeros(2 * n);
    state.rows_mut(0, n).copy_from(x0);
    let mut prev: Option<(f64, usize)> = None;
    drive(
        path,
        dt,
        state,
        |k, g, start, state| {
            if let Some((t_prev, g_prev)) = prev {
                fwd.b_scale *= (system.beta_rate(g_prev) * (start - t_prev)).exp();
            }
            prev = Some((start, g));
            let x = state.rows(0, n).into_owned();
            let ctl = policy.plan(&fwd.context(k, g, start, &x));
            state.rows_mut(n, n).copy_from(&aux_init(&ctl, n));
            let a = fwd.drifts[g].clone();
            let b = &fwd.b0 * fwd.b_scale;
            let rate = system.beta_rate(g);
            let breaks = control_breaks(&ctl);
            let cancels = match &ctl {
                SegmentControl::Zero => true,
                SegmentControl::Exo {
                    rate: r, b_scale: bs, ..
                } => *r == rate && *bs == fwd.b_scale,
                _ => false,
            };
            let linear: Option<Box<dyn Fn(f64) -> DMatrix<f64>>> = match &ctl {
                _ if !cancels => None,
                SegmentControl::Zero | SegmentControl::Exo { .. } => {
                    // e^{rs} and b_scale cancel against the exosystem control.
                    let mut m = DMatrix::zeros(2 * n, 2 * n);
                    m.view_mut((0, 0), (n, n)).copy_from(&a);
                    let coupling = match &ctl {
                        SegmentControl::Exo {
                            a_star,
                            b_star,
                            horizon,
                            ..
                        } => {
                            m.view_mut((n, n), (n, n)).copy_from(&(-a_star));
                            Some((-(&fwd.b0 * b_star), *horizon))
                        }
                        _ => None,
                    };
                    Some(Box::new(move |mid: f64| {
                        let mut m = m.clone();
                        if let Some((c, horizon)) = &coupling {
                            if mid - start < *horizon {
                                m.view_mut((0, n), (n, n)).copy_from(c);
                            }
                        }
                        m
                    }))
                }
                _ => None,
            };
            SegmentDynamics {
                linear,
                rhs: Box::new(move |t, mid, y| {
                    let s = t - start;
                    let x = y.rows(0, n);
                    let aux = y.rows(n, n).into_owned();
                    let u = control_value(&ctl, s, mid - start, &aux, d);
                    let mut out = DVector::zeros(2 * n);
                    out.rows_mut(0, n).copy_from(&(&a * x + &b * u * (rate * s).exp()));
                    out.rows_mut(n, n).copy_from(&aux_drift(&ctl, &aux));
                    out
                }),
                breaks,
            }
        },
        |from, to, state| {
            let c = system.jump_matrix(from, to);
            let x = state.rows(0, n).into_owned();
            state.rows_mut(0, n).copy_from(&(&x + c * &x));
        },
        observe,
    )
}

/// Trajectory of the dual state `Y` started at `y0`.
pub fn simulate_dual(
    system: &SwitchSystem,
    y0: &DVector<f64>,
    v: &DualControl,
    path: &ModePath,
    dt: f64,
) -> Trajectory {
    let dual = Dual::new(system, v);
    let dual = &dual;
    let mut traj = Trajectory::default();
    let mut jump_time = path.jump_times.iter();
    drive(
        path,
        dt,
        y0.clone(),
        |_, g, _, _| SegmentDynamics {
            rhs: Box::new(move |t, _, y| dual.drift(g, t, y)),
            breaks: Vec::new(),
            linear: match dual.control {
                DualControl::OpenLoop(_) => None,
                _ => Some(Box::new(move |_| dual.closed[g].clone())),
            },
        },
        |from, to, y| {
            let t = *jump_time.next().expect("one jump per transition");
            *y = dual.jump(from, to, t, y);
        },
        |t, y, g, side| traj.push(t, y.clone(), g, side),
    );
    traj
}

/// One coupled draw of the forward state and the dual on a common path.
#[derive(Debug, Clone)]
pub struct DualitySample {
    pub x_t: DVector<f64>,
    pub y_t: DVector<f64>,
    /// `∫₀ᵀ ⟨B_t u_t, Y_t⟩ dt`.
    pub control_term: f64,
}

impl DualitySample {
    /// `⟨X_T, Y_T⟩ − ∫⟨B u, Y⟩`; its expectation is `⟨x₀, y₀⟩`.
    pub fn defect(&self) -> f64 {
        self.x_t.dot(&self.y_t) - self.control_term
    }
}

pub fn simulate_duality_pair(
    system: &SwitchSystem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    policy: &dyn SegmentPlanner,
    v: &DualControl,
    path: &ModePath,
    dt: f64,
) -> DualitySample {
    let n = system.n;
    let d = system.d;
    let g0 = path.modes[0];
    let dual = Dual::new(system, v);
    let dual = &dual;
    let mut fwd = Forward::new(system, g0);
    // Layout: X, z (exosystem), Y, running integral.
    let dim = 3 * n + 1;
    let mut state = DVector::zeros(dim);
    state.rows_mut(0, n).copy_from(x0);
    state.rows_mut(2 * n, n).copy_from(y0);
    let mut prev: Option<(f64, usize)> = None;
    let mut jump_time = path.jump_times.iter();
    let out = drive(
        path,
        dt,
        state,
        |k, g, start, state| {
            if let Some((t_prev, g_prev)) = prev {
                fwd.b_scale *= (system.beta_rate(g_prev) * (start - t_prev)).exp();
            }
            prev = Some((start, g));
            let x = state.rows(0, n).into_owned();
            let ctl = policy.plan(&fwd.context(k, g, start, &x));
            state.rows_mut(n, n).copy_from(&aux_init(&ctl, n));
            let a = fwd.drifts[g].clone();
            let b = &fwd.b0 * fwd.b_scale;
            let rate = system.beta_rate(g);
            let breaks = control_breaks(&ctl);
            SegmentDynamics {
                linear: None,
                rhs: Box::new(move |t, mid, s_| {
                    let s = t - start;
                    let x = s_.rows(0, n);
                    let aux = s_.rows(n, n).into_owned();
                    let y = s_.rows(2 * n, n).into_owned();
                    let bu = &b * control_value(&ctl, s, mid - start, &aux, d) * (rate * s).exp();
                    let mut out = DVector::zeros(dim);
                    out.rows_mut(0, n).copy_from(&(&a * x + &bu));
                    out.rows_mut(n, n).copy_from(&aux_drift(&ctl, &aux));
                    out.rows_mut(2 * n, n).copy_from(&dual.drift(g, t, &y));
                    out[3 * n] = bu.dot(&y);
                    out
                }),
                breaks,
            }
        },
        |from, to, state| {
            let t = *jump_time.next().expect("one jump per transition");
            let c = system.jump_matrix(from, to);
            let x = state.rows(0, n).into_owned();
            state.rows_mut(0, n).copy_from(&(&x + c * &x));
            let y = state.rows(2 * n, n).into_owned();
            state.rows_mut(2 * n, n).copy_from(&dual.jump(from, to, t, &y));
        },
        |_, _, _, _| {},
    );
    DualitySample {
        x_t: out.rows(0, n).into_owned(),
        y_t: out.rows(2 * n, n).into_owned(),
        control_term: out[3 * n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn silent_system_never_jumps() {
        let mut s = fixtures::nec1_not_det();
        for m in &mut s.modes {
            m.rate = 0.0;
        }
        let mut rng = path_rng(1, 0);
        assert_eq!(sample_mode_path(&s, 0, 5.0, &mut rng).jump_count(), 0);
    }

    #[test]
    fn paths_are_reproducible_and_alternate() {
        let s = fixtures::nec1_not_det();
        let p1 = sample_mode_path(&s, 0, 3.0, &mut path_rng(9, 4));
        let p2 = sample_mode_path(&s, 0, 3.0, &mut path_rng(9, 4));
        assert_eq!(p1, p2);
        assert!(p1.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(p1.modes.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn mean_jump_count_is_rate_times_horizon() {
        let s = fixtures::nec1_not_det();
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|i| sample_mode_path(&s, 0, 1.0, &mut path_rng(3, i)).jump_count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        // Poisson(1): σ = 1.
        assert!((mean - 1.0).abs() <= 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn first_jump_time_is_exponential() {
        let s = fixtures::nec1_not_det();
        let n = 10_000;
        let mut t1: Vec<f64> = (0..n)
            .map(|i| {
                let p = sample_mode_path(&s, 0, 50.0, &mut path_rng(5, i));
                p.jump_times[0]
            })
            .collect();
        t1.sort_by(f64::total_cmp);
        let ks = t1
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let cdf = 1.0 - (-t).exp();
                ((i + 1) as f64 / n as f64 - cdf)
                    .abs()
                    .max((cdf - i as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        // Critical value at the 1% level.
        assert!(ks < 1.63 / (n as f64).sqrt(), "{ks}");
    }

    #[test]
    fn effective_drift_examples() {
        let s = fixtures::nec1_not_det();
        assert_eq!(effective_drift(&s, 0), -dmatrix![0.0, 0.5; 0.5, 0.0]);
        let s = fixtures::cont_switch_bound();
        assert_eq!(effective_drift(&s, 1), s.modes[1].a);
    }

    #[test]
    fn forward_without_jumps_matches_exponential() {
        let mut s = fixtures::cont_switch_bound();
        for m in &mut s.modes {
            m.rate = 0.0;
        }
        let x0 = dvector![1.0, -0.5];
        let path = ModePath::constant(0, 1.0);
        let traj = simulate_forward(&s, &x0, &NoControl, &path, 1e-3);
        let exact = s.modes[0].a.clone().exp() * &x0;
        assert!((traj.last_state() - exact).norm() < 1e-8);
    }

    #[test]
    fn jump_rows_hold_left_limit_and_image() {
        let s = fixtures::nec1_not_det();
        let path = ModePath {
            t_end: 1.0,
            jump_times: vec![0.3],
            modes: vec![0, 1],
        };
        let traj = simulate_forward(&s, &dvector![1.0, 2.0], &NoControl, &path, 0.01);
        let pre = traj.sides.iter().position(|s| *s == Side::Pre).unwrap();
        assert_eq!(traj.sides[pre + 1], Side::Post);
        assert_eq!(traj.grid[pre], 0.3);
        assert_eq!(traj.grid[pre + 1], 0.3);
        let left = &traj.states[pre];
        let expected = left + s.jump_matrix(0, 1) * left;
        assert_eq!(traj.states[pre + 1], expected);
        let csv = traj.to_csv(&s);
        assert!(csv.starts_with("t,mode,x1,x2,side\n"));
        assert!(csv.contains(",pre\n") && csv.contains(",post\n"));
    }

    #[test]
    fn fourth_order_convergence() {
        let s = fixtures::nec1_det_not_nec2();
        let path = sample_mode_path(&s, 0, 1.0, &mut path_rng(2, 0));
        let x0 = dvector![1.0, 1.0];
        let run = |dt| simulate_forward_terminal(&s, &x0, &NoControl, &path, dt);
        let e1 = (run(0.1) - run(0.0125)).norm();
        let e2 = (run(0.05) - run(0.0125)).norm();
        // Halving the step should cut the error by about 16.
        assert!(e1 / e2 > 10.0, "{e1} {e2}");
    }

    #[test]
    fn dual_is_constant_without_drift() {
        let s = fixtures::nec1_not_det();
        let path = sample_mode_path(&s, 0, 1.0, &mut path_rng(0, 1));
        let y0 = dvector![0.3, -1.0];
        let traj = simulate_dual(&s, &y0, &DualControl::Zero, &path, 0.01);
        assert!(traj.states.iter().all(|y| (y - &y0).norm() < 1e-14));
    }

    #[test]
    fn dual_with_explicit_feedback_matches_closed_form() {
        let s = fixtures::nec1_det_not_nec2();
        let f = dmatrix![0.0, 0.0; 0.0, -2.0];
        let v = DualControl::Feedback([((0, 1), f.clone()), ((1, 0), f)].into_iter().collect());
        for i in 0..5 {
            let path = sample_mode_path(&s, 0, 1.0, &mut path_rng(11, i));
            let traj = simulate_dual(&s, &dvector![0.0, 1.0], &v, &path, 1e-4);
            for (k, y) in traj.states.iter().enumerate() {
                let t = traj.grid[k];
                let mut jumps = path.jump_times.partition_point(|&s| s < t);
                if traj.sides[k] == Side::Post {
                    jumps += 1;
                }
                let sign = if jumps % 2 == 0 { 1.0 } else { -1.0 };
                let exact = dvector![0.0, sign * (2.0 * t).exp()];
                assert!((y - exact).norm() < 1e-6, "t={t}");
            }
        }
    }
}
