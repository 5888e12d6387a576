//! Algebraic controllability criteria.
//!
//! Every criterion computes, per initial mode, a witness subspace of the dual
//! state space; the criterion holds at that mode exactly when the witness is
//! `{0}`. Chains record the decreasing iterates that led to the witness.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ConstantSystem, SwitchSystem};
use crate::subspace::{self, kernel, restricted_preimage_all, Subspace};

/// Residual accepted for a feedback witness.
pub const FEEDBACK_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ModeVerdict {
    pub mode: String,
    pub pass: bool,
    pub witness: Subspace,
    pub chain: Vec<Subspace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kalman_rank: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionVerdict {
    pub name: &'static str,
    pub per_mode: Vec<ModeVerdict>,
    pub overall: bool,
}

impl CriterionVerdict {
    fn new(name: &'static str, per_mode: Vec<ModeVerdict>) -> Self {
        let overall = per_mode.iter().all(|m| m.pass);
        Self {
            name,
            per_mode,
            overall,
        }
    }

    pub fn mode(&self, id: &str) -> Option<&ModeVerdict> {
        self.per_mode.iter().find(|m| m.mode == id)
    }
}

fn verdict_for(mode: &str, witness: Subspace, chain: Vec<Subspace>, kalman_rank: Option<usize>) -> ModeVerdict {
    ModeVerdict {
        mode: mode.to_string(),
        pass: witness.is_zero(),
        witness,
        chain,
        kalman_rank,
    }
}

/// Closes a chain by repeating its last entry, so that stabilization is
/// visible as two equal trailing entries.
fn close_chain(mut chain: Vec<Subspace>) -> Vec<Subspace> {
    if let Some(last) = chain.last().cloned() {
        chain.push(last);
    }
    chain
}

/// `[B, AB, …, Aⁿ⁻¹B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = b.shape();
    let mut out = DMatrix::zeros(n, n * d);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * d), (n, d)).copy_from(&block);
        block = a * block;
    }
    out
}

pub fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>, rank_tol: f64) -> usize {
    subspace::rank(&controllability_matrix(a, b), rank_tol)
}

/// Partial intersections `∩_{k≤j} Ker(B* Mᵏ)` for `j = 0, 1, …` until the
/// dimension stops dropping, closed by a repeated entry.
fn unobservable_chain(m: &DMatrix<f64>, bstar: &DMatrix<f64>, rank_tol: f64) -> Vec<Subspace> {
    let n = m.nrows();
    let d = bstar.nrows();
    let mut stacked = DMatrix::zeros(0, n);
    let mut block = bstar.clone();
    let mut chain: Vec<Subspace> = Vec::new();
    for _ in 0..n.max(1) {
        let r = stacked.nrows();
        stacked = stacked.resize_vertically(r + d, 0.0);
        stacked.view_mut((r, 0), (d, n)).copy_from(&block);
        block = &block * m;
        let v = kernel(&stacked, rank_tol);
        let stable = chain.last().is_some_and(|p| p.dim() == v.dim());
        let done = v.is_zero() || stable;
        if !stable {
            chain.push(v);
        }
        if done {
            break;
        }
    }
    close_chain(chain)
}

/// Largest `M`-invariant subspace of `Ker(B*)`, as `∩_{k<n} Ker(B* Mᵏ)`.
pub fn unobservable_subspace(m: &DMatrix<f64>, bstar: &DMatrix<f64>, rank_tol: f64) -> Subspace {
    let n = m.nrows();
    let mut stacked = DMatrix::zeros(bstar.nrows() * n.max(1), n);
    let mut block = bstar.clone();
    for k in 0..n.max(1) {
        stacked
            .view_mut((k * bstar.nrows(), 0), block.shape())
            .copy_from(&block);
        block = &block * m;
    }
    kernel(&stacked, rank_tol)
}

/// Same subspace by the descending iteration `Vⱼ₊₁ = Vⱼ ∩ M⁻¹Vⱼ` from `Ker(B*)`.
pub fn unobservable_by_iteration(m: &DMatrix<f64>, bstar: &DMatrix<f64>, rank_tol: f64) -> Subspace {
    let mut v = kernel(bstar, rank_tol);
    loop {
        let next = restricted_preimage_all(&v, &[(m.clone(), v.clone())], rank_tol);
        if next.dim() == v.dim() {
            return next;
        }
        v = next;
    }
}

/// Modes reachable from `g0` in at most `k` jumps of positive intensity.
pub fn accessible_modes(system: &SwitchSystem, g0: usize, k: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([g0]);
    let mut frontier = vec![g0];
    for _ in 0..k {
        let mut next = Vec::new();
        for &g in &frontier {
            for (t, _) in system.support(g) {
                if seen.insert(t) {
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    seen
}

/// Dual-side data of one mode: `A*` and the adjoint jump matrices with their
/// intensities on the support of the jump law.
#[derive(Debug, Clone)]
pub struct DualMode {
    pub a_star: DMatrix<f64>,
    pub marks: Vec<(f64, DMatrix<f64>)>,
}

/// Adjoint data of a switch-system mode.
pub fn dual_mode(system: &SwitchSystem, g: usize) -> DualMode {
    DualMode {
        a_star: system.modes[g].a.transpose(),
        marks: system
            .support(g)
            .into_iter()
            .map(|(t, w)| (w, system.jump_matrix(g, t).transpose()))
            .collect(),
    }
}

/// Adjoint data of a constant system viewed as a single mode.
pub fn dual_constant(cs: &ConstantSystem) -> DualMode {
    DualMode {
        a_star: cs.a.transpose(),
        marks: cs.marks.iter().map(|m| (m.weight, m.c.transpose())).collect(),
    }
}

/// `V + Σᵢ Cᵢ* V`.
fn jump_closure(v: &Subspace, mode: &DualMode, rank_tol: f64) -> Subspace {
    let n = v.ambient_dim();
    let k = v.dim();
    let mut stacked = DMatrix::zeros(n, k * (1 + mode.marks.len()));
    stacked.view_mut((0, 0), (n, k)).copy_from(v.basis());
    for (i, (_, c)) in mode.marks.iter().enumerate() {
        stacked.view_mut((0, (i + 1) * k), (n, k)).copy_from(&(c * v.basis()));
    }
    subspace::image_scaled(&stacked, 1.0, rank_tol)
}

/// Largest `V ⊆ W` with `A*(γ)V ⊆ V + Σ_θ C*(γ,θ)V` for every listed mode,
/// by descending iteration from `W`. Returns the closed chain of iterates.
pub fn strict_invariant_fixpoint(modes: &[DualMode], w: &Subspace, rank_tol: f64) -> (Subspace, Vec<Subspace>) {
    let mut v = w.clone();
    let mut chain = vec![v.clone()];
    loop {
        if v.is_zero() {
            break;
        }
        let conditions: Vec<_> = modes
            .iter()
            .map(|m| (m.a_star.clone(), jump_closure(&v, m, rank_tol)))
            .collect();
        let next = restricted_preimage_all(&v, &conditions, rank_tol);
        if next.dim() == v.dim() {
            break;
        }
        v = next;
        chain.push(v.clone());
    }
    (v, close_chain(chain))
}

/// `(A − λ Σ_θ Q C)*` restricted to the support of the jump law.
pub fn effective_adjoint(system: &SwitchSystem, g: usize) -> DMatrix<f64> {
    let mut m = system.modes[g].a.transpose();
    for (t, w) in system.support(g) {
        m -= system.jump_matrix(g, t).transpose() * w;
    }
    m
}

fn b_star(system: &SwitchSystem, g: usize) -> DMatrix<f64> {
    system.modes[g].b0.transpose()
}

/// First necessary condition: the unobservable subspace of the effective
/// drift against `B⁰(γ₀)*` must vanish.
pub fn nec1_check(system: &SwitchSystem, rank_tol: f64) -> CriterionVerdict {
    let per_mode = (0..system.mode_count())
        .map(|g| {
            let m = effective_adjoint(system, g);
            let bs = b_star(system, g);
            let witness = unobservable_subspace(&m, &bs, rank_tol);
            let chain = unobservable_chain(&m, &bs, rank_tol);
            let rank = kalman_rank(&m.transpose(), &system.modes[g].b0, rank_tol);
            verdict_for(system.mode_id(g), witness, chain, Some(rank))
        })
        .collect();
    CriterionVerdict::new("nec1", per_mode)
}

/// `[V₀, V₁, …, V_|E|]` for initial mode `g0`.
pub fn nec2_chain(system: &SwitchSystem, g0: usize, rank_tol: f64) -> Vec<Subspace> {
    let seed = kernel(&b_star(system, g0), rank_tol);
    let e = system.mode_count();
    let mut chain = Vec::with_capacity(e + 1);
    let mut prev_set: Option<BTreeSet<usize>> = None;
    for k in 0..=e {
        let acc = accessible_modes(system, g0, k);
        if prev_set.as_ref() == Some(&acc) {
            let last = chain.last().cloned().expect("chain is nonempty");
            chain.push(last);
            continue;
        }
        let maps: Vec<_> = acc.iter().map(|&g| dual_mode(system, g)).collect();
        // V_k ⊆ V_{k-1}, so iterating from the previous term is equivalent and cheaper.
        let start = chain.last().cloned().unwrap_or_else(|| seed.clone());
        chain.push(strict_invariant_fixpoint(&maps, &start, rank_tol).0);
        prev_set = Some(acc);
    }
    chain
}

/// Second necessary condition: `V_∞ = ∩ V_k = {0}`.
pub fn nec2_check(system: &SwitchSystem, rank_tol: f64) -> CriterionVerdict {
    let per_mode = (0..system.mode_count())
        .map(|g| {
            let chain = nec2_chain(system, g, rank_tol);
            let witness = chain.last().cloned().expect("chain is nonempty");
            verdict_for(system.mode_id(g), witness, chain, None)
        })
        .collect();
    CriterionVerdict::new("nec2", per_mode)
}

/// Sufficient condition evaluated at the initial mode only.
pub fn suf1_check(system: &SwitchSystem, rank_tol: f64) -> CriterionVerdict {
    let per_mode = (0..system.mode_count())
        .map(|g| {
            let a_star = system.modes[g].a.transpose();
            let bs = b_star(system, g);
            let support = system.support(g);
            if support.is_empty() {
                let witness = unobservable_subspace(&a_star, &bs, rank_tol);
                let chain = unobservable_chain(&a_star, &bs, rank_tol);
                return verdict_for(system.mode_id(g), witness, chain, None);
            }
            let ker = kernel(&bs, rank_tol);
            let n = system.n;
            let images: Vec<DMatrix<f64>> = support
                .iter()
                .map(|&(t, _)| {
                    let c = system.jump_matrix(g, t).transpose() + DMatrix::identity(n, n);
                    c * ker.basis()
                })
                .collect();
            let u = if ker.is_zero() {
                Subspace::zero(n)
            } else {
                subspace::image_scaled(&concat_columns(n, &images), 1.0, rank_tol)
            };
            let first_target = subspace::sum(&ker, &u, rank_tol).expect("same ambient");
            let mut v = restricted_preimage_all(&ker, &[(a_star.clone(), first_target)], rank_tol);
            let mut chain = vec![v.clone()];
            while !v.is_zero() {
                let target = subspace::sum(&v, &u, rank_tol).expect("same ambient");
                let next = restricted_preimage_all(&v, &[(a_star.clone(), target)], rank_tol);
                if next.dim() == v.dim() {
                    break;
                }
                v = next;
                chain.push(v.clone());
            }
            verdict_for(system.mode_id(g), v, close_chain(chain), None)
        })
        .collect();
    CriterionVerdict::new("suf1", per_mode)
}

fn concat_columns(n: usize, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, total);
    let mut col = 0;
    for b in blocks {
        out.view_mut((0, col), b.shape()).copy_from(b);
        col += b.ncols();
    }
    out
}

/// Label used for the single entry of verdicts on constant systems.
pub const CONSTANT_MODE: &str = "*";

/// Necessary and sufficient condition for constant systems: the largest
/// strictly invariant subspace of `Ker B*` must vanish.
pub fn crit_equiv_check(cs: &ConstantSystem, rank_tol: f64) -> CriterionVerdict {
    let seed = kernel(&cs.b.transpose(), rank_tol);
    let (witness, chain) = strict_invariant_fixpoint(&[dual_constant(cs)], &seed, rank_tol);
    CriterionVerdict::new("crit_equiv", vec![verdict_for(CONSTANT_MODE, witness, chain, None)])
}

/// Necessary and sufficient condition when jumps leave the state unchanged:
/// every `(A(γ₀), B⁰(γ₀))` must be controllable.
pub fn crit_cont_switch_check(system: &SwitchSystem, rank_tol: f64) -> Result<CriterionVerdict> {
    let offending: Vec<String> = system
        .c
        .iter()
        .filter(|(_, c)| c.amax() != 0.0)
        .map(|(&(g, t), _)| system.edge_label(g, t))
        .collect();
    if !offending.is_empty() {
        return Err(Error::NonzeroJumps(offending));
    }
    let per_mode = (0..system.mode_count())
        .map(|g| {
            let a_star = system.modes[g].a.transpose();
            let bs = b_star(system, g);
            let witness = unobservable_subspace(&a_star, &bs, rank_tol);
            let chain = unobservable_chain(&a_star, &bs, rank_tol);
            let rank = kalman_rank(&system.modes[g].a, &system.modes[g].b0, rank_tol);
            verdict_for(system.mode_id(g), witness, chain, Some(rank))
        })
        .collect();
    Ok(CriterionVerdict::new("crit_cont_switch", per_mode))
}

/// Controllability of each deterministic pair `(A(γ), B⁰(γ))`. Reported for
/// information only.
pub fn det_kalman(system: &SwitchSystem, rank_tol: f64) -> CriterionVerdict {
    let per_mode = (0..system.mode_count())
        .map(|g| {
            let mode = &system.modes[g];
            let rank = kalman_rank(&mode.a, &mode.b0, rank_tol);
            let witness = unobservable_subspace(&mode.a.transpose(), &mode.b0.transpose(), rank_tol);
            let mut v = verdict_for(&mode.id, witness, Vec::new(), Some(rank));
            v.pass = rank == system.n;
            v
        })
        .collect();
    CriterionVerdict::new("det_kalman", per_mode)
}

/// Feedback maps `F(θ)` for each listed mode such that
/// `(A* + Σ_θ w_θ C*_θ F(θ)) V ⊆ V` and `F(θ)` maps into `V`.
///
/// Solved per basis vector by least squares; returns the maps (indexed like
/// the modes' marks) and the largest residual norm.
pub fn solve_feedback(modes: &[DualMode], v: &Subspace, rank_tol: f64) -> (Vec<Vec<DMatrix<f64>>>, f64) {
    let n = v.ambient_dim();
    let k = v.dim();
    let basis = v.basis();
    let perp = v.complement_projector();
    let mut worst = 0.0f64;
    let maps = modes
        .iter()
        .map(|mode| {
            let p = mode.marks.len();
            if k == 0 || p == 0 {
                for i in 0..k {
                    worst = worst.max((&perp * &mode.a_star * basis.column(i)).norm());
                }
                return vec![DMatrix::zeros(n, n); p];
            }
            let blocks: Vec<DMatrix<f64>> = mode.marks.iter().map(|(w, c)| &perp * c * basis * *w).collect();
            let g = concat_columns(n, &blocks);
            let g_pinv = subspace::pseudoinverse(&g, rank_tol);
            // coords[θ] holds, column by column, the V-coordinates of F(θ)vᵢ.
            let mut coords = vec![DMatrix::zeros(k, k); p];
            for i in 0..k {
                let rhs: DVector<f64> = -(&perp * &mode.a_star * basis.column(i));
                let x = &g_pinv * &rhs;
                let residual = (&g * &x - &rhs).norm();
                worst = worst.max(residual);
                for (th, c) in coords.iter_mut().enumerate() {
                    c.column_mut(i).copy_from(&x.rows(th * k, k));
                }
            }
            coords.into_iter().map(|c| basis * c * basis.transpose()).collect()
        })
        .collect();
    (maps, worst)
}

/// Feedback making `V_∞(γ₀)` invariant for the dual system.
#[derive(Debug, Clone)]
pub struct FeedbackWitness {
    pub mode: usize,
    pub subspace: Subspace,
    /// `F(γ,θ)` on every edge leaving an accessible mode.
    pub maps: BTreeMap<(usize, usize), DMatrix<f64>>,
    pub residual: f64,
}

impl FeedbackWitness {
    pub fn map(&self, from: usize, to: usize) -> Option<&DMatrix<f64>> {
        self.maps.get(&(from, to))
    }
}

/// `None` when `V_∞(γ₀) = {0}`.
pub fn feedback_witness(system: &SwitchSystem, g0: usize, rank_tol: f64) -> Result<Option<FeedbackWitness>> {
    let v = nec2_chain(system, g0, rank_tol).pop().expect("chain is nonempty");
    if v.is_zero() {
        return Ok(None);
    }
    let acc: Vec<usize> = accessible_modes(system, g0, system.mode_count()).into_iter().collect();
    let duals: Vec<DualMode> = acc.iter().map(|&g| dual_mode(system, g)).collect();
    let (maps, residual) = solve_feedback(&duals, &v, rank_tol);
    if residual > FEEDBACK_RESIDUAL_TOL {
        return Err(Error::FeedbackInfeasible {
            mode: system.mode_id(g0).to_string(),
            residual,
        });
    }
    let mut by_edge = BTreeMap::new();
    for (&g, fs) in acc.iter().zip(maps) {
        for ((t, _), f) in system.support(g).into_iter().zip(fs) {
            by_edge.insert((g, t), f);
        }
    }
    Ok(Some(FeedbackWitness {
        mode: g0,
        subspace: v,
        maps: by_edge,
        residual,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct Overall {
    pub verdict: Verdict,
    pub deciding: Option<&'static str>,
}

const NECESSARY: [&str; 4] = ["nec1", "nec2", "crit_equiv", "crit_cont_switch"];
const SUFFICIENT: [&str; 3] = ["crit_equiv", "crit_cont_switch", "suf1"];

/// Three-valued verdict on approximate null-controllability. A failing
/// necessary criterion wins over a passing sufficient one; that combination
/// only arises through numerical rank decisions.
pub fn overall_verdict(verdicts: &[CriterionVerdict]) -> Overall {
    let find = |name: &str| verdicts.iter().find(|v| v.name == name);
    for name in NECESSARY {
        if let Some(v) = find(name).filter(|v| !v.overall) {
            return Overall {
                verdict: Verdict::No,
                deciding: Some(v.name),
            };
        }
    }
    for name in SUFFICIENT {
        if let Some(v) = find(name).filter(|v| v.overall) {
            return Overall {
                verdict: Verdict::Yes,
                deciding: Some(v.name),
            };
        }
    }
    Overall {
        verdict: Verdict::Undetermined,
        deciding: None,
    }
}

/// Everything the checker computes for one system.
#[derive(Debug, Clone, Serialize)]
pub struct CriteriaReport {
    pub verdicts: Vec<CriterionVerdict>,
    pub overall: Overall,
    /// Criteria that were not applicable, with the reason.
    pub skipped: BTreeMap<&'static str, String>,
    pub flags: Vec<String>,
}

pub fn run_all(system: &SwitchSystem, rank_tol: f64) -> CriteriaReport {
    let mut verdicts = vec![
        nec1_check(system, rank_tol),
        nec2_check(system, rank_tol),
        suf1_check(system, rank_tol),
    ];
    let mut skipped = BTreeMap::new();
    match crate::model::as_constant(system) {
        Ok(cs) => verdicts.push(crit_equiv_check(&cs, rank_tol)),
        Err(e) => {
            skipped.insert("crit_equiv", e.to_string());
        }
    }
    match crit_cont_switch_check(system, rank_tol) {
        Ok(v) => verdicts.push(v),
        Err(e) => {
            skipped.insert("crit_cont_switch", e.to_string());
        }
    }
    let overall = overall_verdict(&verdicts);
    verdicts.push(det_kalman(system, rank_tol));
    let mut flags = Vec::new();
    if system.b0_varies() {
        flags.push("mode-varying-B0".to_string());
    }
    let nec1 = &verdicts[0];
    if nec1
        .per_mode
        .iter()
        .any(|m| m.pass != (m.kalman_rank == Some(system.n)))
    {
        flags.push("nec1-kalman-disagreement".to_string());
    }
    CriteriaReport {
        verdicts,
        overall,
        skipped,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::subspace::DEFAULT_RANK_TOL as TOL;
    use nalgebra::dmatrix;

    fn span(n: usize, axes: &[usize]) -> Subspace {
        Subspace::coordinate(n, axes)
    }

    fn same(a: &Subspace, b: &Subspace) -> bool {
        a.same_as(b, 1e-9)
    }

    #[test]
    fn kalman_examples() {
        let b = dmatrix![1.0; 0.0];
        assert_eq!(kalman_rank(&dmatrix![0.0, 1.0; 1.0, 0.0], &b, TOL), 2);
        assert_eq!(kalman_rank(&DMatrix::zeros(2, 2), &b, TOL), 1);
        assert_eq!(kalman_rank(&DMatrix::identity(3, 3), &DMatrix::identity(3, 3), TOL), 3);
    }

    #[test]
    fn unobservable_examples() {
        let m = dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 0.0];
        let bs = dmatrix![1.0, 0.0, 0.0];
        assert!(same(&unobservable_subspace(&m, &bs, TOL), &span(3, &[2])));
        assert!(same(&unobservable_by_iteration(&m, &bs, TOL), &span(3, &[2])));
        let m = dmatrix![0.0, 0.0; 0.0, 1.0];
        let bs = dmatrix![1.0, 0.0];
        assert!(same(&unobservable_subspace(&m, &bs, TOL), &span(2, &[1])));
    }

    #[test]
    fn accessible_modes_grow_with_k() {
        let s = fixtures::nec1_not_det();
        assert_eq!(accessible_modes(&s, 0, 0), BTreeSet::from([0]));
        assert_eq!(accessible_modes(&s, 0, 1), BTreeSet::from([0, 1]));
    }

    #[test]
    fn strict_fixpoint_per_mode() {
        let s = fixtures::nec2_det_not_nec1();
        let ker = span(3, &[1, 2]);
        let (v0, chain) = strict_invariant_fixpoint(&[dual_mode(&s, 0)], &ker, TOL);
        assert!(same(&v0, &span(3, &[2])));
        assert!(same(&chain[chain.len() - 1], &chain[chain.len() - 2]));
        let (v1, _) = strict_invariant_fixpoint(&[dual_mode(&s, 1)], &ker, TOL);
        assert!(same(&v1, &span(3, &[1])));
    }

    #[test]
    fn nec1_on_examples() {
        let v = nec1_check(&fixtures::nec1_not_det(), TOL);
        assert!(v.overall);
        let v = nec1_check(&fixtures::nec2_det_not_nec1(), TOL);
        assert!(!v.overall);
        assert!(same(&v.per_mode[0].witness, &span(3, &[2])));
        assert!(same(&v.per_mode[1].witness, &span(3, &[1])));
        for m in &v.per_mode {
            assert_eq!(m.pass, m.kalman_rank == Some(3));
        }
    }

    #[test]
    fn nec2_on_examples() {
        let v = nec2_check(&fixtures::nec2_det_not_nec1(), TOL);
        assert!(v.overall);
        let chain = &v.per_mode[0].chain;
        assert!(same(&chain[0], &span(3, &[2])));
        assert!(chain[1].is_zero());
        let v = nec2_check(&fixtures::nec1_det_not_nec2(), TOL);
        assert!(!v.overall);
        assert!(same(&v.per_mode[0].witness, &span(2, &[1])));
    }

    #[test]
    fn suf1_on_examples() {
        let v = suf1_check(&fixtures::ctrl_not_suf1(), TOL);
        assert!(!v.overall);
        assert!(v.per_mode[0].witness.contains(&span(3, &[2]), 1e-7));
        let v = suf1_check(&fixtures::nec1_not_det(), TOL);
        assert!(same(&v.per_mode[0].witness, &span(2, &[1])));
    }

    #[test]
    fn full_rank_control_passes_everything() {
        let mut s = fixtures::nec1_det_not_nec2();
        for m in &mut s.modes {
            m.b0 = DMatrix::identity(2, 2);
        }
        s.d = 2;
        assert!(nec1_check(&s, TOL).overall);
        assert!(nec2_check(&s, TOL).overall);
        assert!(suf1_check(&s, TOL).overall);
        assert!(feedback_witness(&s, 0, TOL).unwrap().is_none());
    }

    #[test]
    fn crit_equiv_on_examples() {
        let cs = crate::model::as_constant(&fixtures::ctrl_not_suf1()).unwrap();
        assert!(crit_equiv_check(&cs, TOL).overall);
        let cs = crate::model::as_constant(&fixtures::nec1_det_not_nec2()).unwrap();
        let v = crit_equiv_check(&cs, TOL);
        assert!(!v.overall);
        assert!(same(&v.per_mode[0].witness, &span(2, &[1])));
    }

    #[test]
    fn cont_switch_examples() {
        let mut s = fixtures::cont_switch_bound();
        for m in &mut s.modes {
            m.b0 = dmatrix![1.0; 0.0];
        }
        s.d = 1;
        s.modes[0].a = dmatrix![0.0, 1.0; 0.0, 0.0];
        s.modes[1].a = dmatrix![0.0, 0.0; 1.0, 0.0];
        let v = crit_cont_switch_check(&s, TOL).unwrap();
        assert!(!v.per_mode[0].pass);
        assert_eq!(v.per_mode[0].kalman_rank, Some(1));
        assert!(v.per_mode[1].pass);
        assert!(!v.overall);

        s.modes[0].a = dmatrix![0.0, -1.0; 1.0, 0.0];
        s.modes[1].a = dmatrix![0.0, -1.0; 1.0, 0.0];
        assert!(crit_cont_switch_check(&s, TOL).unwrap().overall);

        match crit_cont_switch_check(&fixtures::nec1_not_det(), TOL) {
            Err(Error::NonzeroJumps(edges)) => assert_eq!(edges, vec!["0->1", "1->0"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn feedback_witness_matches_explicit_dual_control() {
        let s = fixtures::nec1_det_not_nec2();
        let w = feedback_witness(&s, 0, TOL).unwrap().unwrap();
        assert!(w.residual <= FEEDBACK_RESIDUAL_TOL);
        let f = w.map(0, 1).unwrap();
        assert!((f - dmatrix![0.0, 0.0; 0.0, -2.0]).norm() < 1e-9);
        assert!(feedback_witness(&fixtures::nec2_det_not_nec1(), 0, TOL)
            .unwrap()
            .is_none());
    }

    #[test]
    fn overall_verdicts_of_examples() {
        let r = run_all(&fixtures::ctrl_not_suf1(), TOL);
        assert_eq!(r.overall.verdict, Verdict::Yes);
        assert_eq!(r.overall.deciding, Some("crit_equiv"));
        let r = run_all(&fixtures::nec1_det_not_nec2(), TOL);
        assert_eq!(r.overall.verdict, Verdict::No);
        assert_eq!(r.overall.deciding, Some("nec2"));
        let r = run_all(&fixtures::nec1_not_det(), TOL);
        assert_eq!(r.overall.verdict, Verdict::No);
        let r = run_all(&fixtures::nec2_det_not_nec1(), TOL);
        assert_eq!(r.overall.verdict, Verdict::No);
        assert_eq!(r.overall.deciding, Some("nec1"));
        assert!(r.skipped.contains_key("crit_equiv"));
        let r = run_all(&fixtures::cont_switch_bound(), TOL);
        assert_eq!(r.overall.verdict, Verdict::Yes);
    }
}
