//! Penalized Riccati equations of a constant system and the numerical
//! viability test built on them.
//!
//! `K(t)` solves
//! `K' = −KA* − AK + NΠ⊥ − Σᵢ νᵢ K Cᵢ* (I+K)⁻¹ Cᵢ K`, `K(0) = 0`,
//! where `Π⊥` projects onto `(Ker B*)^⊥`. `⟨K_T y, y⟩` is the least cost
//! `E∫(Σν|v|² + N|Π⊥Y|²)` of the dual started at `y`, so it stays bounded in
//! `N` exactly when `y` can be held in `Ker B*`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{crit_equiv_check, dual_constant, solve_feedback, FEEDBACK_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::model::ConstantSystem;
use crate::numeric::{fmt17, is_positive, rk4_step, rk4_step_mat, step_count, symmetrize};
use crate::subspace::{containment_tol, kernel};

#[derive(Debug, Clone)]
pub struct RiccatiRun {
    pub penalty: f64,
    pub grid: Vec<f64>,
    pub k: Vec<DMatrix<f64>>,
}

impl RiccatiRun {
    pub fn terminal(&self) -> &DMatrix<f64> {
        self.k.last().expect("runs hold K(0)")
    }

    /// `⟨K_T y, y⟩`.
    pub fn quadratic_form(&self, y: &DVector<f64>) -> f64 {
        y.dot(&(self.terminal() * y))
    }
}

fn perp_projector(cs: &ConstantSystem, rank_tol: f64) -> DMatrix<f64> {
    kernel(&cs.b.transpose(), rank_tol).complement_projector()
}

/// Forward RK4 from `K(0) = 0` with step at most `dt`, symmetrized after
/// every step.
pub fn integrate_riccati(cs: &ConstantSystem, penalty: f64, t_end: f64, dt: f64, rank_tol: f64) -> Result<RiccatiRun> {
    if !is_positive(dt) || !is_positive(penalty) {
        return Err(Error::InvalidArgument("Riccati run needs dt > 0 and N > 0".into()));
    }
    let n = cs.n;
    let a = &cs.a;
    let at = a.transpose();
    let source = perp_projector(cs, rank_tol) * penalty;
    let eye = DMatrix::<f64>::identity(n, n);
    let failed = std::cell::Cell::new(false);
    let mut f = |_t: f64, k: &DMatrix<f64>| {
        let mut out = -(k * &at) - a * k + &source;
        if cs.marks.is_empty() {
            return out;
        }
        match (&eye + k).cholesky() {
            Some(chol) => {
                for m in &cs.marks {
                    let ck = &m.c * k;
                    out -= ck.transpose() * chol.solve(&ck) * m.weight;
                }
            }
            None => failed.set(true),
        }
        out
    };
    let steps = step_count(t_end, dt);
    let h = t_end / steps.max(1) as f64;
    let mut k = DMatrix::zeros(n, n);
    let mut grid = vec![0.0];
    let mut ks = vec![k.clone()];
    for i in 0..steps {
        let t = i as f64 * h;
        k = symmetrize(&rk4_step_mat(&mut f, t, &k, h));
        if failed.get() || k.iter().any(|x| !x.is_finite()) || (&eye + &k).cholesky().is_none() {
            return Err(Error::RiccatiStep { t: t + h });
        }
        grid.push(if i + 1 == steps { t_end } else { t + h });
        ks.push(k.clone());
    }
    Ok(RiccatiRun { penalty, grid, k: ks })
}

/// Retries once with half the step when positivity of `I + K` is lost.
pub fn integrate_riccati_adaptive(
    cs: &ConstantSystem,
    penalty: f64,
    t_end: f64,
    dt: f64,
    rank_tol: f64,
) -> Result<RiccatiRun> {
    match integrate_riccati(cs, penalty, t_end, dt, rank_tol) {
        Err(Error::RiccatiStep { .. }) => integrate_riccati(cs, penalty, t_end, dt / 2.0, rank_tol),
        other => other,
    }
}

/// CSV with header `N,t,k11,k12,…,knn` (row-major).
pub fn runs_to_csv(runs: &[RiccatiRun]) -> String {
    let n = runs.first().map_or(0, |r| r.terminal().nrows());
    let mut out = String::from("N,t");
    for i in 1..=n {
        for j in 1..=n {
            let _ = write!(out, ",k{i}{j}");
        }
    }
    out.push('\n');
    for run in runs {
        for (t, k) in run.grid.iter().zip(&run.k) {
            let _ = write!(out, "{},{}", fmt17(run.penalty), fmt17(*t));
            for i in 0..n {
                for j in 0..n {
                    let _ = write!(out, ",{}", fmt17(k[(i, j)]));
                }
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Viability {
    Viable,
    Nonviable,
    Indeterminate,
}

/// Knobs of the viability test.
#[derive(Debug, Clone, Serialize)]
pub struct ViabilityOptions {
    pub t_end: f64,
    pub penalties: Vec<f64>,
    pub growth_tol: f64,
    pub power_threshold: f64,
    pub dt: f64,
    pub rank_tol: f64,
}

impl ViabilityOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            penalties: vec![1.0, 10.0, 100.0, 1000.0],
            growth_tol: 0.05,
            power_threshold: 0.5,
            dt: 1e-4 * t_end,
            rank_tol: crate::subspace::DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ViabilityResult {
    pub verdict: Viability,
    /// Rule that produced the verdict: `outside-kernel`, `zero`, `plateau`,
    /// `certificate`, `growth` or `between-thresholds`.
    pub rule: &'static str,
    /// `(N, ⟨K_T^N y, y⟩)`.
    pub table: Vec<(f64, f64)>,
    pub last_ratio: Option<f64>,
    pub fitted_power: Option<f64>,
    /// Upper bound on every `⟨K_T^N y, y⟩` from a feedback keeping the dual
    /// inside the strictly invariant subspace, when one applies.
    pub certificate_bound: Option<f64>,
    pub heuristic: bool,
}

/// Least-squares slope of `log q` against `log N` over the last three points.
fn fitted_power(table: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = table[table.len().saturating_sub(3)..]
        .iter()
        .filter(|(_, q)| *q > 0.0)
        .map(|(n, q)| (n.ln(), q.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `E∫₀ᵀ Σᵢ νᵢ |Fᵢ Y|² dt` for the dual under `vᵢ = Fᵢ Y₋`, from the second
/// moment `M = E[YY*]`:
/// `M' = DM + MD* + Σᵢ νᵢ[(I+Fᵢ)M(I+Fᵢ)* − M]`, `D = −A* − Σᵢ νᵢ(Cᵢ*+I)Fᵢ`.
pub fn feedback_cost(cs: &ConstantSystem, feedback: &[DMatrix<f64>], y: &DVector<f64>, t_end: f64, dt: f64) -> f64 {
    let n = cs.n;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut d = -cs.a.transpose();
    for (m, f) in cs.marks.iter().zip(feedback) {
        d -= (m.c.transpose() + &eye) * f * m.weight;
    }
    let jumps: Vec<(f64, DMatrix<f64>, &DMatrix<f64>)> = cs
        .marks
        .iter()
        .zip(feedback)
        .map(|(m, f)| (m.weight, &eye + f, f))
        .collect();
    let mut rhs = |_t: f64, s: &DVector<f64>| {
        let m = DMatrix::from_column_slice(n, n, &s.as_slice()[..n * n]);
        let mut dm = &d * &m + &m * d.transpose();
        let mut cost = 0.0;
        for (w, jf, f) in &jumps {
            dm += (jf * &m * jf.transpose() - &m) * *w;
            cost += *w * (*f * &m * f.transpose()).trace();
        }
        let mut out = DVector::zeros(n * n + 1);
        out.as_mut_slice()[..n * n].copy_from_slice(dm.as_slice());
        out[n * n] = cost;
        out
    };
    let mut s = DVector::zeros(n * n + 1);
    s.as_mut_slice()[..n * n].copy_from_slice((y * y.transpose()).as_slice());
    let steps = step_count(t_end, dt);
    let h = t_end / steps.max(1) as f64;
    for i in 0..steps {
        s = rk4_step(&mut rhs, i as f64 * h, &s, h);
    }
    s[n * n]
}

/// Classifies `y` by the growth of `⟨K_T^N y, y⟩` in `N`.
pub fn viability_test(cs: &ConstantSystem, y: &DVector<f64>, opts: &ViabilityOptions) -> Result<ViabilityResult> {
    if opts.penalties.len() < 3 || opts.penalties.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "need at least three increasing penalties".into(),
        ));
    }
    let mut result = ViabilityResult {
        verdict: Viability::Indeterminate,
        rule: "between-thresholds",
        table: Vec::new(),
        last_ratio: None,
        fitted_power: None,
        certificate_bound: None,
        heuristic: true,
    };
    let ker = kernel(&cs.b.transpose(), opts.rank_tol);
    let ctol = containment_tol(opts.rank_tol);
    if !ker.contains_vector(y, ctol) {
        result.verdict = Viability::Nonviable;
        result.rule = "outside-kernel";
        return Ok(result);
    }
    if y.norm() == 0.0 {
        result.verdict = Viability::Viable;
        result.rule = "zero";
        result.table = opts.penalties.iter().map(|&p| (p, 0.0)).collect();
        return Ok(result);
    }
    let runs: Vec<Result<f64>> = opts
        .penalties
        .par_iter()
        .map(|&p| integrate_riccati_adaptive(cs, p, opts.t_end, opts.dt, opts.rank_tol).map(|r| r.quadratic_form(y)))
        .collect();
    for (p, q) in opts.penalties.iter().zip(runs) {
        result.table.push((*p, q?));
    }
    let len = result.table.len();
    let (q_prev, q_last) = (result.table[len - 2].1, result.table[len - 1].1);
    let ratio = if q_prev > 0.0 { q_last / q_prev } else { f64::INFINITY };
    result.last_ratio = Some(ratio);
    result.fitted_power = fitted_power(&result.table);

    let witness = crit_equiv_check(cs, opts.rank_tol).per_mode.remove(0).witness;
    if !witness.is_zero() && witness.contains_vector(y, ctol) {
        let (maps, residual) = solve_feedback(&[dual_constant(cs)], &witness, opts.rank_tol);
        if residual <= FEEDBACK_RESIDUAL_TOL {
            result.certificate_bound = Some(feedback_cost(cs, &maps[0], y, opts.t_end, opts.dt));
        }
    }

    if ratio <= 1.0 + opts.growth_tol {
        result.verdict = Viability::Viable;
        result.rule = "plateau";
    } else if result
        .certificate_bound
        .is_some_and(|b| result.table.iter().all(|(_, q)| *q <= b * (1.0 + 1e-6) + 1e-12))
    {
        result.verdict = Viability::Viable;
        result.rule = "certificate";
    } else if result.fitted_power.is_some_and(|p| p >= opts.power_threshold) {
        result.verdict = Viability::Nonviable;
        result.rule = "growth";
    }
    Ok(result)
}
