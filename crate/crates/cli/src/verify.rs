//! Assertion bundles for the built-in examples.

use std::collections::BTreeMap;

use nalgebra::{dmatrix, dvector};
use serde::Serialize;
use switchctrl_core::criteria::{self, det_kalman, feedback_witness, nec1_check, nec2_check, run_all, suf1_check};
use switchctrl_core::pdmp::{path_rng, sample_mode_path, simulate_dual, Side};
use switchctrl_core::synth::ControlPolicy;
use switchctrl_core::{as_constant, fixtures, mc, DualControl, Overall, Subspace, SwitchSystem, Verdict};

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub struct Settings {
    pub rank_tol: f64,
    pub seed: u64,
    pub paths: usize,
}

struct Bundle {
    out: Vec<Assertion>,
}

impl Bundle {
    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.out.push(Assertion {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
    }
}

fn span(n: usize, axes: &[usize]) -> Subspace {
    Subspace::coordinate(n, axes)
}

fn verdict_text(o: &Overall) -> String {
    let v = serde_json::to_value(o.verdict).unwrap_or_default();
    format!("{} via {}", v.as_str().unwrap_or("?"), o.deciding.unwrap_or("none"))
}

fn dims(s: &Subspace) -> String {
    format!("dim {}", s.dim())
}

/// Runs the bundle for a named example; `None` for an unknown name.
pub fn verify(name: &str, settings: &Settings) -> Option<Vec<Assertion>> {
    let system = fixtures::by_name(name)?;
    let mut b = Bundle { out: Vec::new() };
    let tol = settings.rank_tol;
    match name {
        "nec1-not-det" => nec1_not_det(&system, settings, &mut b),
        "nec1-det-not-nec2" => nec1_det_not_nec2(&system, settings, &mut b),
        "nec2-det-not-nec1" => nec2_det_not_nec1(&system, tol, &mut b),
        "ctrl-not-suf1" => ctrl_not_suf1(&system, tol, &mut b),
        _ => cont_switch_bound(&system, settings, &mut b),
    }
    Some(b.out)
}

fn nec1_not_det(s: &SwitchSystem, st: &Settings, b: &mut Bundle) {
    let tol = st.rank_tol;
    let v = nec1_check(s, tol);
    b.check("nec1 passes at both modes", v.per_mode.iter().all(|m| m.pass), "");
    let rank = criteria::kalman_rank(&s.modes[0].a, &s.modes[0].b0, tol);
    b.check("Kalman rank of (0, B0) is 1", rank == 1, format!("rank {rank}"));
    let suf = suf1_check(s, tol);
    let w = &suf.per_mode[0].witness;
    b.check("suf1 witness is span(e2)", w.same_as(&span(2, &[1]), 1e-9), dims(w));
    let r = run_all(s, tol);
    b.check(
        "overall verdict is no",
        r.overall.verdict == Verdict::No,
        verdict_text(&r.overall),
    );
    match mc::estimate_terminal(
        s,
        &dvector![0.0, 1.0],
        0,
        &ControlPolicy::Zero,
        1.0,
        st.paths,
        st.seed,
        1e-3,
        |x| x[1],
    ) {
        Ok(est) => b.check(
            "E[x2(T)] = 1 within 3 sigma",
            est.within(1.0, 3.0),
            format!("{:.6} ± {:.6}", est.mean, est.std_error),
        ),
        Err(e) => b.check("E[x2(T)] = 1 within 3 sigma", false, e.to_string()),
    }
}

fn nec1_det_not_nec2(s: &SwitchSystem, st: &Settings, b: &mut Bundle) {
    let tol = st.rank_tol;
    let dk = det_kalman(s, tol);
    b.check(
        "Kalman rank 2 at both modes",
        dk.per_mode.iter().all(|m| m.kalman_rank == Some(2)),
        "",
    );
    b.check("nec1 passes", nec1_check(s, tol).overall, "");
    let v = nec2_check(s, tol);
    let w = &v.per_mode[0].witness;
    b.check(
        "V_inf is span(e2)",
        !v.overall && w.same_as(&span(2, &[1]), 1e-9),
        dims(w),
    );

    let f = dmatrix![-2.0, 0.0; 0.0, -2.0];
    let control = DualControl::Feedback(BTreeMap::from([((0, 1), f.clone()), ((1, 0), f)]));
    let paths = st.paths.min(100);
    let mut worst = 0.0f64;
    for i in 0..paths as u64 {
        let path = sample_mode_path(s, 0, 1.0, &mut path_rng(st.seed, i));
        let traj = simulate_dual(s, &dvector![0.0, 1.0], &control, &path, 1e-4);
        let mut jumps = 0;
        for ((t, y), side) in traj.grid.iter().zip(&traj.states).zip(&traj.sides) {
            if *side == Side::Post {
                jumps += 1;
            }
            let sign = if jumps % 2 == 0 { 1.0 } else { -1.0 };
            worst = worst.max((y - dvector![0.0, sign * (2.0 * t).exp()]).norm());
        }
    }
    b.check(
        "dual under v = -2Y matches closed form within 1e-6",
        worst <= 1e-6,
        format!("max deviation {worst:.3e} over {paths} paths"),
    );
    match feedback_witness(s, 0, tol) {
        Ok(Some(w)) => {
            let r = mc::witness_dual_check(s, &w, &dvector![0.0, 1.0], 1.0, paths.max(2), st.seed, 1e-3);
            b.check(
                "witness dual stays in Ker B*",
                r.max_control_image <= 1e-6,
                format!("max |B*Y| {:.3e}", r.max_control_image),
            );
        }
        other => b.check("witness dual stays in Ker B*", false, format!("{other:?}")),
    }
}

fn nec2_det_not_nec1(s: &SwitchSystem, tol: f64, b: &mut Bundle) {
    let v = nec1_check(s, tol);
    let w0 = &v.per_mode[0].witness;
    let w1 = &v.per_mode[1].witness;
    b.check(
        "mode 0 strict witness is span(e3)",
        w0.same_as(&span(3, &[2]), 1e-9),
        dims(w0),
    );
    b.check(
        "mode 1 strict witness is span(e2)",
        w1.same_as(&span(3, &[1]), 1e-9),
        dims(w1),
    );
    b.check("nec1 fails with witness span(e3)", !v.per_mode[0].pass, "");
    let v2 = nec2_check(s, tol);
    b.check("V_inf is {0}", v2.overall, "");
    let dk = det_kalman(s, tol);
    b.check(
        "Kalman rank 3 at both modes",
        dk.per_mode.iter().all(|m| m.kalman_rank == Some(3)),
        "",
    );
}

fn ctrl_not_suf1(s: &SwitchSystem, tol: f64, b: &mut Bundle) {
    match as_constant(s) {
        Ok(cs) => {
            let v = criteria::crit_equiv_check(&cs, tol);
            b.check("V0 is {0}", v.overall, dims(&v.per_mode[0].witness));
        }
        Err(e) => b.check("V0 is {0}", false, e.to_string()),
    }
    let v = suf1_check(s, tol);
    let w = &v.per_mode[0].witness;
    b.check(
        "suf1 fails with witness containing e3",
        !v.overall && w.contains(&span(3, &[2]), 1e-7),
        dims(w),
    );
    let r = run_all(s, tol);
    b.check(
        "overall verdict is yes via crit_equiv",
        r.overall.verdict == Verdict::Yes && r.overall.deciding == Some("crit_equiv"),
        verdict_text(&r.overall),
    );
}

fn cont_switch_bound(s: &SwitchSystem, st: &Settings, b: &mut Bundle) {
    let x0 = dvector![1.0, 0.0];
    match mc::null_bound_check(s, &x0, 0, 1.0, &[1, 2, 4, 8, 16], st.paths, st.seed, 1e-3, st.rank_tol) {
        Ok(r) => {
            b.check("commuting hypothesis holds", r.commuting, "");
            for row in &r.rows {
                b.check(
                    &format!("N = {} within bound", row.n_restarts),
                    row.pass,
                    format!(
                        "{:.4e} ± {:.1e} vs {:.4e}",
                        row.estimate.mean, row.estimate.std_error, row.bound
                    ),
                );
            }
            b.check("estimates nonincreasing in N", r.monotone, "");
        }
        Err(e) => b.check("restart policy available", false, e.to_string()),
    }
}
