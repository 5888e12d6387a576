//! End-to-end checks on the reference examples, the terminal bound, the
//! Riccati viability test and randomized property suites. Each test prints a
//! single PASS/FAIL line straight to stderr so it shows up without
//! `--nocapture`.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{dmatrix, dvector, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchctrl_core::criteria::{self, det_kalman, kalman_rank, nec1_check, nec2_check, suf1_check};
use switchctrl_core::pdmp::{
    path_rng, sample_mode_path, simulate_dual, simulate_forward_terminal, SegmentContext, SegmentControl,
};
use switchctrl_core::riccati::{viability_test, ViabilityOptions};
use switchctrl_core::subspace::{pseudoinverse, Subspace};
use switchctrl_core::synth::{min_energy_control, ControlPolicy};
use switchctrl_core::{as_constant, fixtures, mc, DualControl, Viability, DEFAULT_RANK_TOL as TOL};

// One check at a time so wall-clock timings are not shared.
static SERIAL: Mutex<()> = Mutex::new(());

struct Checks {
    failed: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failed: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failed.push(what.into());
        }
    }
}

fn run(id: &str, title: &str, limit: Duration, body: impl FnOnce(&mut Checks)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut checks = Checks::new();
    body(&mut checks);
    let elapsed = start.elapsed();
    checks.check(elapsed < limit, format!("runtime {elapsed:.2?} over {limit:?}"));
    let status = if checks.failed.is_empty() { "PASS" } else { "FAIL" };
    let detail = if checks.failed.is_empty() {
        String::new()
    } else {
        format!(" [{}]", checks.failed.join("; "))
    };
    let _ = writeln!(
        std::io::stderr(),
        "acceptance {id} {status}: {title} ({elapsed:.2?}){detail}"
    );
    assert!(checks.failed.is_empty(), "{title}: {:?}", checks.failed);
}

fn span(n: usize, axes: &[usize]) -> Subspace {
    Subspace::coordinate(n, axes)
}

#[test]
fn a1_nec1_not_det() {
    run("1", "nec1-not-det", Duration::from_secs(10), |c| {
        let s = fixtures::nec1_not_det();
        let v = nec1_check(&s, TOL);
        c.check(v.per_mode.iter().all(|m| m.pass), "nec1 fails a mode");
        c.check(
            kalman_rank(&DMatrix::zeros(2, 2), &s.modes[0].b0, TOL) == 1,
            "kalman rank",
        );
        let x0 = dvector![0.0, 1.0];
        let est = mc::estimate_terminal(&s, &x0, 0, &ControlPolicy::Zero, 1.0, 10_000, 0, 1e-3, |x| x[1]).unwrap();
        c.check(
            est.within(1.0, 3.0),
            format!("E[x2] = {} ± {}", est.mean, est.std_error),
        );
    });
}

#[test]
fn a2_nec1_det_not_nec2() {
    run("2", "nec1-det-not-nec2", Duration::from_secs(30), |c| {
        let s = fixtures::nec1_det_not_nec2();
        c.check(nec1_check(&s, TOL).overall, "nec1 fails");
        let dk = det_kalman(&s, TOL);
        c.check(dk.per_mode.iter().all(|m| m.kalman_rank == Some(2)), "kalman rank");
        let v = nec2_check(&s, TOL);
        c.check(!v.overall, "nec2 passes");
        for m in &v.per_mode {
            c.check(
                m.witness.dim() == 1 && m.witness.same_as(&span(2, &[1]), 1e-9),
                "V_inf is not span(e2)",
            );
        }

        let f = dmatrix![-2.0, 0.0; 0.0, -2.0];
        let control = DualControl::Feedback(BTreeMap::from([((0, 1), f.clone()), ((1, 0), f)]));
        let mut worst = 0.0f64;
        for i in 0..100 {
            let path = sample_mode_path(&s, 0, 1.0, &mut path_rng(11, i));
            let traj = simulate_dual(&s, &dvector![0.0, 1.0], &control, &path, 1e-4);
            for ((t, y), side) in traj.grid.iter().zip(&traj.states).zip(&traj.sides) {
                let before = path.jump_times.iter().filter(|&&j| j < *t).count()
                    + usize::from(*side == switchctrl_core::pdmp::Side::Post);
                let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
                let exact = dvector![0.0, sign * (2.0 * t).exp()];
                worst = worst.max((y - exact).norm());
            }
        }
        c.check(worst <= 1e-6, format!("dual deviates by {worst:.3e}"));
    });
}

#[test]
fn a3_nec2_det_not_nec1() {
    run("3", "nec2-det-not-nec1", Duration::from_secs(1), |c| {
        let s = fixtures::nec2_det_not_nec1();
        let v = nec1_check(&s, TOL);
        c.check(v.per_mode[0].witness.same_as(&span(3, &[2]), 1e-9), "mode 0 witness");
        c.check(v.per_mode[1].witness.same_as(&span(3, &[1]), 1e-9), "mode 1 witness");
        c.check(!v.overall && !v.per_mode[0].pass, "nec1 passes");
        let v2 = nec2_check(&s, TOL);
        c.check(
            v2.overall && v2.per_mode.iter().all(|m| m.witness.is_zero()),
            "V_inf nonzero",
        );
        let dk = det_kalman(&s, TOL);
        c.check(dk.per_mode.iter().all(|m| m.kalman_rank == Some(3)), "kalman rank");
    });
}

#[test]
fn a4_ctrl_not_suf1() {
    run("4", "ctrl-not-suf1", Duration::from_secs(1), |c| {
        let s = fixtures::ctrl_not_suf1();
        let cs = as_constant(&s).unwrap();
        let eq = criteria::crit_equiv_check(&cs, TOL);
        c.check(eq.overall && eq.per_mode[0].witness.is_zero(), "crit_equiv fails");
        let v = suf1_check(&s, TOL);
        c.check(!v.overall, "suf1 passes");
        c.check(
            v.per_mode.iter().any(|m| m.witness.contains(&span(3, &[2]), 1e-7)),
            "suf1 witness misses e3",
        );
    });
}

#[test]
fn a5_continuous_switching_bound() {
    run(
        "5",
        "continuous-switching terminal bound",
        Duration::from_secs(60),
        |c| {
            let s = fixtures::cont_switch_bound();
            let r =
                mc::null_bound_check(&s, &dvector![1.0, 0.0], 0, 1.0, &[1, 2, 4, 8, 16], 10_000, 0, 1e-3, TOL).unwrap();
            c.check(r.commuting, "commuting hypothesis");
            for row in &r.rows {
                c.check(
                    row.pass,
                    format!(
                        "N={} estimate {} > bound {}",
                        row.n_restarts, row.estimate.mean, row.bound
                    ),
                );
            }
            c.check(r.monotone, "estimates increase with N");
        },
    );
}

#[test]
fn a6_riccati_viability() {
    run("6", "Riccati viability", Duration::from_secs(120), |c| {
        let opts = ViabilityOptions::new(1.0);
        let cs = as_constant(&fixtures::nec1_det_not_nec2()).unwrap();
        let r = viability_test(&cs, &dvector![0.0, 1.0], &opts).unwrap();
        c.check(
            r.verdict == Viability::Viable,
            format!("e2 on fixture 2: {:?} via {}", r.verdict, r.rule),
        );
        let cs = as_constant(&fixtures::ctrl_not_suf1()).unwrap();
        let r = viability_test(&cs, &dvector![0.0, 0.0, 1.0], &opts).unwrap();
        c.check(
            r.verdict == Viability::Nonviable,
            format!("e3 on fixture 4: {:?} via {}", r.verdict, r.rule),
        );
        c.check(
            r.fitted_power.is_some_and(|p| p >= 0.5),
            format!("fitted power {:?}", r.fitted_power),
        );
    });
}

#[test]
fn a7_property_suites() {
    run("7", "property suites", Duration::from_secs(120), |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        // (a) unobservable subspace against the iterative fixed point.
        for i in 0..100 {
            let n = rng.gen_range(1..=5);
            let d = rng.gen_range(1..=n);
            let m = common::sparse_int(&mut rng, n, n, 0.6);
            let bs = common::sparse_int(&mut rng, d, n, 0.6);
            let a = criteria::unobservable_subspace(&m, &bs, TOL);
            let b = criteria::unobservable_by_iteration(&m, &bs, TOL);
            c.check(a.same_as(&b, 1e-7), format!("(a) case {i}"));
        }

        // (b) suf1 implies nec1 and nec2.
        let mut suf1_passes = 0;
        for i in 0..500 {
            let n = rng.gen_range(1..=4);
            let d = rng.gen_range(1..=n);
            let e = rng.gen_range(1..=3);
            let s = common::random_system(&mut rng, n, d, e, |r, a, b| common::sparse_int(r, a, b, 0.6), i < 250);
            if suf1_check(&s, TOL).overall {
                suf1_passes += 1;
                c.check(
                    nec1_check(&s, TOL).overall && nec2_check(&s, TOL).overall,
                    format!("(b) case {i}"),
                );
            }
        }
        c.check(suf1_passes >= 50, format!("(b) only {suf1_passes} suf1 passes"));

        // (c) duality identity.
        for i in 0..20 {
            let n = rng.gen_range(1..=3);
            let d = rng.gen_range(1..=n);
            let e = rng.gen_range(2..=3);
            let s = common::random_system(&mut rng, n, d, e, common::uniform, true);
            let x0 = common::uniform_vec(&mut rng, n);
            let y0 = common::uniform_vec(&mut rng, n);
            let policy = ControlPolicy::Constant(common::uniform_vec(&mut rng, d));
            let mut maps = BTreeMap::new();
            for &edge in s.c.keys() {
                maps.insert(edge, common::uniform(&mut rng, n, n) * 0.5);
            }
            let v = DualControl::Feedback(maps);
            let r = mc::duality_check(&s, &x0, &y0, 0, &policy, &v, 1.0, 1000, i, 1e-2).unwrap();
            c.check(
                r.pass,
                format!(
                    "(c) case {i}: defect {} vs {} (tol {})",
                    r.defect.mean, r.expected, r.tolerance
                ),
            );
        }

        // (d) Moore-Penrose conditions, including rank-deficient matrices.
        for i in 0..100 {
            let r = rng.gen_range(1..=5);
            let cc = rng.gen_range(1..=5);
            let k = rng.gen_range(1..=r.min(cc));
            let m = common::uniform(&mut rng, r, k) * common::uniform(&mut rng, k, cc);
            let p = pseudoinverse(&m, TOL);
            let errs = [
                (&m * &p * &m - &m).norm() / m.norm().max(1.0),
                (&p * &m * &p - &p).norm() / p.norm().max(1.0),
                ((&m * &p).transpose() - &m * &p).norm(),
                ((&p * &m).transpose() - &p * &m).norm(),
            ];
            let worst = errs.iter().copied().fold(0.0, f64::max);
            c.check(worst <= 1e-9, format!("(d) case {i}: {errs:?}"));
        }

        // (e) exact steering by the minimal-energy control.
        let mut cases = 0;
        let mut attempts = 0;
        while cases < 50 && attempts < 1000 {
            attempts += 1;
            let n = rng.gen_range(1..=4);
            let d = rng.gen_range(1..=n);
            let s = common::random_system(&mut rng, n, d, 1, common::uniform, false);
            let y = common::uniform_vec(&mut rng, n);
            let Ok(ctl) = min_energy_control(&s, 0, &y, 1.0, TOL) else {
                continue;
            };
            if ctl.condition > 1e6 {
                continue;
            }
            cases += 1;
            let seg = ctl.segment();
            let planner = move |_: &SegmentContext<'_>| -> SegmentControl { seg.clone() };
            let path = switchctrl_core::ModePath::constant(0, 1.0);
            let x = simulate_forward_terminal(&s, &y, &planner, &path, 1e-3);
            c.check(
                x.norm() <= 1e-8 * y.norm(),
                format!("(e) residual {:.3e} for |y| {:.3}", x.norm(), y.norm()),
            );
        }
        c.check(cases == 50, format!("(e) only {cases} well-conditioned pairs"));
    });
}
