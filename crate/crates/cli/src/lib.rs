//! `switchctrl` command implementations. Each command returns an
//! [`Outcome`] so tests can drive it without spawning a process.

pub mod report;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::json;
use switchctrl_core::criteria::{feedback_witness, run_all};
use switchctrl_core::numeric::{is_positive, parse_vector};
use switchctrl_core::pdmp::{path_rng, sample_mode_path, simulate_dual, simulate_forward};
use switchctrl_core::riccati::{integrate_riccati_adaptive, runs_to_csv, viability_test, ViabilityOptions};
use switchctrl_core::subspace::kernel;
use switchctrl_core::synth::{piecewise_null_policy, ControlPolicy};
use switchctrl_core::{
    as_constant, mc, parse_spec, validate, DualControl, Error, SwitchSystem, Verdict, DEFAULT_RANK_TOL,
};

use report::Report;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAIL: u8 = 2;
pub const EXIT_UNDETERMINED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "switchctrl",
    version,
    about = "Controllability checks for Markov-switched linear systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every applicable criterion and report the overall verdict.
    Check {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one path (trajectory CSV) or many (Monte Carlo summary).
    Simulate {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Penalized Riccati runs and the viability test.
    Riccati {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Vector to test; defaults to every canonical basis vector of Ker B*.
        #[arg(long)]
        y: Option<String>,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long = "riccati-N-list", value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1000.0])]
        penalties: Vec<f64>,
        /// Riccati step; defaults to T·1e-4.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run the assertion bundle of a built-in example.
    VerifyExample {
        name: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long = "tol-rank", default_value_t = DEFAULT_RANK_TOL)]
    pub tol_rank: f64,
    #[arg(long, env = "SWITCHCTRL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, value_enum, default_value_t = Policy::Zero)]
    pub policy: Policy,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
    /// Restarts of the minimal-energy policy.
    #[arg(long = "N", default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Initial state, comma separated; defaults to e₁.
    #[arg(long)]
    pub x0: Option<String>,
    /// Initial dual state for `feedback-dual`; defaults to a witness vector.
    #[arg(long)]
    pub y: Option<String>,
    /// Initial mode id; defaults to the first mode.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Zero,
    MinEnergy,
    FeedbackDual,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

impl Outcome {
    fn error(message: impl std::fmt::Display) -> Self {
        Self {
            stderr: format!("error: {message}\n"),
            code: EXIT_ERROR,
            ..Self::default()
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Check { spec, common } => cmd_check(spec, common),
        Command::Simulate { spec, common, sim } => cmd_simulate(spec, common, sim),
        Command::Riccati {
            spec,
            common,
            y,
            t_end,
            penalties,
            dt,
        } => cmd_riccati(spec, common, y.as_deref(), *t_end, penalties, *dt),
        Command::VerifyExample { name, common, paths } => cmd_verify_example(name, common, *paths),
    };
    result.unwrap_or_else(|e| match e.downcast::<Refusal>() {
        Ok(r) => Outcome {
            stderr: format!("refused: {}\n", r.0),
            code: EXIT_FAIL,
            ..Outcome::default()
        },
        Err(e) => Outcome::error(format!("{e:#}")),
    })
}

/// A synthesis step declined the request; exits with the fail code.
#[derive(Debug)]
struct Refusal(String);

impl std::fmt::Display for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Refusal {}

/// Reads and validates a spec; violations are listed in the error.
pub fn load_system(path: &Path) -> anyhow::Result<SwitchSystem> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let system = parse_spec(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    let violations = validate(&system);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        bail!("{} is not a valid system:\n{}", path.display(), list.join("\n"));
    }
    Ok(system)
}

fn emit(common: &Common, text: String, code: u8) -> anyhow::Result<Outcome> {
    match &common.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            Ok(Outcome {
                code,
                ..Outcome::default()
            })
        }
        None => Ok(Outcome {
            stdout: text,
            code,
            ..Outcome::default()
        }),
    }
}

fn vector_arg(text: Option<&str>, n: usize, default: impl FnOnce() -> DVector<f64>) -> anyhow::Result<DVector<f64>> {
    let Some(text) = text else {
        return Ok(default());
    };
    let v = parse_vector(text).map_err(|e| anyhow!(e))?;
    if v.len() != n {
        bail!("vector `{text}` has length {}, expected {n}", v.len());
    }
    Ok(v)
}

pub fn cmd_check(spec: &Path, common: &Common) -> anyhow::Result<Outcome> {
    if common.format == Some(Format::Csv) {
        bail!("check only writes JSON");
    }
    let system = load_system(spec)?;
    let mut report = Report::new("check", &system, common.tol_rank, common.seed);
    let criteria = run_all(&system, common.tol_rank);
    let code = match criteria.overall.verdict {
        Verdict::Yes => EXIT_OK,
        Verdict::No => EXIT_FAIL,
        Verdict::Undetermined => EXIT_UNDETERMINED,
    };
    report.criteria = Some(criteria);
    emit(common, report.to_json(), code)
}

pub fn cmd_simulate(spec: &Path, common: &Common, sim: &SimArgs) -> anyhow::Result<Outcome> {
    let system = load_system(spec)?;
    let n = system.n;
    let g0 = match &sim.mode {
        Some(id) => system.mode_index(id).ok_or_else(|| Error::UnknownMode(id.clone()))?,
        None => 0,
    };
    if !is_positive(sim.t_end) || !is_positive(sim.dt) || sim.paths == 0 {
        bail!("T, dt and paths must be positive");
    }
    let x0 = vector_arg(sim.x0.as_deref(), n, || unit(n, 0))?;
    let format = common
        .format
        .unwrap_or(if sim.paths == 1 { Format::Csv } else { Format::Json });
    if sim.paths == 1 && format == Format::Json {
        bail!("a single path is written as CSV; use --paths > 1 for a JSON summary");
    }
    if sim.paths > 1 && format == Format::Csv {
        bail!("Monte Carlo summaries are JSON only");
    }

    let mut report = Report::new("simulate", &system, common.tol_rank, common.seed);
    report.param("policy", format!("{:?}", sim.policy).to_lowercase());
    report.param("T", sim.t_end);
    report.param("dt", sim.dt);
    report.param("paths", sim.paths);
    report.param("initial_mode", system.mode_id(g0));

    match sim.policy {
        Policy::Zero | Policy::MinEnergy => {
            report.param("x0", x0.as_slice());
            let policy = match sim.policy {
                Policy::Zero => ControlPolicy::Zero,
                _ => {
                    report.param("N", sim.restarts);
                    piecewise_null_policy(&system, sim.restarts, sim.t_end, common.tol_rank)
                        .map_err(|e| Refusal(e.to_string()))?
                }
            };
            if sim.paths == 1 {
                let path = sample_mode_path(&system, g0, sim.t_end, &mut path_rng(common.seed, 0));
                let traj = simulate_forward(&system, &x0, &policy, &path, sim.dt);
                return emit(common, traj.to_csv(&system), EXIT_OK);
            }
            let (section, code) = if sim.policy == Policy::Zero {
                let est =
                    mc::estimate_terminal_msq(&system, &x0, g0, &policy, sim.t_end, sim.paths, common.seed, sim.dt)?;
                (json!({ "terminal_mean_square": est }), EXIT_OK)
            } else {
                let r = mc::null_bound_check(
                    &system,
                    &x0,
                    g0,
                    sim.t_end,
                    &[sim.restarts],
                    sim.paths,
                    common.seed,
                    sim.dt,
                    common.tol_rank,
                )
                .map_err(|e| Refusal(e.to_string()))?;
                let code = if r.pass { EXIT_OK } else { EXIT_FAIL };
                (json!({ "null_bound": r }), code)
            };
            report.mc = Some(section);
            emit(common, report.to_json(), code)
        }
        Policy::FeedbackDual => {
            let witness = feedback_witness(&system, g0, common.tol_rank)
                .map_err(|e| Refusal(e.to_string()))?
                .ok_or_else(|| Refusal("V_inf is {0}: there is no feedback witness".into()))?;
            let y0 = vector_arg(sim.y.as_deref(), n, || {
                DVector::from_vec(witness.subspace.canonical_basis().remove(0))
            })?;
            report.param("y0", y0.as_slice());
            if sim.paths == 1 {
                let path = sample_mode_path(&system, g0, sim.t_end, &mut path_rng(common.seed, 0));
                let traj = simulate_dual(&system, &y0, &DualControl::Feedback(witness.maps), &path, sim.dt);
                return emit(common, traj.to_csv(&system), EXIT_OK);
            }
            let r = mc::witness_dual_check(&system, &witness, &y0, sim.t_end, sim.paths, common.seed, sim.dt);
            let pass = r.max_control_image <= 1e-6;
            report.mc = Some(json!({ "witness_dual": r, "feedback_residual": witness.residual, "pass": pass }));
            emit(common, report.to_json(), if pass { EXIT_OK } else { EXIT_FAIL })
        }
    }
}

fn unit(n: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[k] = 1.0;
    v
}

pub fn cmd_riccati(
    spec: &Path,
    common: &Common,
    y: Option<&str>,
    t_end: f64,
    penalties: &[f64],
    dt: Option<f64>,
) -> anyhow::Result<Outcome> {
    let system = load_system(spec)?;
    let cs = as_constant(&system)?;
    let mut opts = ViabilityOptions::new(t_end);
    opts.penalties = penalties.to_vec();
    opts.rank_tol = common.tol_rank;
    if let Some(dt) = dt {
        opts.dt = dt;
    }
    if common.format == Some(Format::Csv) {
        let runs = penalties
            .iter()
            .map(|&p| integrate_riccati_adaptive(&cs, p, t_end, opts.dt, opts.rank_tol))
            .collect::<Result<Vec<_>, _>>()?;
        return emit(common, runs_to_csv(&runs), EXIT_OK);
    }
    let ys: Vec<DVector<f64>> = match y {
        Some(_) => vec![vector_arg(y, system.n, || unit(system.n, 0))?],
        None => kernel(&cs.b.transpose(), opts.rank_tol)
            .canonical_basis()
            .into_iter()
            .map(DVector::from_vec)
            .collect(),
    };
    let mut rows = Vec::new();
    for y in &ys {
        let r = viability_test(&cs, y, &opts)?;
        rows.push(json!({ "y": y.as_slice(), "result": r }));
    }
    let mut report = Report::new("riccati", &system, common.tol_rank, common.seed);
    report.param("T", t_end);
    report.param("riccati_N_list", penalties);
    report.param("dt", opts.dt);
    report.riccati = Some(json!({ "options": opts, "tests": rows }));
    emit(common, report.to_json(), EXIT_OK)
}

pub fn cmd_verify_example(name: &str, common: &Common, paths: usize) -> anyhow::Result<Outcome> {
    let settings = verify::Settings {
        rank_tol: common.tol_rank,
        seed: common.seed,
        paths,
    };
    let Some(assertions) = verify::verify(name, &settings) else {
        bail!(
            "unknown example `{name}`; known: {}, cont-switch-bound",
            switchctrl_core::fixtures::NAMES.join(", ")
        );
    };
    let code = if assertions.iter().all(|a| a.pass) {
        EXIT_OK
    } else {
        EXIT_FAIL
    };
    let text = match common.format {
        Some(Format::Json) => {
            let mut s = serde_json::to_string_pretty(&json!({
                "example": name,
                "seed": common.seed,
                "paths": paths,
                "assertions": assertions,
            }))?;
            s.push('\n');
            s
        }
        Some(Format::Csv) => bail!("verify-example writes text or JSON"),
        None => assertions
            .iter()
            .map(|a| {
                let status = if a.pass { "PASS" } else { "FAIL" };
                if a.detail.is_empty() {
                    format!("{status} {}\n", a.name)
                } else {
                    format!("{status} {} ({})\n", a.name, a.detail)
                }
            })
            .collect(),
    };
    emit(common, text, code)
}
