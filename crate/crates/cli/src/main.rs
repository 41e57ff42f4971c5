//! `avgrl` command line. Exit codes: 0 all checks pass, 1 certificate
//! violation, 2 usage or structural error, 3 numerical or convergence error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use avgrl_core::api::{
    run_api, run_discounted_api, ApiConfig, CertificateSummary, ErrorInjector, EvaluationMethod,
    InjectorMode, DEFAULT_SLACK,
};
use avgrl_core::harness::{
    generate_gridworld, generate_random_mdp, run_experiment, verify_trace, AnyTrace, ExperimentConfig,
    RandomMdpSpec, DEFAULT_MIX_EPS,
};
use avgrl_core::mdp::{optimal_solution, solve_bellman, Mdp, StochasticPolicy};
use avgrl_core::regret::{ledger_from_trace, loglog_slope, pseudo_regret_bound};
use avgrl_core::rl::{
    run_policy_based, FeatureMap, InitialQ, PolicyUpdateRule, RlConfig, RlEvaluation, TdConfig, UpdateKind,
};
use avgrl_core::transforms::standard_pipeline;
use avgrl_core::{Error, ErrorClass};

mod exit {
    pub const VIOLATION: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
}

#[derive(Parser)]
#[command(name = "avgrl", version, about = "Average-reward MDP toolkit: solvers, approximate policy iteration, TD(lambda) and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal gain, policy and bias of an MDP, or the evaluation of a given policy.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        /// Anchor state for the bias (h(anchor) = 0).
        #[arg(long, default_value_t = 0)]
        anchor: usize,
        /// Policy file (JSON array of rows) to evaluate instead of optimizing.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Write the result as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply exploration mixing and/or the aperiodicity transform.
    Transform {
        #[arg(long)]
        mdp: PathBuf,
        /// Exploration mixing weight in (0, 1).
        #[arg(long)]
        eps: Option<f64>,
        /// Aperiodicity (Schweitzer) parameter in (0, 1).
        #[arg(long)]
        kappa: Option<f64>,
        /// Transformed MDP; the transform records go to `<out>.transforms.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Approximate policy iteration with injected errors (discounted variant with --alpha).
    ApiRun {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Mode::None)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        anchor: usize,
        /// Evaluate by relative value iteration instead of a linear solve.
        #[arg(long)]
        rvi: bool,
        /// Run the discounted algorithm with this discount factor instead.
        #[arg(long)]
        alpha: Option<f64>,
        /// Trace file (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Certificate summary (JSON).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Policy-based learning: TD(lambda) evaluation and a policy-update rule.
    RlRun {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, value_enum)]
        rule: Rule,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 10_000)]
        tau: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = TdConfig::default().c1)]
        c1: f64,
        #[arg(long, default_value_t = TdConfig::default().c2)]
        c2: f64,
        /// `tabular` or a feature file.
        #[arg(long, default_value = "tabular")]
        features: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Anchor state-action pair, flat index s*|A|+a.
        #[arg(long, default_value_t = 0)]
        anchor: usize,
        /// Evaluate each policy exactly instead of by TD.
        #[arg(long)]
        exact: bool,
        /// Target the aperiodicity transform with this kappa, sampling the given model.
        #[arg(long)]
        lazify: Option<f64>,
        /// Start from Q_0 = 0 instead of evaluating the uniform policy.
        #[arg(long)]
        zero_start: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Pseudo regret and its bound for rl-run traces, as CSV.
    Regret {
        /// TD error constant (from a single-policy fit).
        #[arg(long)]
        c_hat: f64,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Replay a trace file through every applicable certificate.
    Verify {
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        tol: f64,
    },
    /// Emit instance files.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run a batch experiment from a JSON config.
    Experiment { config: PathBuf },
}

#[derive(Subcommand)]
enum GenKind {
    /// Random MDP with Gamma-normalized rows, exploration-mixed.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        concentration: f64,
        #[arg(long, default_value_t = 0.0)]
        reward_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        reward_hi: f64,
        #[arg(long, default_value_t = DEFAULT_MIX_EPS)]
        mix_eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Four-action gridworld with lateral slip.
    Grid {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 0.0)]
        slip: f64,
        /// Comma-separated reward per cell, row-major.
        #[arg(long)]
        rewards: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    None,
    Worst,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Greedy,
    Softmax,
    Mirror,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Structural => exit::USAGE,
            ErrorClass::Numerical => exit::NUMERICAL,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: exit::USAGE, message: message.into() }
}

type Outcome = Result<bool, Failure>;

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn to_json<S: serde::Serialize>(v: &S) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

fn report(summary: &CertificateSummary, path: Option<&Path>) -> Outcome {
    for f in &summary.families {
        let status = if f.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<16} {status}  checked {:>5}  violations {:>3}  min slack {:.3e}",
            f.family,
            f.checked,
            f.violations.len(),
            f.min_slack
        );
    }
    if let Some(v) = summary.first_violation() {
        println!("first violation: row {} `{}`: lhs {:e} rhs {:e}", v.k, v.inequality, v.lhs, v.rhs);
    }
    if let Some(p) = path {
        write_text(p, &to_json(summary))?;
    }
    Ok(summary.passed())
}

fn load_mdp(path: &Path) -> Result<Mdp<f64>, Failure> {
    Ok(Mdp::load(path)?)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve { mdp, anchor, policy, out } => {
            let m = load_mdp(&mdp)?;
            if anchor >= m.n_states() {
                return Err(usage(format!("--anchor {anchor} is out of range for {} states", m.n_states())));
            }
            let value = match policy {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                    let rows: Vec<Vec<f64>> =
                        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                    let ev = solve_bellman(&m, &StochasticPolicy::new(rows)?, anchor)?;
                    serde_json::json!({ "gain": ev.gain, "bias": ev.bias, "stationary": ev.stationary })
                }
                None => {
                    let opt = optimal_solution(&m, anchor)?;
                    serde_json::json!({
                        "gain": opt.gain, "actions": opt.actions, "bias": opt.bias, "method": opt.method
                    })
                }
            };
            match out {
                Some(p) => write_text(&p, &to_json(&value))?,
                None => print!("{}", to_json(&value)),
            }
            Ok(true)
        }
        Command::Transform { mdp, eps, kappa, out } => {
            if eps.is_none() && kappa.is_none() {
                return Err(usage("transform needs --eps and/or --kappa"));
            }
            let (t, records) = standard_pipeline(&load_mdp(&mdp)?, eps, kappa)?;
            t.save(&out)?;
            let side = PathBuf::from(format!("{}.transforms.json", out.display()));
            write_text(&side, &to_json(&records))?;
            println!("wrote {} and {}", out.display(), side.display());
            Ok(true)
        }
        Command::ApiRun { mdp, eps, delta, mode, seed, iters, anchor, rvi, alpha, out, summary } => {
            let m = load_mdp(&mdp)?;
            let mode = match mode {
                Mode::None => InjectorMode::None,
                Mode::Worst => InjectorMode::WorstWithinBudget,
                Mode::Random => InjectorMode::RandomWithinBudget,
            };
            let inj = ErrorInjector { improvement_eps: eps, evaluation_delta: delta, mode, seed };
            let trace = match alpha {
                Some(a) => AnyTrace::Discounted(run_discounted_api(&m, &vec![0.0; m.n_states()], a, &inj, iters)?),
                None => {
                    let evaluation = if rvi { EvaluationMethod::RelativeValueIteration } else { EvaluationMethod::Direct };
                    let cfg = ApiConfig { iterations: iters, anchor, evaluation };
                    AnyTrace::Api(run_api(&m, &vec![0.0; m.n_states()], &inj, &cfg)?)
                }
            };
            trace.save(&out)?;
            println!("wrote {}", out.display());
            report(&verify_trace(&trace, DEFAULT_SLACK)?, summary.as_deref())
        }
        Command::RlRun {
            mdp, rule, beta, tau, iters, lambda, c1, c2, features, seed, anchor, exact, lazify, zero_start, out, summary,
        } => {
            let m = load_mdp(&mdp)?;
            let f = if features == "tabular" { FeatureMap::tabular(m.n_pairs()) } else { FeatureMap::load(&features)? };
            let kind = match rule {
                Rule::Greedy => UpdateKind::Greedy,
                Rule::Softmax => UpdateKind::Softmax,
                Rule::Mirror => UpdateKind::MirrorDescent,
            };
            let cfg = RlConfig {
                rule: PolicyUpdateRule { kind, beta },
                td: TdConfig { lambda, c1, c2, ..TdConfig::default() },
                tau,
                iterations: iters,
                anchor,
                seed,
                evaluation: if exact { RlEvaluation::Exact } else { RlEvaluation::Td },
                lazify,
                initial_q: if zero_start { InitialQ::Zero } else { InitialQ::Evaluate },
            };
            let t = run_policy_based(&m, &f, &cfg)?;
            println!("J* = {:.6}, final gap J* - J = {:.3e}", t.meta.j_star, t.final_gap());
            let trace = AnyTrace::Rl(t);
            trace.save(&out)?;
            println!("wrote {}", out.display());
            report(&verify_trace(&trace, DEFAULT_SLACK)?, summary.as_deref())
        }
        Command::Regret { c_hat, out, traces } => {
            let mut csv = String::from("trace,K,tau,pseudo_regret,bound,slack\n");
            let mut points = Vec::new();
            let mut ok = true;
            for p in &traces {
                let AnyTrace::Rl(t) = AnyTrace::load(p)? else {
                    return Err(usage(format!("{}: not an rl-run trace", p.display())));
                };
                let led = ledger_from_trace(&t)?;
                if led.horizon_k == 0 {
                    return Err(usage(format!("{}: trace has no charged iterations", p.display())));
                }
                let bound = pseudo_regret_bound(
                    led.horizon_k,
                    led.tau,
                    t.meta.gamma,
                    t.meta.c0.max(0.0),
                    t.meta.delta0_bar,
                    t.omega_min(),
                    c_hat,
                )?;
                let slack = bound - led.pseudo_regret;
                ok &= slack >= 0.0;
                csv.push_str(&format!(
                    "{},{},{},{:e},{:e},{:e}\n",
                    p.display(),
                    led.horizon_k,
                    led.tau,
                    led.pseudo_regret,
                    bound,
                    slack
                ));
                if led.pseudo_regret > 0.0 {
                    points.push((led.horizon_k as f64, led.pseudo_regret));
                }
            }
            match loglog_slope(&points) {
                Ok(s) => csv.push_str(&format!("# slope,{s:.6},points,{}\n", points.len())),
                Err(_) => csv.push_str("# slope,nan\n"),
            }
            match out {
                Some(p) => write_text(&p, &csv)?,
                None => print!("{csv}"),
            }
            Ok(ok)
        }
        Command::Verify { trace, tol } => {
            let t = AnyTrace::load(&trace)?;
            report(&verify_trace(&t, tol)?, None)
        }
        Command::Gen { kind } => {
            let (m, out) = match kind {
                GenKind::Random { states, actions, seed, concentration, reward_lo, reward_hi, mix_eps, out } => {
                    let spec = RandomMdpSpec {
                        n_states: states,
                        n_actions: actions,
                        concentration,
                        reward_lo,
                        reward_hi,
                        seed,
                        mix_eps,
                    };
                    (generate_random_mdp::<f64>(&spec)?, out)
                }
                GenKind::Grid { width, height, slip, rewards, out } => {
                    let r: Vec<f64> = rewards
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| usage(format!("--rewards: {e}")))?;
                    (generate_gridworld::<f64>(width, height, slip, &r)?, out)
                }
            };
            m.save(&out)?;
            println!("wrote {} ({})", out.display(), m.content_hash());
            Ok(true)
        }
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let b = run_experiment(&cfg)?;
            for f in &b.manifest.failed_seeds {
                eprintln!("seed {} failed: {}", f.seed, f.error);
            }
            if let Some(r) = &b.regret {
                let s = r.slope.map_or("n/a".to_string(), |s| format!("{s:.3}"));
                println!("regret slope {s} over {} runs", r.runs.len());
            }
            println!(
                "{}: {} files in {}, {} violations",
                b.manifest.name,
                b.manifest.files.len(),
                b.output_dir.display(),
                b.violations()
            );
            if !b.manifest.complete {
                return Err(Failure { code: exit::NUMERICAL, message: "some seeds failed".into() });
            }
            Ok(b.violations() == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(exit::VIOLATION),
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(exit::NUMERICAL),
    }
}
