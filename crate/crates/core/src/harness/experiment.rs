//! Experiment configuration and batch orchestration. One run writes a
//! directory holding the instance, one JSON-lines trace per seed, CSV
//! summaries and a manifest with the SHA-256 of every file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_gridworld, generate_random_mdp, RandomMdpSpec};
use super::trace::{sha256_hex, verify_trace, AnyTrace};
use crate::api::{
    check_assumption, run_api, run_discounted_api, ApiConfig, CertificateSummary, ErrorInjector,
    EvaluationMethod, InjectorMode, DEFAULT_SLACK,
};
use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::regret::{loglog_slope, plan_regret, run_regret, RegretPlan, RegretRun, DEFAULT_C_HAT_TAUS};
use crate::rl::{
    run_policy_based, FeatureMap, InitialQ, PolicyUpdateRule, RlConfig, RlEvaluation, TdConfig,
};
use crate::transforms::standard_pipeline;

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Random(RandomMdpSpec),
    Gridworld {
        width: usize,
        height: usize,
        slip: f64,
        /// One reward per cell, row-major.
        rewards: Vec<f64>,
    },
    File {
        path: PathBuf,
    },
}

/// Exploration mixing weight and aperiodicity κ, applied in that order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformSpec {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
}

fn default_c_hat_taus() -> Vec<usize> {
    DEFAULT_C_HAT_TAUS.to_vec()
}

fn default_c_hat_seeds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Api {
        eps: f64,
        delta: f64,
        mode: InjectorMode,
        iterations: usize,
        #[serde(default)]
        anchor: usize,
        #[serde(default)]
        evaluation: EvaluationMethod,
    },
    Discounted {
        alpha: f64,
        eps: f64,
        delta: f64,
        mode: InjectorMode,
        iterations: usize,
    },
    Rl {
        rule: PolicyUpdateRule,
        #[serde(default)]
        td: TdConfig,
        tau: usize,
        iterations: usize,
        #[serde(default)]
        anchor: usize,
        #[serde(default)]
        evaluation: RlEvaluation,
        #[serde(default)]
        lazify: Option<f64>,
        #[serde(default)]
        initial_q: InitialQ,
        /// Feature file; tabular features when absent.
        #[serde(default)]
        features: Option<PathBuf>,
    },
    Regret {
        k_values: Vec<usize>,
        #[serde(default)]
        td: TdConfig,
        #[serde(default)]
        anchor: usize,
        #[serde(default = "default_c_hat_taus")]
        c_hat_taus: Vec<usize>,
        /// Seeds `0..c_hat_seeds` feed the `Ĉ` fit.
        #[serde(default = "default_c_hat_seeds")]
        c_hat_seeds: usize,
        #[serde(default)]
        features: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub instance: InstanceSpec,
    #[serde(default)]
    pub transforms: TransformSpec,
    pub algorithm: AlgorithmSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::json("experiment config", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != EXPERIMENT_SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!(
                "experiment schema version {} is not supported (expected {EXPERIMENT_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Domain("experiment needs at least one seed".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Domain("experiment seeds must be distinct".into()));
        }
        let mut files: Vec<&PathBuf> = Vec::new();
        if let InstanceSpec::File { path } = &self.instance {
            files.push(path);
        }
        match &self.algorithm {
            AlgorithmSpec::Rl { features: Some(p), .. } | AlgorithmSpec::Regret { features: Some(p), .. } => {
                files.push(p)
            }
            AlgorithmSpec::Regret { k_values, .. } if k_values.len() < 2 => {
                return Err(Error::Domain("regret experiments need at least two K values".into()))
            }
            _ => {}
        }
        for p in files {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }

    /// The transformed instance every seed runs on.
    pub fn build_instance(&self) -> Result<Mdp<f64>> {
        let base = match &self.instance {
            InstanceSpec::Random(spec) => generate_random_mdp(spec)?,
            InstanceSpec::Gridworld { width, height, slip, rewards } => {
                generate_gridworld(*width, *height, *slip, rewards)?
            }
            InstanceSpec::File { path } => Mdp::load(path)?,
        };
        Ok(standard_pipeline(&base, self.transforms.eps, self.transforms.kappa)?.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub config: ExperimentConfig,
    pub instance_hash: String,
    pub files: Vec<ManifestEntry>,
    pub failed_seeds: Vec<SeedFailure>,
    /// False when any seed failed.
    pub complete: bool,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub seed: u64,
    pub trace: String,
    pub family: String,
    pub checked: usize,
    pub violations: usize,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretFit {
    pub plan: RegretPlan,
    /// `(mean K, mean pseudo regret)` per configured K.
    pub points: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub runs: Vec<RegretRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBundle {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub families: Vec<FamilyRow>,
    pub regret: Option<RegretFit>,
}

impl ExperimentBundle {
    pub fn violations(&self) -> usize {
        let cert: usize = self.families.iter().map(|f| f.violations).sum();
        let regret = self.regret.as_ref().map_or(0, |r| r.runs.iter().filter(|x| x.slack() < 0.0).count());
        cert + regret
    }
}

struct SeedResult {
    seed: u64,
    traces: Vec<(String, AnyTrace)>,
    certificates: Vec<(String, CertificateSummary)>,
    /// `J* − J_{μ_{k+1}}` per row of the first trace.
    gaps: Vec<f64>,
    regret: Vec<RegretRun>,
}

fn load_features(path: &Option<PathBuf>, n_pairs: usize) -> Result<FeatureMap<f64>> {
    match path {
        Some(p) => FeatureMap::load(p),
        None => Ok(FeatureMap::tabular(n_pairs)),
    }
}

fn run_seed(
    config: &ExperimentConfig,
    mdp: &Mdp<f64>,
    plan: Option<&RegretPlan>,
    seed: u64,
) -> Result<SeedResult> {
    let mut out = SeedResult { seed, traces: vec![], certificates: vec![], gaps: vec![], regret: vec![] };
    let name = format!("trace_seed{seed}.jsonl");
    match &config.algorithm {
        AlgorithmSpec::Api { eps, delta, mode, iterations, anchor, evaluation } => {
            let inj = ErrorInjector { improvement_eps: *eps, evaluation_delta: *delta, mode: *mode, seed };
            let cfg = ApiConfig { iterations: *iterations, anchor: *anchor, evaluation: *evaluation };
            let h0 = vec![0.0; mdp.n_states()];
            let t = run_api(mdp, &h0, &inj, &cfg)?;
            out.gaps = t.rows.iter().map(|r| t.meta.j_star - r.j_next).collect();
            out.traces.push((name, AnyTrace::Api(t)));
        }
        AlgorithmSpec::Discounted { alpha, eps, delta, mode, iterations } => {
            let inj = ErrorInjector { improvement_eps: *eps, evaluation_delta: *delta, mode: *mode, seed };
            let t = run_discounted_api(mdp, &vec![0.0; mdp.n_states()], *alpha, &inj, *iterations)?;
            out.gaps = t.rows.iter().map(|r| r.rescaled_error).collect();
            out.traces.push((name, AnyTrace::Discounted(t)));
        }
        AlgorithmSpec::Rl { rule, td, tau, iterations, anchor, evaluation, lazify, initial_q, features } => {
            let f = load_features(features, mdp.n_pairs())?;
            let cfg = RlConfig {
                rule: *rule,
                td: *td,
                tau: *tau,
                iterations: *iterations,
                anchor: *anchor,
                seed,
                evaluation: *evaluation,
                lazify: *lazify,
                initial_q: *initial_q,
            };
            let t = run_policy_based(mdp, &f, &cfg)?;
            out.gaps = t.rows.iter().map(|r| t.meta.j_star - r.j_next).collect();
            out.traces.push((name, AnyTrace::Rl(t)));
        }
        AlgorithmSpec::Regret { k_values, td, anchor, features, .. } => {
            let f = load_features(features, mdp.n_pairs())?;
            let plan = plan.expect("regret plan is computed before the seed sweep");
            for &k in k_values {
                let (run, t) = run_regret(mdp, &f, plan, td, *anchor, k, seed)?;
                out.regret.push(run);
                out.traces.push((format!("trace_seed{seed}_k{k}.jsonl"), AnyTrace::Rl(t)));
            }
        }
    }
    for (name, t) in &out.traces {
        out.certificates.push((name.clone(), verify_trace(t, DEFAULT_SLACK)?));
    }
    Ok(out)
}

fn write_file(dir: &Path, name: &str, text: &str, files: &mut Vec<ManifestEntry>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(ManifestEntry { path: name.to_string(), sha256: sha256_hex(text.as_bytes()) });
    Ok(())
}

/// Runs every seed (in parallel) and writes the bundle. Per-seed failures
/// are recorded in the manifest rather than aborting the batch; structural
/// problems with the config or instance are returned as errors.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentBundle> {
    config.validate()?;
    let mdp = config.build_instance()?;
    check_assumption(&mdp)?;
    let plan = match &config.algorithm {
        AlgorithmSpec::Regret { td, anchor, c_hat_taus, c_hat_seeds, features, .. } => {
            let f = load_features(features, mdp.n_pairs())?;
            let seeds: Vec<u64> = (0..*c_hat_seeds as u64).collect();
            Some(plan_regret(&mdp, &f, td, *anchor, c_hat_taus, &seeds)?)
        }
        _ => None,
    };
    let results: Vec<(u64, Result<SeedResult>)> = config
        .seeds
        .par_iter()
        .map(|&s| (s, run_seed(config, &mdp, plan.as_ref(), s)))
        .collect();

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    write_file(dir, "instance.json", &(mdp.to_json_string() + "\n"), &mut files)?;
    let mut families = Vec::new();
    let mut failed = Vec::new();
    let mut ok = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => failed.push(SeedFailure { seed, error: e.to_string() }),
        }
    }
    for r in &ok {
        for (name, t) in &r.traces {
            write_file(dir, name, &t.to_jsonl(), &mut files)?;
        }
        for (name, cert) in &r.certificates {
            for f in &cert.families {
                families.push(FamilyRow {
                    seed: r.seed,
                    trace: name.clone(),
                    family: f.family.clone(),
                    checked: f.checked,
                    violations: f.violations.len(),
                    min_slack: f.min_slack,
                });
            }
        }
    }

    let mut csv = String::from("seed,trace,family,checked,violations,min_slack\n");
    for f in &families {
        csv.push_str(&format!("{},{},{},{},{},{:e}\n", f.seed, f.trace, f.family, f.checked, f.violations, f.min_slack));
    }
    write_file(dir, "summary.csv", &csv, &mut files)?;

    let width = ok.iter().map(|r| r.gaps.len()).max().unwrap_or(0);
    if width > 0 {
        let mut csv = String::from("k,seeds,mean_gap,max_gap\n");
        for k in 0..width {
            let g: Vec<f64> = ok.iter().filter_map(|r| r.gaps.get(k).copied()).collect();
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            csv.push_str(&format!("{k},{},{mean:e},{max:e}\n", g.len()));
        }
        write_file(dir, "gaps.csv", &csv, &mut files)?;
    }

    let regret = match (&config.algorithm, plan) {
        (AlgorithmSpec::Regret { k_values, .. }, Some(plan)) => {
            let runs: Vec<RegretRun> = ok.iter().flat_map(|r| r.regret.iter().cloned()).collect();
            let mut csv = String::from("seed,k_target,horizon_k,tau,iterations,pseudo_regret,bound,slack\n");
            for r in &runs {
                csv.push_str(&format!(
                    "{},{},{},{},{},{:e},{:e},{:e}\n",
                    r.seed, r.k_target, r.ledger.horizon_k, r.tau, r.iterations, r.ledger.pseudo_regret, r.bound,
                    r.slack()
                ));
            }
            write_file(dir, "regret.csv", &csv, &mut files)?;
            let points = regret_points(&runs, k_values);
            let slope = loglog_slope(&points).ok();
            let mut fit = String::from("k_target,mean_horizon_k,mean_pseudo_regret\n");
            for (k, p) in k_values.iter().zip(&points) {
                fit.push_str(&format!("{k},{:e},{:e}\n", p.0, p.1));
            }
            fit.push_str(&format!("# slope,{}\n", slope.map_or("nan".into(), |s| format!("{s:.6}"))));
            write_file(dir, "regret_fit.csv", &fit, &mut files)?;
            Some(RegretFit { plan, points, slope, runs })
        }
        _ => None,
    };

    let manifest = Manifest {
        schema_version: EXPERIMENT_SCHEMA_VERSION,
        name: config.name.clone(),
        config: config.clone(),
        instance_hash: mdp.content_hash(),
        complete: failed.is_empty(),
        files,
        failed_seeds: failed,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(ExperimentBundle { output_dir: dir.clone(), manifest, families, regret })
}

/// `(mean K, mean pseudo regret)` per target horizon, skipping targets with
/// no successful run.
pub fn regret_points(runs: &[RegretRun], k_values: &[usize]) -> Vec<(f64, f64)> {
    k_values
        .iter()
        .filter_map(|&k| {
            let sel: Vec<&RegretRun> = runs.iter().filter(|r| r.k_target == k).collect();
            if sel.is_empty() {
                return None;
            }
            let n = sel.len() as f64;
            let kx = sel.iter().map(|r| r.ledger.horizon_k as f64).sum::<f64>() / n;
            let ry = sel.iter().map(|r| r.ledger.pseudo_regret).sum::<f64>() / n;
            Some((kx, ry))
        })
        .collect()
}
