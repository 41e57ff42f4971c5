//! Average-reward approximate policy iteration with controlled error
//! injection, its discounted counterpart, and row-wise certificate checks.

mod bounds;
pub(crate) mod certify;
mod discounted;

pub use bounds::{
    discounted_bound, discounted_bound_rescaled, gap_bound, gap_limit, theorem_bound,
    theorem_limit,
};
pub use certify::{
    certify, check_budgets, check_contraction, check_gap, check_sandwich, check_finite_horizon,
    CertificateSummary, FamilyReport, Violation, DEFAULT_SLACK,
};
pub use discounted::{
    discounted_optimal, evaluate_discounted, run_discounted_api, DiscountedMeta, DiscountedRow,
    DiscountedTrace,
};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bellman::{action_values, gap_stats, optimality_residual, relative_value_iteration, RviConfig};
use crate::error::{Error, Result};
use crate::mdp::{
    deterministic_policies, gamma_lower_bound, irreducibility_check, optimal_solution,
    policy_kernel, solve_bellman, Mdp, Reachability, StochasticPolicy, ENUMERATION_LIMIT,
};
use crate::rng::{stream, Component};
use crate::scalar::{inf_dist, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectorMode {
    None,
    WorstWithinBudget,
    RandomWithinBudget,
}

/// Error budgets and how they are spent.
///
/// `worst_within_budget` picks, per state, the admissible action with the
/// smallest one-step value, and perturbs the exact bias by `+δ` at the state
/// where the optimality residual is smallest and `−δ` elsewhere, which pushes
/// the next `l_k` down. `random_within_budget` samples admissible actions
/// uniformly and adds i.i.d. uniform `[−δ, δ]` noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjector {
    pub improvement_eps: f64,
    pub evaluation_delta: f64,
    pub mode: InjectorMode,
    pub seed: u64,
}

impl ErrorInjector {
    pub fn exact() -> Self {
        ErrorInjector { improvement_eps: 0.0, evaluation_delta: 0.0, mode: InjectorMode::None, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.improvement_eps) || !ok(self.evaluation_delta) {
            return Err(Error::Domain(format!(
                "injector budgets must be finite and >= 0 (eps = {}, delta = {})",
                self.improvement_eps, self.evaluation_delta
            )));
        }
        Ok(())
    }

    /// Budgets actually in force: mode `none` spends nothing.
    pub fn effective_budgets(&self) -> (f64, f64) {
        match self.mode {
            InjectorMode::None => (0.0, 0.0),
            _ => (self.improvement_eps, self.evaluation_delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    AllDeterministic,
    VisitedAndOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMethod {
    /// Linear solve of the anchored Bellman equation.
    #[default]
    Direct,
    /// Relative value iteration warm-started at the previous iterate.
    RelativeValueIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub iterations: usize,
    pub anchor: usize,
    #[serde(default)]
    pub evaluation: EvaluationMethod,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig { iterations: 200, anchor: 0, evaluation: EvaluationMethod::Direct }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiMeta<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub mdp_hash: String,
    pub gamma: T,
    pub gamma_source: GammaSource,
    pub j_star: T,
    pub optimal_actions: Vec<usize>,
    pub anchor: usize,
    pub injector: ErrorInjector,
    pub evaluation: EvaluationMethod,
    /// `min_i (T h0 − h0)(i)`
    pub l0: T,
    pub iterations: usize,
}

/// Iteration `k`: statistics of `h_k`, the policy `μ_{k+1}` chosen from it,
/// and the evaluation that produced `h_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRow<T> {
    pub k: usize,
    pub h: Vec<T>,
    pub u: T,
    pub l: T,
    /// Deterministic `μ_{k+1}` as one action per state.
    pub policy: Vec<usize>,
    /// `J_{μ_{k+1}}`
    pub j_next: T,
    /// `‖T h_k − T_{μ_{k+1}} h_k‖∞`
    pub eps_realized: T,
    /// `‖h_{k+1} − h_{μ_{k+1}}‖∞`
    pub delta_realized: T,
    /// Bound on `J* − J_{μ_{k+1}}`.
    pub theorem_bound: T,
    /// Bound on `u_k − l_k`.
    pub gap_bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiTrace<T> {
    pub meta: ApiMeta<T>,
    pub rows: Vec<ApiRow<T>>,
}

/// Positive self-loops everywhere and, when the deterministic policies can be
/// enumerated, an irreducible chain under each of them.
pub fn check_assumption<T: Real>(mdp: &Mdp<T>) -> Result<()> {
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if mdp.p(s, a, s) <= T::zero() {
                return Err(Error::Precondition(format!(
                    "P({s}|{s},{a}) = 0: self-loops must be positive (apply the aperiodicity transform)"
                )));
            }
        }
    }
    if let Some(c) = mdp.deterministic_policy_count() {
        if c <= ENUMERATION_LIMIT {
            for actions in deterministic_policies(mdp.n_states(), mdp.n_actions()) {
                let mu = StochasticPolicy::deterministic(&actions, mdp.n_actions())?;
                let pk = policy_kernel(mdp, &mu)?;
                if let Reachability::Reducible { from, to } = irreducibility_check(&pk.kernel) {
                    return Err(Error::Precondition(format!(
                        "policy {actions:?} is reducible: state {to} unreachable from {from}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// γ over every deterministic policy when enumerable; `None` otherwise.
pub fn gamma_all_deterministic<T: Real>(mdp: &Mdp<T>) -> Result<Option<T>> {
    match mdp.deterministic_policy_count() {
        Some(c) if c <= ENUMERATION_LIMIT => {
            let all: Vec<_> = deterministic_policies(mdp.n_states(), mdp.n_actions())
                .map(|a| StochasticPolicy::deterministic(&a, mdp.n_actions()))
                .collect::<Result<_>>()?;
            gamma_lower_bound(mdp, &all).map(Some)
        }
        _ => Ok(None),
    }
}

/// Runs `config.iterations` rounds of approximate policy iteration from `h0`.
pub fn run_api<T: Real>(
    mdp: &Mdp<T>,
    h0: &[T],
    injector: &ErrorInjector,
    config: &ApiConfig,
) -> Result<ApiTrace<T>> {
    injector.validate()?;
    let n = mdp.n_states();
    if h0.len() != n {
        return Err(Error::Dimension(format!("h0 has length {}, expected {n}", h0.len())));
    }
    if config.anchor >= n {
        return Err(Error::Dimension(format!("anchor {} out of range", config.anchor)));
    }
    check_assumption(mdp)?;
    let opt = optimal_solution(mdp, config.anchor)?;
    let (eps_b, delta_b) = injector.effective_budgets();
    let (eps, delta) = (T::lit(eps_b), T::lit(delta_b));
    let mut rng = stream(injector.seed, Component::Injector, 0);

    let mut h = h0.to_vec();
    let mut rows: Vec<ApiRow<T>> = Vec::with_capacity(config.iterations);
    for k in 0..config.iterations {
        let qa = action_values(mdp, &h)?;
        let gs = gap_stats(mdp, &h)?;
        let (actions, eps_realized) = improve(&qa, mdp.n_actions(), eps, injector.mode, &mut rng);
        let mu = StochasticPolicy::deterministic(&actions, mdp.n_actions())?;
        let exact = match config.evaluation {
            EvaluationMethod::Direct => solve_bellman(mdp, &mu, config.anchor)?,
            EvaluationMethod::RelativeValueIteration => {
                let mut ev = solve_bellman(mdp, &mu, config.anchor)?;
                ev.bias = relative_value_iteration(mdp, &mu, &h, config.anchor, &RviConfig::default())?.0;
                ev
            }
        };
        let noise = evaluation_noise(mdp, &exact.bias, delta, injector.mode, &mut rng)?;
        let next: Vec<T> = exact.bias.iter().zip(&noise).map(|(&b, &e)| b + e).collect();
        rows.push(ApiRow {
            k,
            h: std::mem::replace(&mut h, next),
            u: gs.u,
            l: gs.l,
            policy: actions,
            j_next: exact.gain,
            eps_realized,
            delta_realized: T::zero(),
            theorem_bound: T::zero(),
            gap_bound: T::zero(),
        });
        let row = rows.last_mut().expect("just pushed");
        row.delta_realized = inf_dist(&h, &exact.bias);
    }

    let (gamma, gamma_source) = match gamma_all_deterministic(mdp)? {
        Some(g) => (g, GammaSource::AllDeterministic),
        None => {
            let mut set: Vec<Vec<usize>> = rows.iter().map(|r| r.policy.clone()).collect();
            set.push(opt.actions.clone());
            set.sort();
            set.dedup();
            let policies: Vec<_> = set
                .iter()
                .map(|a| StochasticPolicy::deterministic(a, mdp.n_actions()))
                .collect::<Result<_>>()?;
            (gamma_lower_bound(mdp, &policies)?, GammaSource::VisitedAndOptimal)
        }
    };
    let l0 = gap_stats(mdp, h0)?.l;
    let meta = ApiMeta {
        n_states: n,
        n_actions: mdp.n_actions(),
        mdp_hash: mdp.content_hash(),
        gamma,
        gamma_source,
        j_star: opt.gain,
        optimal_actions: opt.actions,
        anchor: config.anchor,
        injector: *injector,
        evaluation: config.evaluation,
        l0,
        iterations: config.iterations,
    };
    for row in &mut rows {
        row.theorem_bound = theorem_bound(row.k, gamma, eps, delta, meta.j_star, l0)?;
        row.gap_bound = gap_bound(row.k + 1, gamma, eps, delta, meta.j_star, l0)?;
    }
    Ok(ApiTrace { meta, rows })
}

/// Chooses one action per state from flat action values `qa`, spending at
/// most `eps` of improvement error. Returns the actions and the realized
/// error `max_s (max_a qa(s,a) − qa(s, chosen))`.
pub(crate) fn improve<T: Real>(
    qa: &[T],
    m: usize,
    eps: T,
    mode: InjectorMode,
    rng: &mut crate::rng::Rng,
) -> (Vec<usize>, T) {
    let mut actions = Vec::with_capacity(qa.len() / m);
    let mut realized = T::zero();
    for row in qa.chunks(m) {
        let best = (1..m).fold(0, |b, a| if row[a] > row[b] { a } else { b });
        let admissible = |a: usize| row[a] >= row[best] - eps;
        let pick = match mode {
            InjectorMode::None => best,
            InjectorMode::WorstWithinBudget => (0..m)
                .filter(|&a| admissible(a))
                .fold(best, |w, a| if row[a] < row[w] || (row[a] == row[w] && a < w) { a } else { w }),
            InjectorMode::RandomWithinBudget => {
                let adm: Vec<usize> = (0..m).filter(|&a| admissible(a)).collect();
                adm[rng.random_range(0..adm.len())]
            }
        };
        realized = realized.max(row[best] - row[pick]);
        actions.push(pick);
    }
    (actions, realized)
}

/// Perturbation added to an exact bias vector, with sup norm at most `delta`.
pub(crate) fn evaluation_noise<T: Real>(
    mdp: &Mdp<T>,
    exact: &[T],
    delta: T,
    mode: InjectorMode,
    rng: &mut crate::rng::Rng,
) -> Result<Vec<T>> {
    let n = exact.len();
    Ok(match mode {
        InjectorMode::None => vec![T::zero(); n],
        InjectorMode::WorstWithinBudget => {
            let res = optimality_residual(mdp, exact)?;
            let argmin = (1..n).fold(0, |b, i| if res[i] < res[b] { i } else { b });
            (0..n).map(|i| if i == argmin { delta } else { -delta }).collect()
        }
        InjectorMode::RandomWithinBudget => {
            let d = delta.to_f64_lossy();
            (0..n)
                .map(|_| if d > 0.0 { T::lit(rng.random_range(-d..=d)) } else { T::zero() })
                .collect()
        }
    })
}
