use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use super::td::{sample_trajectory, td_lambda_run, TdConfig};
use super::update::{
    greedy_cap, mirror_cap, mirror_cap_from_prior, omega, softmax_cap, PolicyUpdateRule, UpdateKind,
};
use crate::api::certify::{CertificateSummary, Collector, FamilyReport};
use crate::bellman::{gap_stats_q, improvement_error_q};
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix};
use crate::mdp::{
    gamma_lower_bound_sa, optimal_solution, solve_bellman_q, state_action_kernel,
    stationary_distribution, Mdp, StochasticPolicy,
};
use crate::rng::{stream, Component};
use crate::scalar::{inf_dist, Real};
use crate::transforms::aperiodicity_transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlEvaluation {
    /// TD(λ) on a fresh trajectory per iteration.
    #[default]
    Td,
    /// `Q_k = Q_{μ_k}` from the linear solver; no sampling.
    Exact,
}

/// Where `Q_0` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialQ {
    /// Evaluate the uniform `μ_0` the same way later iterates are evaluated.
    #[default]
    Evaluate,
    /// `Q_0 = 0`, no samples spent.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub rule: PolicyUpdateRule,
    #[serde(default)]
    pub td: TdConfig,
    /// Trajectory length per evaluation.
    pub tau: usize,
    /// Number of improvement steps after the initial evaluation.
    pub iterations: usize,
    /// Anchor state-action pair (flat index).
    #[serde(default)]
    pub anchor: usize,
    pub seed: u64,
    #[serde(default)]
    pub evaluation: RlEvaluation,
    /// When set, the run targets the Schweitzer transform of the given model
    /// with this κ while sampling from the original model with duplicated
    /// samples.
    #[serde(default)]
    pub lazify: Option<f64>,
    #[serde(default)]
    pub initial_q: InitialQ,
}

/// Iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlRow<T> {
    pub k: usize,
    /// `μ_k`, flat `s * |A| + a`.
    pub policy: Vec<T>,
    /// `Q_k`
    pub q: Vec<T>,
    /// `Q_{μ_k}` anchored at the configured pair.
    pub q_exact: Vec<T>,
    /// `‖Q_k − Q_{μ_k}‖∞`
    pub delta: T,
    /// `‖Φθ*_{μ_k} − Q_{μ_k}‖∞` for the stationary-weighted projection `θ*`.
    pub approx_error: T,
    /// `J_{μ_k}`
    pub j_mu: T,
    pub u: T,
    pub l: T,
    /// `μ_{k+1}`
    pub next_policy: Vec<T>,
    /// `‖T^Q Q_k − T^Q_{μ_{k+1}} Q_k‖∞`
    pub eps: T,
    /// Rule-specific cap on `eps`: `2η/β`, `ln|A|/β` or `(1/β) ln(1/ω_{k+1})`.
    pub cap: T,
    /// Mirror descent only: `(1/β) max_s ln(1/μ_k(argmax Q_k(s,·)|s))`.
    pub cap_prior: Option<T>,
    /// `min_s μ_{k+1}(a*(s)|s)`
    pub omega_next: T,
    /// `J_{μ_{k+1}}`
    pub j_next: T,
    /// Samples used to produce `Q_k` (0 for exact evaluation).
    pub samples: usize,
    /// Sum of sampled rewards along the trajectory behind `Q_k`.
    pub reward_sum: Option<T>,
    /// Final running gain estimate of TD.
    pub td_gain: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlMeta<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub mdp_hash: String,
    pub config: RlConfig,
    pub feature_dim: usize,
    /// Minimum invariant probability over the state-action chains of
    /// `μ_1..μ_T` (`μ_1` alone when `T = 0`).
    pub gamma: T,
    pub j_star: T,
    pub optimal_actions: Vec<usize>,
    /// `J* − l_0`
    pub c0: T,
    /// `max_k approx_error`
    pub delta0_bar: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlTrace<T> {
    pub meta: RlMeta<T>,
    pub rows: Vec<RlRow<T>>,
}

impl<T: Real> RlTrace<T> {
    /// `J* − J_{μ_{T+1}}`
    pub fn final_gap(&self) -> T {
        self.meta.j_star - self.rows.last().map_or(T::nan(), |r| r.j_next)
    }

    /// `min_{k=1..T} ω_k` with `ω_k = min_s μ_k(a*(s)|s)`; falls back to
    /// `ω_1` when `T = 0`.
    pub fn omega_min(&self) -> T {
        let t = self.meta.config.iterations.max(1);
        self.rows[..t].iter().fold(T::one(), |w, r| w.min(r.omega_next))
    }
}

/// `‖Φθ* − Q‖∞` with `θ* = argmin ‖Φθ − Q‖_D`, `D = diag(d)`.
///
/// Square feature maps interpolate `Q` exactly, so the weights do not matter
/// there. Otherwise weights below `1e-14·max d` are raised to that floor:
/// near-deterministic policies put underflowing mass on some pairs, and a
/// zero weight would drop those rows from the normal equations.
pub fn projection_error<T: Real>(features: &FeatureMap<T>, q: &[T], d: &[T]) -> Result<T> {
    let phi = features.matrix();
    if features.dim() == features.n_pairs() {
        let theta = solve(phi, q)?;
        return Ok(inf_dist(&features.values(&theta), q));
    }
    let top = d.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = top * T::lit(1e-14);
    let mut dphi = phi.clone();
    for i in 0..dphi.rows() {
        let w = d[i].max(floor);
        for v in dphi.row_mut(i) {
            *v *= w;
        }
    }
    let pt_d: Matrix<T> = dphi.transpose();
    let mut normal = pt_d.matmul(phi);
    let mut rhs = pt_d.mul_vec(q);
    // Jacobi scaling: near-deterministic policies put tiny weights on some
    // pairs, which would otherwise look singular to the pivot test.
    let dim = normal.rows();
    let scale: Vec<T> = (0..dim)
        .map(|i| {
            let v = normal[(i, i)];
            if v > T::zero() { T::one() / v.sqrt() } else { T::one() }
        })
        .collect();
    for i in 0..dim {
        for j in 0..dim {
            normal[(i, j)] *= scale[i] * scale[j];
        }
        rhs[i] *= scale[i];
    }
    let y = solve(&normal, &rhs)?;
    let theta: Vec<T> = y.iter().zip(&scale).map(|(&a, &b)| a * b).collect();
    Ok(inf_dist(&features.values(&theta), q))
}

fn improvement_cap<T: Real>(
    rule: &PolicyUpdateRule,
    q: &[T],
    next: &StochasticPolicy<T>,
    optimal_actions: &[usize],
) -> T {
    let beta = T::lit(rule.beta);
    match rule.kind {
        UpdateKind::Greedy => greedy_cap(q, beta),
        UpdateKind::Softmax => softmax_cap(next.n_actions(), beta),
        UpdateKind::MirrorDescent => mirror_cap(next, optimal_actions, beta),
    }
}

/// Generic policy-based loop starting from the uniform `μ_0`: row `k` holds
/// `Q_k` and the improvement `μ_{k+1} = rule(μ_k, Q_k)`; `Q_{k+1}` then comes
/// from a fresh trajectory under `μ_{k+1}`. `Q_0` follows `config.initial_q`.
pub fn run_policy_based<T: Real>(
    mdp: &Mdp<T>,
    features: &FeatureMap<T>,
    config: &RlConfig,
) -> Result<RlTrace<T>> {
    config.rule.validate()?;
    config.td.validate()?;
    if config.evaluation == RlEvaluation::Td && config.tau < 2 {
        return Err(Error::Domain("tau must be at least 2 for TD evaluation".into()));
    }
    let kappa = config.lazify.map(T::lit);
    let model = match kappa {
        Some(k) => aperiodicity_transform(mdp, k)?.0,
        None => mdp.clone(),
    };
    let (n, m) = (model.n_states(), model.n_actions());
    features.check_pairs(model.n_pairs())?;
    if config.anchor >= model.n_pairs() {
        return Err(Error::Dimension(format!("anchor pair {} out of range", config.anchor)));
    }
    let opt = optimal_solution(&model, config.anchor / m)?;

    let mut policy = StochasticPolicy::uniform(n, m);
    let mut rows = Vec::with_capacity(config.iterations + 1);
    for k in 0..=config.iterations {
        let exact = solve_bellman_q(&model, &policy, config.anchor)?;
        let zero_start = k == 0 && config.initial_q == InitialQ::Zero;
        let (q, samples, reward_sum, td_gain) = match config.evaluation {
            _ if zero_start => (vec![T::zero(); model.n_pairs()], 0, None, None),
            RlEvaluation::Exact => (exact.bias.clone(), 0, None, None),
            RlEvaluation::Td => {
                let mut rng = stream(config.seed, Component::Trajectory, k as u32);
                let traj = sample_trajectory(mdp, &policy, config.tau, &mut rng, kappa)?;
                let st = td_lambda_run(&traj, features, &config.td, config.anchor)?;
                let rs = traj.iter().map(|x| x.r).sum();
                (features.values(&st.theta), traj.len(), Some(rs), Some(st.j))
            }
        };
        let gs = gap_stats_q(&model, &q)?;
        let next = config.rule.apply(&policy, &q)?;
        let eps = improvement_error_q(&model, &next, &q)?;
        let cap = improvement_cap(&config.rule, &q, &next, &opt.actions);
        let cap_prior = (config.rule.kind == UpdateKind::MirrorDescent)
            .then(|| mirror_cap_from_prior(&policy, &q, T::lit(config.rule.beta)));
        let approx_error = projection_error(features, &exact.bias, &exact.stationary)?;
        let j_next = crate::mdp::average_reward(&model, &next)?;
        rows.push(RlRow {
            k,
            policy: policy.probs().to_vec(),
            delta: inf_dist(&q, &exact.bias),
            q,
            q_exact: exact.bias,
            approx_error,
            j_mu: exact.gain,
            u: gs.u,
            l: gs.l,
            next_policy: next.probs().to_vec(),
            eps,
            cap,
            cap_prior,
            omega_next: omega(&next, &opt.actions),
            j_next,
            samples,
            reward_sum,
            td_gain,
        });
        policy = next;
    }

    let visited: Vec<StochasticPolicy<T>> = rows[..config.iterations.max(1)]
        .iter()
        .map(|r| StochasticPolicy::from_flat(n, m, r.next_policy.clone()))
        .collect::<Result<_>>()?;
    let gamma = gamma_lower_bound_sa(&model, &visited)?;
    let delta0_bar = rows.iter().fold(T::zero(), |a, r| a.max(r.approx_error));
    let meta = RlMeta {
        n_states: n,
        n_actions: m,
        mdp_hash: model.content_hash(),
        config: *config,
        feature_dim: features.dim(),
        gamma,
        j_star: opt.gain,
        optimal_actions: opt.actions,
        c0: opt.gain - rows[0].l,
        delta0_bar,
    };
    Ok(RlTrace { meta, rows })
}

/// Right side of the finite-horizon bound at horizon `k`, from realized
/// errors:
/// `(1−γ)^k (J* − l_0) + ε_k + Σ_{ℓ=1}^{k} (1−γ)^{ℓ−1} ε_{k−ℓ} + 2 Σ_{ℓ=0}^{k−1} (1−γ)^ℓ δ_{k−ℓ}`.
pub fn realized_error_bound<T: Real>(trace: &RlTrace<T>, k: usize, gamma: T) -> T {
    let rows = &trace.rows;
    let q = T::one() - gamma;
    let mut acc = q.powi(k as i32) * (trace.meta.j_star - rows[0].l) + rows[k].eps;
    let mut w = T::one();
    for l in 1..=k {
        acc += w * rows[k - l].eps + T::lit(2.0) * w * rows[k - l + 1].delta;
        w *= q;
    }
    acc
}

/// Checks on a trace with oracle columns, using realized errors:
/// - `l_k − ε_k ≤ J_{μ_{k+1}} ≤ J* ≤ u_k`
/// - `J* − l_k ≤ (1−γ)(J* − l_{k−1}) + ε_{k−1} + 2δ_k` for `k ≥ 1`
/// - `J* − J_{μ_{k+1}} ≤` [`realized_error_bound`] at every `k`
/// - `ε_k` within the provable improvement cap of the rule
pub fn rl_certificate<T: Real>(
    trace: &RlTrace<T>,
    gamma: T,
    tol: f64,
) -> Result<CertificateSummary> {
    let js = trace.meta.j_star;
    if trace.rows.is_empty() {
        return Err(Error::Precondition("trace has no rows".into()));
    }
    if let Some(r) = trace.rows.iter().find(|r| r.q_exact.is_empty() || r.q_exact.len() != r.q.len()) {
        return Err(Error::Precondition(format!("row {} lacks the exact Q column", r.k)));
    }
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, 1]")));
    }
    let mut sandwich = Collector::new("q_sandwich", tol);
    let mut step = Collector::new("one_step", tol);
    let mut fin = Collector::new("finite_horizon", tol);
    let mut caps = Collector::new("improvement_cap", tol);
    let mut cols = Collector::new("columns", tol);
    for (i, r) in trace.rows.iter().enumerate() {
        cols.same(r.k, "delta", r.delta, inf_dist(&r.q, &r.q_exact));
        sandwich.le(r.k, "l_k - eps_k <= J_next", r.l - r.eps, r.j_next);
        sandwich.le(r.k, "J_next <= J*", r.j_next, js);
        sandwich.le(r.k, "J* <= u_k", js, r.u);
        if i > 0 {
            let p = &trace.rows[i - 1];
            let rhs = (T::one() - gamma) * (js - p.l) + p.eps + T::lit(2.0) * r.delta;
            step.le(r.k, "J* - l_k <= (1-gamma)(J* - l_{k-1}) + eps_{k-1} + 2 delta_k", js - r.l, rhs);
        }
        fin.le(r.k, "J* - J_next <= realized bound", js - r.j_next, realized_error_bound(trace, i, gamma));
        let c = r.cap_prior.unwrap_or(r.cap);
        caps.le(r.k, "eps_k <= cap_k", r.eps, c);
    }
    Ok(CertificateSummary {
        families: vec![cols.finish(), sandwich.finish(), step.finish(), fin.finish(), caps.finish()],
    })
}

/// Compares `ε_k` against the `(1/β) ln(1/ω_{k+1})` column on a mirror
/// descent trace. Informational: realized errors can exceed that cap, even
/// from a uniform prior, so the certificate uses `cap_prior` instead.
pub fn omega_cap_report<T: Real>(trace: &RlTrace<T>, tol: f64) -> FamilyReport {
    let mut c = Collector::new("omega_cap", tol);
    for r in &trace.rows {
        c.le(r.k, "eps_k <= (1/beta) ln(1/omega_{k+1})", r.eps, r.cap);
    }
    c.finish()
}

/// `(1−γ)^T c0 + ((1+γ)/γ)·cap + (2/γ)(δ̄₀ + Ĉ/√τ)`, the shape shared by the
/// greedy, softmax and mirror-descent bounds on `E[J* − J_{μ_{T+1}}]`, with
/// `cap` the rule's improvement term.
pub fn rule_gap_bound(
    gamma: f64,
    t: usize,
    c0: f64,
    cap: f64,
    delta0_bar: f64,
    c_hat: f64,
    tau: usize,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) || tau == 0 {
        return Err(Error::Domain(format!("need gamma in (0,1] and tau >= 1; got {gamma}, {tau}")));
    }
    Ok((1.0 - gamma).powi(t as i32) * c0
        + (1.0 + gamma) / gamma * cap
        + 2.0 / gamma * (delta0_bar + c_hat / (tau as f64).sqrt()))
}

/// Stationary state-action distribution of `policy`.
pub fn sa_stationary<T: Real>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>) -> Result<Vec<T>> {
    stationary_distribution(&state_action_kernel(mdp, policy)?.kernel)
}
