use serde::{Deserialize, Serialize};

use super::{deterministic_policies, sa_index, Mdp, StochasticPolicy};
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix};
use crate::scalar::Real;

/// Above this many deterministic policies, exhaustive enumeration is replaced
/// by exact policy iteration (and γ by the visited-policy minimum).
pub const ENUMERATION_LIMIT: usize = 4096;

/// Chain over states induced by a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyKernel<T> {
    /// `P_mu(s'|s)`
    pub kernel: Matrix<T>,
    /// `r_mu(s)`
    pub reward_vec: Vec<T>,
}

/// Chain over state-action pairs: `Q_mu(s',a'|s,a) = mu(a'|s') P(s'|s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionKernel<T> {
    pub kernel: Matrix<T>,
    /// `r(s,a)` in flat order.
    pub reward: Vec<T>,
    pub n_actions: usize,
}

/// Gain, anchored bias and invariant distribution of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult<T> {
    pub gain: T,
    /// `h_mu` (state chain) or `Q_mu` (state-action chain), zero at `anchor`.
    pub bias: Vec<T>,
    pub stationary: Vec<T>,
    pub anchor: usize,
}

impl<T: Real> EvaluationResult<T> {
    /// `max_i |gain + bias(i) - reward(i) - (kernel bias)(i)|`
    pub fn bellman_residual(&self, kernel: &Matrix<T>, reward: &[T]) -> T {
        let pb = kernel.mul_vec(&self.bias);
        (0..self.bias.len()).fold(T::zero(), |m, i| {
            m.max((self.gain + self.bias[i] - reward[i] - pb[i]).abs())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reachability {
    Irreducible,
    /// `to` cannot be reached from `from`.
    Reducible { from: usize, to: usize },
}

impl Reachability {
    pub fn is_irreducible(self) -> bool {
        matches!(self, Reachability::Irreducible)
    }

    fn into_result(self) -> Result<()> {
        match self {
            Reachability::Irreducible => Ok(()),
            Reachability::Reducible { from, to } => Err(Error::Reducible { from, to }),
        }
    }
}

pub fn policy_kernel<T: Real>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>) -> Result<PolicyKernel<T>> {
    policy.check_shape(mdp)?;
    let n = mdp.n_states();
    let mut kernel = Matrix::zeros(n, n);
    let mut reward_vec = vec![T::zero(); n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = policy.prob(s, a);
            if w == T::zero() {
                continue;
            }
            reward_vec[s] += w * mdp.r(s, a);
            for (k, &p) in kernel.row_mut(s).iter_mut().zip(mdp.next_dist(s, a)) {
                *k += w * p;
            }
        }
    }
    Ok(PolicyKernel { kernel, reward_vec })
}

pub fn state_action_kernel<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
) -> Result<StateActionKernel<T>> {
    policy.check_shape(mdp)?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut kernel = Matrix::zeros(n * m, n * m);
    for s in 0..n {
        for a in 0..m {
            let row = sa_index(s, a, m);
            for (s2, &p) in mdp.next_dist(s, a).iter().enumerate() {
                if p == T::zero() {
                    continue;
                }
                for a2 in 0..m {
                    kernel[(row, sa_index(s2, a2, m))] = policy.prob(s2, a2) * p;
                }
            }
        }
    }
    Ok(StateActionKernel {
        kernel,
        reward: mdp.rewards().to_vec(),
        n_actions: m,
    })
}

fn reachable_from<T: Real>(kernel: &Matrix<T>, start: usize, reverse: bool) -> Vec<bool> {
    let n = kernel.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let edge = if reverse { kernel[(j, i)] } else { kernel[(i, j)] };
            if edge > T::zero() && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Strong connectivity of the support graph of `kernel`.
pub fn irreducibility_check<T: Real>(kernel: &Matrix<T>) -> Reachability {
    if kernel.rows() == 0 {
        return Reachability::Irreducible;
    }
    if let Some(to) = reachable_from(kernel, 0, false).iter().position(|r| !r) {
        return Reachability::Reducible { from: 0, to };
    }
    if let Some(from) = reachable_from(kernel, 0, true).iter().position(|r| !r) {
        return Reachability::Reducible { from, to: 0 };
    }
    Reachability::Irreducible
}

/// Invariant distribution of an irreducible row-stochastic matrix, from the
/// linear system `(Pᵀ - I) π = 0` with the last equation replaced by `Σπ = 1`.
pub fn stationary_distribution<T: Real>(kernel: &Matrix<T>) -> Result<Vec<T>> {
    let n = kernel.rows();
    if kernel.cols() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "stationary distribution of a {}x{} matrix",
            kernel.rows(),
            kernel.cols()
        )));
    }
    irreducibility_check(kernel).into_result()?;
    let mut a = kernel.transpose().sub(&Matrix::identity(n));
    for j in 0..n {
        a[(n - 1, j)] = T::one();
    }
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    solve(&a, &b)
}

/// Solves `J 1 + h = r + P h`, `h(anchor) = 0` for an irreducible chain.
pub fn evaluate_chain<T: Real>(
    kernel: &Matrix<T>,
    reward: &[T],
    anchor: usize,
) -> Result<EvaluationResult<T>> {
    let n = kernel.rows();
    if reward.len() != n {
        return Err(Error::Dimension(format!(
            "reward of length {} for a chain of {n} states",
            reward.len()
        )));
    }
    if anchor >= n {
        return Err(Error::Dimension(format!("anchor {anchor} out of range ({n})")));
    }
    let stationary = stationary_distribution(kernel)?;
    // Unknowns: [J, h_0, .., h_{n-1}].
    let mut a = Matrix::zeros(n + 1, n + 1);
    let mut b = vec![T::zero(); n + 1];
    for i in 0..n {
        a[(i, 0)] = T::one();
        a[(i, i + 1)] += T::one();
        for j in 0..n {
            a[(i, j + 1)] -= kernel[(i, j)];
        }
        b[i] = reward[i];
    }
    a[(n, anchor + 1)] = T::one();
    let x = solve(&a, &b).map_err(|e| match e {
        Error::Singular(msg) => Error::Domain(format!("augmented Bellman system is singular: {msg}")),
        other => other,
    })?;
    let mut bias = x[1..].to_vec();
    bias[anchor] = T::zero();
    Ok(EvaluationResult {
        gain: x[0],
        bias,
        stationary,
        anchor,
    })
}

/// `J_mu = π_mu · r_mu`
pub fn average_reward<T: Real>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>) -> Result<T> {
    let pk = policy_kernel(mdp, policy)?;
    let pi = stationary_distribution(&pk.kernel)?;
    Ok(crate::scalar::dot(&pi, &pk.reward_vec))
}

pub fn solve_bellman<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    anchor: usize,
) -> Result<EvaluationResult<T>> {
    let pk = policy_kernel(mdp, policy)?;
    evaluate_chain(&pk.kernel, &pk.reward_vec, anchor)
}

/// Q-function counterpart of [`solve_bellman`]; `anchor` is a flat
/// state-action index. Solved on the state chain and lifted through
/// `Q(s,a) = r(s,a) − J + Σ_s' P(s'|s,a) h(s')`, which stays well conditioned
/// when the policy puts tiny mass on some actions. The invariant distribution
/// of the state-action chain is `π(s) μ(a|s)`.
pub fn solve_bellman_q<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    anchor: usize,
) -> Result<EvaluationResult<T>> {
    if anchor >= mdp.n_pairs() {
        return Err(Error::Dimension(format!("anchor pair {anchor} out of range ({})", mdp.n_pairs())));
    }
    let m = mdp.n_actions();
    let ev = solve_bellman(mdp, policy, anchor / m)?;
    let mut q = Vec::with_capacity(mdp.n_pairs());
    for s in 0..mdp.n_states() {
        for a in 0..m {
            q.push(mdp.r(s, a) - ev.gain + crate::scalar::dot(mdp.next_dist(s, a), &ev.bias));
        }
    }
    let c = q[anchor];
    q.iter_mut().for_each(|v| *v -= c);
    q[anchor] = T::zero();
    let stationary = sa_stationary(&ev.stationary, policy);
    Ok(EvaluationResult { gain: ev.gain, bias: q, stationary, anchor })
}

fn sa_stationary<T: Real>(pi: &[T], policy: &StochasticPolicy<T>) -> Vec<T> {
    pi.iter()
        .enumerate()
        .flat_map(|(s, &p)| policy.row(s).iter().map(move |&w| p * w))
        .collect()
}

/// Minimum stationary probability over the supplied policies' state chains.
pub fn gamma_lower_bound<T: Real>(mdp: &Mdp<T>, policies: &[StochasticPolicy<T>]) -> Result<T> {
    if policies.is_empty() {
        return Err(Error::Domain("gamma over an empty policy set".into()));
    }
    policies.iter().try_fold(T::infinity(), |g, mu| {
        let pk = policy_kernel(mdp, mu)?;
        let pi = stationary_distribution(&pk.kernel)?;
        Ok(pi.into_iter().fold(g, T::min))
    })
}

/// Minimum invariant probability over the supplied policies' state-action
/// chains, `min π(s) μ(a|s)`.
pub fn gamma_lower_bound_sa<T: Real>(
    mdp: &Mdp<T>,
    policies: &[StochasticPolicy<T>],
) -> Result<T> {
    if policies.is_empty() {
        return Err(Error::Domain("gamma over an empty policy set".into()));
    }
    policies.iter().try_fold(T::infinity(), |g, mu| {
        let pk = policy_kernel(mdp, mu)?;
        let pi = stationary_distribution(&pk.kernel)?;
        Ok(sa_stationary(&pi, mu).into_iter().fold(g, T::min))
    })
}

/// An optimal deterministic policy with its gain and anchored bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution<T> {
    pub gain: T,
    pub actions: Vec<usize>,
    pub bias: Vec<T>,
    /// `"enumeration"` or `"policy_iteration"`.
    pub method: String,
}

/// Brute force over all deterministic policies. Ties keep the first policy in
/// lexicographic order.
pub fn optimal_by_enumeration<T: Real>(mdp: &Mdp<T>, anchor: usize) -> Result<OptimalSolution<T>> {
    let mut best: Option<(T, Vec<usize>, Vec<T>)> = None;
    for actions in deterministic_policies(mdp.n_states(), mdp.n_actions()) {
        let mu = StochasticPolicy::deterministic(&actions, mdp.n_actions())?;
        let ev = solve_bellman(mdp, &mu, anchor)?;
        if best.as_ref().is_none_or(|(g, _, _)| ev.gain > *g) {
            best = Some((ev.gain, actions, ev.bias));
        }
    }
    let (gain, actions, bias) = best.expect("at least one deterministic policy");
    Ok(OptimalSolution {
        gain,
        actions,
        bias,
        method: "enumeration".into(),
    })
}

/// Exact policy iteration from the all-zeros policy. A state switches action
/// only on a strict improvement larger than a relative tolerance.
pub fn optimal_by_policy_iteration<T: Real>(
    mdp: &Mdp<T>,
    anchor: usize,
) -> Result<OptimalSolution<T>> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut actions = vec![0usize; n];
    let tol = T::lit(1e-11) * (T::one() + mdp.r_max());
    let cap = 10_000;
    for _ in 0..cap {
        let mu = StochasticPolicy::deterministic(&actions, m)?;
        let ev = solve_bellman(mdp, &mu, anchor)?;
        let mut changed = false;
        for s in 0..n {
            let q = |a: usize| mdp.r(s, a) + crate::scalar::dot(mdp.next_dist(s, a), &ev.bias);
            let current = q(actions[s]);
            let (best_a, best_q) = (0..m)
                .map(|a| (a, q(a)))
                .fold((actions[s], current), |b, x| if x.1 > b.1 + tol { x } else { b });
            if best_a != actions[s] && best_q > current + tol {
                actions[s] = best_a;
                changed = true;
            }
        }
        if !changed {
            return Ok(OptimalSolution {
                gain: ev.gain,
                actions,
                bias: ev.bias,
                method: "policy_iteration".into(),
            });
        }
    }
    Err(Error::Convergence {
        iterations: cap,
        residual: f64::NAN,
    })
}

/// Enumeration when `|A|^|S| <= ENUMERATION_LIMIT`, policy iteration otherwise.
pub fn optimal_solution<T: Real>(mdp: &Mdp<T>, anchor: usize) -> Result<OptimalSolution<T>> {
    match mdp.deterministic_policy_count() {
        Some(c) if c <= ENUMERATION_LIMIT => optimal_by_enumeration(mdp, anchor),
        _ => optimal_by_policy_iteration(mdp, anchor),
    }
}
