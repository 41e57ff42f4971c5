//! Finite tabular MDPs, randomized policies and exact average-reward
//! evaluation.
//!
//! State-action pairs are flattened as `index(s, a) = s * n_actions + a`
//! everywhere in the crate (Q vectors, policies, feature rows).

mod eval;
mod io;

pub use eval::{
    average_reward, evaluate_chain, gamma_lower_bound, gamma_lower_bound_sa,
    irreducibility_check, optimal_by_enumeration, optimal_by_policy_iteration, optimal_solution,
    policy_kernel, solve_bellman, solve_bellman_q, stationary_distribution, state_action_kernel,
    EvaluationResult, OptimalSolution, PolicyKernel, Reachability, StateActionKernel,
    ENUMERATION_LIMIT,
};
pub use io::MdpFile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Flat index of the pair `(s, a)`.
#[inline]
pub fn sa_index(s: usize, a: usize, n_actions: usize) -> usize {
    s * n_actions + a
}

/// Inverse of [`sa_index`].
#[inline]
pub fn sa_pair(idx: usize, n_actions: usize) -> (usize, usize) {
    (idx / n_actions, idx % n_actions)
}

/// A finite MDP with transition tensor `P(s'|s,a)` and reward table `r(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<T> {
    n_states: usize,
    n_actions: usize,
    /// `[(s * n_actions + a) * n_states + s']`
    transition: Vec<T>,
    /// `[s * n_actions + a]`
    reward: Vec<T>,
    r_max: T,
}

impl<T: Real> Mdp<T> {
    /// Builds an MDP from nested `[s][a][s']` transitions and `[s][a]` rewards.
    pub fn new(transition: Vec<Vec<Vec<T>>>, reward: Vec<Vec<T>>) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::Dimension(format!(
                    "transition[{s}] has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::Dimension(format!(
                        "transition[{s}][{a}] has {} entries, expected {n_states}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
        }
        if reward.len() != n_states {
            return Err(Error::Dimension(format!(
                "reward has {} states, expected {n_states}",
                reward.len()
            )));
        }
        let mut r = Vec::with_capacity(n_states * n_actions);
        for (s, row) in reward.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::Dimension(format!(
                    "reward[{s}] has {} actions, expected {n_actions}",
                    row.len()
                )));
            }
            r.extend_from_slice(row);
        }
        Self::from_flat(n_states, n_actions, flat, r)
    }

    /// Builds an MDP from flat buffers in the crate's index convention.
    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transition: Vec<T>,
        reward: Vec<T>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel(format!(
                "need at least one state and one action (got {n_states} x {n_actions})"
            )));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::Dimension(format!(
                "transition buffer has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "reward buffer has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        let tol = T::stochastic_tol(n_states);
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            let (s, a) = sa_pair(row_idx, n_actions);
            if let Some((j, p)) = row
                .iter()
                .enumerate()
                .find(|(_, p)| !p.is_finite() || **p < T::zero())
            {
                return Err(Error::InvalidModel(format!(
                    "P(.|s={s},a={a}) has invalid entry {p} at s'={j}"
                )));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidModel(format!(
                    "P(.|s={s},a={a}) sums to {sum}, not 1"
                )));
            }
        }
        if let Some((i, r)) = reward.iter().enumerate().find(|(_, r)| !r.is_finite()) {
            let (s, a) = sa_pair(i, n_actions);
            return Err(Error::InvalidModel(format!("r(s={s},a={a}) = {r} is not finite")));
        }
        let r_max = crate::scalar::inf_norm(&reward);
        Ok(Mdp {
            n_states,
            n_actions,
            transition,
            reward,
            r_max,
        })
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `|S| * |A|`
    #[inline]
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    #[inline]
    pub fn sa_index(&self, s: usize, a: usize) -> usize {
        sa_index(s, a, self.n_actions)
    }

    /// `P(s'|s,a)`
    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> T {
        self.transition[self.sa_index(s, a) * self.n_states + next]
    }

    /// The distribution `P(.|s,a)`.
    #[inline]
    pub fn next_dist(&self, s: usize, a: usize) -> &[T] {
        let base = self.sa_index(s, a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> T {
        self.reward[self.sa_index(s, a)]
    }

    /// Rewards in flat state-action order.
    pub fn rewards(&self) -> &[T] {
        &self.reward
    }

    pub fn transitions_flat(&self) -> &[T] {
        &self.transition
    }

    /// `max_{s,a} |r(s,a)|`
    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn transition_nested(&self) -> Vec<Vec<Vec<T>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| self.next_dist(s, a).to_vec())
                    .collect()
            })
            .collect()
    }

    pub fn reward_nested(&self) -> Vec<Vec<T>> {
        self.reward.chunks(self.n_actions).map(<[T]>::to_vec).collect()
    }

    /// `min_{s,a} P(s|s,a)`
    pub fn min_self_loop(&self) -> T {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| self.p(s, a, s))
            .fold(T::infinity(), T::min)
    }

    /// Number of deterministic policies, `None` on overflow.
    pub fn deterministic_policy_count(&self) -> Option<usize> {
        self.n_actions.checked_pow(self.n_states as u32)
    }
}

/// A randomized stationary policy `mu(a|s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>", bound = "")]
pub struct StochasticPolicy<T: Real> {
    n_states: usize,
    n_actions: usize,
    probs: Vec<T>,
}

impl<T: Real> StochasticPolicy<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if let Some((s, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_actions) {
            return Err(Error::Dimension(format!(
                "policy row {s} has {} actions, expected {n_actions}",
                r.len()
            )));
        }
        Self::from_flat(n_states, n_actions, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(n_states: usize, n_actions: usize, probs: Vec<T>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "policy buffer of {} entries for {n_states} states x {n_actions} actions",
                probs.len()
            )));
        }
        let tol = T::stochastic_tol(n_actions);
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < T::zero()) {
                return Err(Error::InvalidModel(format!("policy row {s} has invalid entries")));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidModel(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(StochasticPolicy {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        if let Some((s, a)) = actions.iter().enumerate().find(|(_, a)| **a >= n_actions) {
            return Err(Error::Dimension(format!(
                "action {a} in state {s} out of range (n_actions = {n_actions})"
            )));
        }
        let mut probs = vec![T::zero(); actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[sa_index(s, a, n_actions)] = T::one();
        }
        Self::from_flat(actions.len(), n_actions, probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(n_actions);
        StochasticPolicy {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[sa_index(s, a, self.n_actions)]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn min_prob(&self) -> T {
        self.probs.iter().copied().fold(T::infinity(), T::min)
    }

    /// The selected actions if every row is a point mass.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(s);
                let ones: Vec<usize> = (0..self.n_actions).filter(|&a| row[a] == T::one()).collect();
                (ones.len() == 1).then(|| ones[0])
            })
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.as_deterministic().is_some()
    }

    pub(crate) fn check_shape(&self, mdp: &Mdp<T>) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::Dimension(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

impl<T: Real> TryFrom<Vec<Vec<T>>> for StochasticPolicy<T> {
    type Error = Error;
    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl<T: Real> From<StochasticPolicy<T>> for Vec<Vec<T>> {
    fn from(p: StochasticPolicy<T>) -> Self {
        p.probs.chunks(p.n_actions).map(<[T]>::to_vec).collect()
    }
}

/// Iterates all `n_actions^n_states` deterministic policies in lexicographic
/// order (state 0 varies slowest).
pub fn deterministic_policies(n_states: usize, n_actions: usize) -> DeterministicPolicies {
    DeterministicPolicies {
        n_actions,
        next: Some(vec![0; n_states]),
    }
}

pub struct DeterministicPolicies {
    n_actions: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for DeterministicPolicies {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.n_actions {
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}
