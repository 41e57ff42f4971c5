use serde::{Deserialize, Serialize};

use super::bounds::{check_alpha, discounted_bound, discounted_bound_rescaled};
use super::{improve, ErrorInjector, InjectorMode};
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix};
use crate::mdp::{policy_kernel, Mdp, StochasticPolicy};
use crate::rng::{stream, Component};
use crate::scalar::{dot, inf_dist, Real};
use rand::Rng as _;

/// `V_μ = (I − αP_μ)^{-1} r_μ`.
pub fn evaluate_discounted<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    alpha: T,
) -> Result<Vec<T>> {
    check_alpha(alpha)?;
    let pk = policy_kernel(mdp, policy)?;
    let n = mdp.n_states();
    let a = Matrix::identity(n).sub(&pk.kernel.scale(alpha));
    solve(&a, &pk.reward_vec)
}

fn discounted_action_values<T: Real>(mdp: &Mdp<T>, v: &[T], alpha: T) -> Vec<T> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut out = Vec::with_capacity(n * m);
    for s in 0..n {
        for a in 0..m {
            out.push(mdp.r(s, a) + alpha * dot(mdp.next_dist(s, a), v));
        }
    }
    out
}

/// Optimal discounted values and a deterministic optimal policy, by exact
/// policy iteration.
pub fn discounted_optimal<T: Real>(mdp: &Mdp<T>, alpha: T) -> Result<(Vec<T>, Vec<usize>)> {
    check_alpha(alpha)?;
    let m = mdp.n_actions();
    let mut actions = vec![0usize; mdp.n_states()];
    let tol = T::lit(1e-12) * (T::one() + mdp.r_max()) / (T::one() - alpha);
    for _ in 0..10_000 {
        let v = evaluate_discounted(mdp, &StochasticPolicy::deterministic(&actions, m)?, alpha)?;
        let qa = discounted_action_values(mdp, &v, alpha);
        let mut changed = false;
        for (s, row) in qa.chunks(m).enumerate() {
            let best = (0..m).fold(actions[s], |b, a| if row[a] > row[b] + tol { a } else { b });
            if best != actions[s] {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok((v, actions));
        }
    }
    Err(Error::Convergence { iterations: 10_000, residual: f64::NAN })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedRow<T> {
    pub k: usize,
    pub policy: Vec<usize>,
    /// `‖J_{μ_{k+1}} − J*^α‖∞`
    pub error: T,
    /// `(1−α)·error`
    pub rescaled_error: T,
    pub eps_realized: T,
    pub delta_realized: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedMeta<T> {
    pub alpha: T,
    pub injector: ErrorInjector,
    pub j_star: Vec<T>,
    /// `(ε + 2αδ)/(1−α)²`
    pub bound: T,
    /// `(ε + 2αδ)/(1−α)`
    pub rescaled_bound: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedTrace<T> {
    pub meta: DiscountedMeta<T>,
    pub rows: Vec<DiscountedRow<T>>,
}

impl<T: Real> DiscountedTrace<T> {
    /// Largest error over the second half of the run, as a finite-horizon
    /// stand-in for the lim sup.
    pub fn tail_error(&self) -> T {
        let start = self.rows.len() / 2;
        self.rows[start..].iter().fold(T::zero(), |m, r| m.max(r.error))
    }

    pub fn tail_rescaled_error(&self) -> T {
        self.tail_error() * (T::one() - self.meta.alpha)
    }
}

/// Discounted approximate policy iteration from `j0` with the same injector
/// semantics as [`super::run_api`].
pub fn run_discounted_api<T: Real>(
    mdp: &Mdp<T>,
    j0: &[T],
    alpha: T,
    injector: &ErrorInjector,
    iterations: usize,
) -> Result<DiscountedTrace<T>> {
    check_alpha(alpha)?;
    injector.validate()?;
    let n = mdp.n_states();
    if j0.len() != n {
        return Err(Error::Dimension(format!("J0 has length {}, expected {n}", j0.len())));
    }
    let (eps_b, delta_b) = injector.effective_budgets();
    let (eps, delta) = (T::lit(eps_b), T::lit(delta_b));
    let (j_star, _) = discounted_optimal(mdp, alpha)?;
    let mut rng = stream(injector.seed, Component::Injector, 1);
    let m = mdp.n_actions();
    let mut j = j0.to_vec();
    let mut rows = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let qa = discounted_action_values(mdp, &j, alpha);
        let (actions, eps_realized) = improve(&qa, m, eps, injector.mode, &mut rng);
        let v = evaluate_discounted(mdp, &StochasticPolicy::deterministic(&actions, m)?, alpha)?;
        let noise: Vec<T> = match injector.mode {
            InjectorMode::None => vec![T::zero(); n],
            InjectorMode::WorstWithinBudget => {
                let q = discounted_action_values(mdp, &v, alpha);
                let res: Vec<T> = (0..n)
                    .map(|s| q[s * m..(s + 1) * m].iter().copied().fold(T::neg_infinity(), T::max) - v[s])
                    .collect();
                let argmin = (1..n).fold(0, |b, i| if res[i] < res[b] { i } else { b });
                (0..n).map(|i| if i == argmin { delta } else { -delta }).collect()
            }
            InjectorMode::RandomWithinBudget => (0..n)
                .map(|_| if delta_b > 0.0 { T::lit(rng.random_range(-delta_b..=delta_b)) } else { T::zero() })
                .collect(),
        };
        let next: Vec<T> = v.iter().zip(&noise).map(|(&a, &b)| a + b).collect();
        let error = inf_dist(&v, &j_star);
        rows.push(DiscountedRow {
            k,
            policy: actions,
            error,
            rescaled_error: error * (T::one() - alpha),
            eps_realized,
            delta_realized: inf_dist(&next, &v),
        });
        j = next;
    }
    Ok(DiscountedTrace {
        meta: DiscountedMeta {
            alpha,
            injector: *injector,
            j_star,
            bound: discounted_bound(alpha, eps, delta)?,
            rescaled_bound: discounted_bound_rescaled(alpha, eps, delta)?,
            iterations,
        },
        rows,
    })
}
