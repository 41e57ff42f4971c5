//! Model transformations that enforce irreducibility (exploration mixing) and
//! positive self-loops (Schweitzer lazification).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{deterministic_policies, solve_bellman, Mdp, StochasticPolicy, ENUMERATION_LIMIT};
use crate::scalar::{span, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    ExplorationMix,
    Aperiodicity,
}

/// What was applied, with which parameter, to which source model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub kind: TransformKind,
    /// ε for exploration mixing, κ for the aperiodicity transform; in (0, 1).
    pub parameter: f64,
    /// Content hash of the source MDP document.
    pub source: String,
}

fn check_unit_interval<T: Real>(name: &str, x: T) -> Result<()> {
    if !(x > T::zero() && x < T::one()) {
        return Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

/// Blends every action with the uniformly random action:
/// `P̂(.|s,a) = (1-ε) P(.|s,a) + ε mean_a' P(.|s,a')`, and likewise for rewards.
pub fn exploration_mix<T: Real>(mdp: &Mdp<T>, eps: T) -> Result<(Mdp<T>, TransformRecord)> {
    check_unit_interval("eps", eps)?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let inv_m = T::one() / T::from_usize_lossy(m);
    let keep = T::one() - eps;
    let mut transition = Vec::with_capacity(n * m * n);
    let mut reward = Vec::with_capacity(n * m);
    for s in 0..n {
        let mut uniform_row = vec![T::zero(); n];
        for a in 0..m {
            for (u, &p) in uniform_row.iter_mut().zip(mdp.next_dist(s, a)) {
                *u += p * inv_m;
            }
        }
        let uniform_r: T = (0..m).map(|a| mdp.r(s, a)).sum::<T>() * inv_m;
        for a in 0..m {
            transition.extend(
                mdp.next_dist(s, a)
                    .iter()
                    .zip(&uniform_row)
                    .map(|(&p, &u)| keep * p + eps * u),
            );
            reward.push(keep * mdp.r(s, a) + eps * uniform_r);
        }
    }
    let out = Mdp::from_flat(n, m, renormalize(transition, n), reward)?;
    Ok((
        out,
        TransformRecord {
            kind: TransformKind::ExplorationMix,
            parameter: eps.to_f64_lossy(),
            source: mdp.content_hash(),
        },
    ))
}

/// Schweitzer transform: `P̂(i|i,a) = κ + (1-κ) P(i|i,a)`,
/// `P̂(j|i,a) = (1-κ) P(j|i,a)`, `r̂ = (1-κ) r`.
pub fn aperiodicity_transform<T: Real>(
    mdp: &Mdp<T>,
    kappa: T,
) -> Result<(Mdp<T>, TransformRecord)> {
    check_unit_interval("kappa", kappa)?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let keep = T::one() - kappa;
    let mut transition = Vec::with_capacity(n * m * n);
    for s in 0..n {
        for a in 0..m {
            transition.extend(mdp.next_dist(s, a).iter().enumerate().map(|(j, &p)| {
                if j == s {
                    kappa + keep * p
                } else {
                    keep * p
                }
            }));
        }
    }
    let reward = mdp.rewards().iter().map(|&r| keep * r).collect();
    let out = Mdp::from_flat(n, m, renormalize(transition, n), reward)?;
    Ok((
        out,
        TransformRecord {
            kind: TransformKind::Aperiodicity,
            parameter: kappa.to_f64_lossy(),
            source: mdp.content_hash(),
        },
    ))
}

/// `ε (2 r_max + max_μ span(ĥ_μ))`, a bound on `|J* − Ĵ*|` between a model
/// and its exploration mix, with the span taken over every deterministic
/// policy of the mixed model and `r_max` over the original rewards.
pub fn mixing_loss_bound<T: Real>(original: &Mdp<T>, eps: T) -> Result<T> {
    let (mixed, _) = exploration_mix(original, eps)?;
    let m = mixed.n_actions();
    match mixed.deterministic_policy_count() {
        Some(c) if c <= ENUMERATION_LIMIT => {}
        _ => {
            return Err(Error::Precondition(format!(
                "mixing loss bound enumerates policies; {}^{} exceeds {ENUMERATION_LIMIT}",
                m,
                mixed.n_states()
            )))
        }
    }
    let mut worst = T::zero();
    for actions in deterministic_policies(mixed.n_states(), m) {
        let mu = StochasticPolicy::deterministic(&actions, m)?;
        worst = worst.max(span(&solve_bellman(&mixed, &mu, 0)?.bias));
    }
    Ok(eps * (T::lit(2.0) * original.r_max() + worst))
}

/// Applies exploration mixing (if `eps` is set) and then the aperiodicity
/// transform (if `kappa` is set), returning the records in application order.
pub fn standard_pipeline<T: Real>(
    mdp: &Mdp<T>,
    eps: Option<T>,
    kappa: Option<T>,
) -> Result<(Mdp<T>, Vec<TransformRecord>)> {
    let mut current = mdp.clone();
    let mut records = Vec::new();
    if let Some(e) = eps {
        let (m, r) = exploration_mix(&current, e)?;
        current = m;
        records.push(r);
    }
    if let Some(k) = kappa {
        let (m, r) = aperiodicity_transform(&current, k)?;
        current = m;
        records.push(r);
    }
    Ok((current, records))
}

// Rounding can leave a mixed row a few ulps away from 1; rescale so the
// output always passes the model's stochasticity check.
fn renormalize<T: Real>(mut transition: Vec<T>, n: usize) -> Vec<T> {
    for row in transition.chunks_mut(n) {
        let s: T = row.iter().copied().sum();
        if s > T::zero() {
            row.iter_mut().for_each(|p| *p /= s);
        }
    }
    transition
}
