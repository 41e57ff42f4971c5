//! Policy-improvement rules applied row-wise to a flat `Q` vector, and the
//! improvement-error caps that go with them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::StochasticPolicy;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Greedy,
    Softmax,
    MirrorDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyUpdateRule {
    pub kind: UpdateKind,
    pub beta: f64,
}

impl PolicyUpdateRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            UpdateKind::Greedy => self.beta >= 1.0,
            UpdateKind::Softmax => self.beta > 0.0,
            UpdateKind::MirrorDescent => self.beta >= 0.0,
        };
        if !ok || !self.beta.is_finite() {
            return Err(Error::Domain(format!(
                "beta = {} is invalid for the {:?} rule (greedy needs beta >= 1, softmax beta > 0, mirror descent beta >= 0)",
                self.beta, self.kind
            )));
        }
        Ok(())
    }

    /// Next policy from the current one and `Q_k`.
    pub fn apply<T: Real>(&self, prev: &StochasticPolicy<T>, q: &[T]) -> Result<StochasticPolicy<T>> {
        self.validate()?;
        let beta = T::lit(self.beta);
        let m = prev.n_actions();
        match self.kind {
            UpdateKind::Greedy => greedy_update(q, m, beta),
            UpdateKind::Softmax => softmax_update(q, m, beta),
            UpdateKind::MirrorDescent => mirror_descent_update(prev, q, beta),
        }
    }
}

fn check_q<T: Real>(q: &[T], m: usize) -> Result<()> {
    if m == 0 || q.is_empty() || !q.len().is_multiple_of(m) {
        return Err(Error::Dimension(format!("Q of length {} does not split into rows of {m}", q.len())));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical { step: 0, detail: "Q contains non-finite entries".into() });
    }
    Ok(())
}

fn argmax<T: Real>(row: &[T]) -> usize {
    (1..row.len()).fold(0, |b, a| if row[a] > row[b] { a } else { b })
}

/// `1/(β|A|)` on every action plus `1 − 1/β` on the row maximizer.
pub fn greedy_update<T: Real>(q: &[T], n_actions: usize, beta: T) -> Result<StochasticPolicy<T>> {
    check_q(q, n_actions)?;
    if !(beta >= T::one()) {
        return Err(Error::Domain(format!("greedy update needs beta >= 1, got {beta}")));
    }
    let base = T::one() / (beta * T::from_usize_lossy(n_actions));
    let extra = T::one() - T::one() / beta;
    let mut probs = vec![base; q.len()];
    for (s, row) in q.chunks(n_actions).enumerate() {
        probs[s * n_actions + argmax(row)] += extra;
    }
    StochasticPolicy::from_flat(q.len() / n_actions, n_actions, probs)
}

/// Row-wise `exp(βQ)` normalization.
pub fn softmax_update<T: Real>(q: &[T], n_actions: usize, beta: T) -> Result<StochasticPolicy<T>> {
    let uniform = StochasticPolicy::uniform(q.len() / n_actions.max(1), n_actions);
    check_q(q, n_actions)?;
    if !(beta > T::zero()) {
        return Err(Error::Domain(format!("softmax update needs beta > 0, got {beta}")));
    }
    tilt(&uniform, q, beta)
}

/// `μ⁺(a|s) ∝ μ(a|s) exp(βQ(s,a))`.
pub fn mirror_descent_update<T: Real>(
    prev: &StochasticPolicy<T>,
    q: &[T],
    beta: T,
) -> Result<StochasticPolicy<T>> {
    check_q(q, prev.n_actions())?;
    if q.len() != prev.probs().len() {
        return Err(Error::Dimension(format!(
            "Q has {} entries, policy has {}",
            q.len(),
            prev.probs().len()
        )));
    }
    if !(beta >= T::zero()) {
        return Err(Error::Domain(format!("mirror descent needs beta >= 0, got {beta}")));
    }
    if prev.min_prob() <= T::zero() {
        return Err(Error::Precondition(
            "mirror descent needs a strictly positive previous policy".into(),
        ));
    }
    tilt(prev, q, beta)
}

// Exponential tilt with the row maximum factored out, so the largest weight
// is exactly the prior mass and the row sum cannot vanish.
fn tilt<T: Real>(prev: &StochasticPolicy<T>, q: &[T], beta: T) -> Result<StochasticPolicy<T>> {
    let m = prev.n_actions();
    let mut probs = Vec::with_capacity(q.len());
    for (s, row) in q.chunks(m).enumerate() {
        let top = row[argmax(row)];
        let w: Vec<T> = row
            .iter()
            .zip(prev.row(s))
            .map(|(&x, &p)| p * (beta * (x - top)).exp())
            .collect();
        let z: T = w.iter().copied().sum();
        if !(z > T::zero()) || !z.is_finite() {
            return Err(Error::Numerical { step: s, detail: "policy row lost all mass".into() });
        }
        probs.extend(w.into_iter().map(|x| x / z));
    }
    StochasticPolicy::from_flat(prev.n_states(), m, probs)
}

/// `2η/β` with `η = max |Q|`.
pub fn greedy_cap<T: Real>(q: &[T], beta: T) -> T {
    let eta = q.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    T::lit(2.0) * eta / beta
}

/// `ln|A|/β`.
pub fn softmax_cap<T: Real>(n_actions: usize, beta: T) -> T {
    T::from_usize_lossy(n_actions).ln() / beta
}

/// `(1/β) ln(1/ω)` with `ω = min_s μ⁺(a*(s)|s)` for the optimal actions `a*`.
pub fn mirror_cap<T: Real>(next: &StochasticPolicy<T>, optimal_actions: &[usize], beta: T) -> T {
    let omega = omega(next, optimal_actions);
    (T::one() / omega).ln() / beta
}

/// `min_s μ(a*(s)|s)`.
pub fn omega<T: Real>(policy: &StochasticPolicy<T>, optimal_actions: &[usize]) -> T {
    optimal_actions
        .iter()
        .enumerate()
        .fold(T::one(), |w, (s, &a)| w.min(policy.prob(s, a)))
}

/// `(1/β) max_s ln(1/μ_k(argmax_a Q(s,a)|s))`, an improvement-error cap for
/// the mirror-descent step that holds for any strictly positive prior `μ_k`.
pub fn mirror_cap_from_prior<T: Real>(prev: &StochasticPolicy<T>, q: &[T], beta: T) -> T {
    let m = prev.n_actions();
    let worst = q
        .chunks(m)
        .enumerate()
        .fold(T::zero(), |w, (s, row)| w.max(-prev.prob(s, argmax(row)).ln()));
    worst / beta
}
