//! Average-reward Bellman operators over state values `h` and state-action
//! values `Q` (flat index `s * |A| + a`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, StochasticPolicy};
use crate::scalar::{inf_dist, Real};

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// `r(s,a) + Σ_s' P(s'|s,a) h(s')` for every pair, flat indexed.
pub fn action_values<T: Real>(mdp: &Mdp<T>, h: &[T]) -> Result<Vec<T>> {
    check_len("h", h.len(), mdp.n_states())?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut out = Vec::with_capacity(n * m);
    for s in 0..n {
        for a in 0..m {
            let ev: T = mdp.next_dist(s, a).iter().zip(h).map(|(&p, &v)| p * v).sum();
            out.push(mdp.r(s, a) + ev);
        }
    }
    Ok(out)
}

/// `T_μ h = r_μ + P_μ h`.
pub fn apply_policy_op<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    h: &[T],
) -> Result<Vec<T>> {
    policy.check_shape(mdp)?;
    let qa = action_values(mdp, h)?;
    let m = mdp.n_actions();
    Ok((0..mdp.n_states())
        .map(|s| policy.row(s).iter().zip(&qa[s * m..(s + 1) * m]).map(|(&p, &q)| p * q).sum())
        .collect())
}

/// `T h`, with the maximizing action per state (lowest index on ties).
pub fn apply_optimal_op<T: Real>(mdp: &Mdp<T>, h: &[T]) -> Result<(Vec<T>, Vec<usize>)> {
    let qa = action_values(mdp, h)?;
    Ok(row_max(&qa, mdp.n_actions()))
}

fn row_max<T: Real>(flat: &[T], m: usize) -> (Vec<T>, Vec<usize>) {
    flat.chunks(m)
        .map(|row| {
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            (row[best], best)
        })
        .unzip()
}

/// `T̃_μ h = T_μ h − (T_μ h)(anchor)·1`.
pub fn apply_relative_op<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    h: &[T],
    anchor: usize,
) -> Result<Vec<T>> {
    if anchor >= mdp.n_states() {
        return Err(Error::Dimension(format!("anchor {anchor} out of range")));
    }
    let mut out = apply_policy_op(mdp, policy, h)?;
    let c = out[anchor];
    out.iter_mut().for_each(|v| *v -= c);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RviConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for RviConfig {
    fn default() -> Self {
        RviConfig { tol: 1e-10, max_iters: 100_000 }
    }
}

/// Iterates the relative operator from `h0` until successive iterates differ
/// by less than `tol` in sup norm. Returns the fixed point and the number of
/// applications performed.
pub fn relative_value_iteration<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    h0: &[T],
    anchor: usize,
    config: &RviConfig,
) -> Result<(Vec<T>, usize)> {
    let tol = T::lit(config.tol);
    let mut h = h0.to_vec();
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iters {
        let next = apply_relative_op(mdp, policy, &h, anchor)?;
        let diff = inf_dist(&next, &h);
        if !diff.is_finite() {
            return Err(Error::Numerical { step: it, detail: "non-finite iterate".into() });
        }
        residual = diff.to_f64_lossy();
        h = next;
        if diff < tol {
            return Ok((h, it));
        }
    }
    Err(Error::Convergence { iterations: config.max_iters, residual })
}

/// `(T^Q_μ Q)(s,a) = r(s,a) + Σ_{s',a'} μ(a'|s') P(s'|s,a) Q(s',a')`.
pub fn apply_policy_op_q<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    q: &[T],
) -> Result<Vec<T>> {
    policy.check_shape(mdp)?;
    check_len("Q", q.len(), mdp.n_pairs())?;
    let m = mdp.n_actions();
    let v: Vec<T> = (0..mdp.n_states())
        .map(|s| policy.row(s).iter().zip(&q[s * m..(s + 1) * m]).map(|(&p, &x)| p * x).sum())
        .collect();
    action_values(mdp, &v)
}

/// `(T^Q Q)(s,a) = r(s,a) + Σ_s' P(s'|s,a) max_a' Q(s',a')`.
pub fn apply_optimal_op_q<T: Real>(mdp: &Mdp<T>, q: &[T]) -> Result<Vec<T>> {
    check_len("Q", q.len(), mdp.n_pairs())?;
    let (v, _) = row_max(q, mdp.n_actions());
    action_values(mdp, &v)
}

/// Relative form of `T^Q_μ`, anchored at the flat pair index `anchor`.
pub fn apply_relative_op_q<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    q: &[T],
    anchor: usize,
) -> Result<Vec<T>> {
    if anchor >= mdp.n_pairs() {
        return Err(Error::Dimension(format!("anchor pair {anchor} out of range")));
    }
    let mut out = apply_policy_op_q(mdp, policy, q)?;
    let c = out[anchor];
    out.iter_mut().for_each(|v| *v -= c);
    Ok(out)
}

/// Extremes of the optimality residual `T h − h` (or `T^Q Q − Q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats<T> {
    pub u: T,
    pub l: T,
    pub argmax: usize,
    pub argmin: usize,
}

impl<T: Real> GapStats<T> {
    fn from_residual(res: &[T]) -> Self {
        let (mut argmax, mut argmin) = (0, 0);
        for (i, &v) in res.iter().enumerate() {
            if v > res[argmax] {
                argmax = i;
            }
            if v < res[argmin] {
                argmin = i;
            }
        }
        GapStats { u: res[argmax], l: res[argmin], argmax, argmin }
    }

    pub fn span(&self) -> T {
        self.u - self.l
    }
}

/// `T h − h`.
pub fn optimality_residual<T: Real>(mdp: &Mdp<T>, h: &[T]) -> Result<Vec<T>> {
    let (th, _) = apply_optimal_op(mdp, h)?;
    Ok(th.iter().zip(h).map(|(&a, &b)| a - b).collect())
}

pub fn gap_stats<T: Real>(mdp: &Mdp<T>, h: &[T]) -> Result<GapStats<T>> {
    Ok(GapStats::from_residual(&optimality_residual(mdp, h)?))
}

pub fn gap_stats_q<T: Real>(mdp: &Mdp<T>, q: &[T]) -> Result<GapStats<T>> {
    let tq = apply_optimal_op_q(mdp, q)?;
    let res: Vec<T> = tq.iter().zip(q).map(|(&a, &b)| a - b).collect();
    Ok(GapStats::from_residual(&res))
}

/// `‖T h − T_μ h‖∞`, the improvement error of `policy` against `h`.
pub fn improvement_error<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    h: &[T],
) -> Result<T> {
    let (th, _) = apply_optimal_op(mdp, h)?;
    Ok(inf_dist(&th, &apply_policy_op(mdp, policy, h)?))
}

/// `‖T^Q Q − T^Q_μ Q‖∞`.
pub fn improvement_error_q<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    q: &[T],
) -> Result<T> {
    Ok(inf_dist(&apply_optimal_op_q(mdp, q)?, &apply_policy_op_q(mdp, policy, q)?))
}
