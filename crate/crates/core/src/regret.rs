//! Regret accounting for the policy-based loop: the split of total regret
//! into pseudo regret and estimation term, the mirror-descent pseudo-regret
//! bound at `β = √τ`, and the trajectory length that balances its terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::bellman::gap_stats_q;
use crate::mdp::{gamma_lower_bound_sa, optimal_solution, solve_bellman_q, Mdp, StochasticPolicy};
use crate::rl::{
    run_policy_based, sample_trajectory, td_lambda_run, FeatureMap, InitialQ, PolicyUpdateRule,
    RlConfig, RlEvaluation, RlTrace, TdConfig, UpdateKind,
};
use crate::rng::{stream, Component};
use crate::scalar::{inf_dist, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    /// `K = τ · T`
    pub horizon_k: usize,
    pub tau: usize,
    /// `J_{μ_t}` for `t = 1..T`.
    pub gains: Vec<f64>,
    pub j_star: f64,
    /// `τ Σ_t (J* − J_{μ_t})`
    pub pseudo_regret: f64,
    /// `Σ_t (J_{μ_t} − r_t)` over all `K` samples, when rewards were recorded.
    pub estimation_term: Option<f64>,
}

impl RegretLedger {
    /// `pseudo_regret + estimation_term`, i.e. `Σ_t (J* − r_t)`.
    pub fn total_regret(&self) -> Option<f64> {
        self.estimation_term.map(|e| e + self.pseudo_regret)
    }

    /// Recomputes the pseudo regret from the gains.
    pub fn check(&self) -> Result<()> {
        if self.horizon_k != self.tau * self.gains.len() {
            return Err(Error::Dimension(format!(
                "K = {} is not tau ({}) times the iteration count ({})",
                self.horizon_k,
                self.tau,
                self.gains.len()
            )));
        }
        let again = pseudo_regret(&self.gains, self.tau, self.j_star);
        if (again - self.pseudo_regret).abs() > 1e-9 * (1.0 + again.abs()) {
            return Err(Error::Numerical {
                step: 0,
                detail: format!("stored pseudo regret {} != recomputed {again}", self.pseudo_regret),
            });
        }
        Ok(())
    }
}

/// `τ Σ_t (J* − J_{μ_t})`
pub fn pseudo_regret(gains: &[f64], tau: usize, j_star: f64) -> f64 {
    tau as f64 * gains.iter().map(|g| j_star - g).sum::<f64>()
}

/// Splits `Σ_t (J* − r_t)` into `(pseudo_regret, estimation_term)` where
/// gain `i` covers rewards `i·τ .. (i+1)·τ`.
pub fn decompose_regret(rewards: &[f64], gains: &[f64], j_star: f64) -> Result<(f64, f64)> {
    if gains.is_empty() || !rewards.len().is_multiple_of(gains.len()) {
        return Err(Error::Dimension(format!(
            "{} rewards cannot be split evenly over {} gains",
            rewards.len(),
            gains.len()
        )));
    }
    let tau = rewards.len() / gains.len();
    let estimation = rewards
        .chunks(tau)
        .zip(gains)
        .map(|(rs, g)| rs.iter().map(|r| g - r).sum::<f64>())
        .sum();
    Ok((pseudo_regret(gains, tau, j_star), estimation))
}

/// Ledger over rows `1..=T` of a policy-based trace (the initial evaluation
/// of `μ_0` is not charged).
pub fn ledger_from_trace<T: Real>(trace: &RlTrace<T>) -> Result<RegretLedger> {
    let tau = trace.meta.config.tau;
    let rows = &trace.rows[1.min(trace.rows.len())..];
    let gains: Vec<f64> = rows.iter().map(|r| r.j_mu.to_f64_lossy()).collect();
    let estimation_term = rows
        .iter()
        .map(|r| r.reward_sum.map(|s| r.j_mu.to_f64_lossy() * r.samples as f64 - s.to_f64_lossy()))
        .sum::<Option<f64>>();
    let j_star = trace.meta.j_star.to_f64_lossy();
    Ok(RegretLedger {
        horizon_k: tau * gains.len(),
        tau,
        pseudo_regret: pseudo_regret(&gains, tau, j_star),
        gains,
        j_star,
        estimation_term,
    })
}

/// `c5 = (1+γ) ln(1/ω) + 2Ĉ`
pub fn c5(gamma: f64, omega: f64, c_hat: f64) -> Result<f64> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::Domain(format!("omega = {omega} must lie in (0, 1]")));
    }
    Ok((1.0 + gamma) * (1.0 / omega).ln() + 2.0 * c_hat)
}

/// `c6 = 2 c5^{2/3} c0^{1/3}`
pub fn c6(c0: f64, c5: f64) -> f64 {
    2.0 * c5.powf(2.0 / 3.0) * c0.cbrt()
}

/// `(1/γ)(τ c0 + 2Kδ̄₀ + K c5/√τ)` with `c5 = (1+γ) ln(1/ω) + 2Ĉ`.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_regret_bound(
    k: usize,
    tau: usize,
    gamma: f64,
    c0: f64,
    delta0_bar: f64,
    omega: f64,
    c_hat: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, 1]")));
    }
    if k == 0 || tau == 0 {
        return Err(Error::Domain("K and tau must be positive".into()));
    }
    if !(c0 >= 0.0 && delta0_bar >= 0.0 && c_hat >= 0.0) {
        return Err(Error::Domain(format!(
            "c0, delta0_bar and C_hat must be non-negative; got {c0}, {delta0_bar}, {c_hat}"
        )));
    }
    let c5 = c5(gamma, omega, c_hat)?;
    let (k, tau) = (k as f64, tau as f64);
    Ok((tau * c0 + 2.0 * k * delta0_bar + k * c5 / tau.sqrt()) / gamma)
}

/// `round((K c5 / c0)^{2/3})` clipped to `[1, K]`.
pub fn optimize_tau(k: usize, c0: f64, c5: f64) -> Result<usize> {
    if k == 0 || !(c0 > 0.0) || !(c5 > 0.0) {
        return Err(Error::Domain(format!("optimize_tau needs K, c0, c5 > 0; got {k}, {c0}, {c5}")));
    }
    let t = (k as f64 * c5 / c0).powf(2.0 / 3.0).round();
    Ok((t as usize).clamp(1, k))
}

/// Least squares through the origin of `err` against `1/√τ`; needs at least
/// four grid points.
pub fn estimate_c_hat(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::Domain(format!("C_hat needs at least 4 grid points, got {}", points.len())));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(tau, err) in points {
        if tau == 0 || !err.is_finite() {
            return Err(Error::Domain(format!("bad grid point ({tau}, {err})")));
        }
        let x = 1.0 / (tau as f64).sqrt();
        sxy += x * err;
        sxx += x * x;
    }
    Ok(sxy / sxx)
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Domain("log-log fit needs two or more positive points".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

/// Mean TD error `‖Φθ − Q_μ‖∞` per trajectory length, averaged over seeds.
pub fn td_error_grid<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    features: &FeatureMap<T>,
    td: &TdConfig,
    anchor: usize,
    taus: &[usize],
    seeds: &[u64],
) -> Result<Vec<(usize, f64)>> {
    if seeds.is_empty() {
        return Err(Error::Domain("TD error grid needs at least one seed".into()));
    }
    let q = solve_bellman_q(mdp, policy, anchor)?.bias;
    taus.iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut total = 0.0;
            for &seed in seeds {
                let mut rng = stream(seed, Component::Sampling, i as u32);
                let traj = sample_trajectory(mdp, policy, tau, &mut rng, None)?;
                let st = td_lambda_run(&traj, features, td, anchor)?;
                total += inf_dist(&features.values(&st.theta), &q).to_f64_lossy();
            }
            Ok((tau, total / seeds.len() as f64))
        })
        .collect()
}

/// Trajectory lengths used to fit `Ĉ` unless configured otherwise.
pub const DEFAULT_C_HAT_TAUS: [usize; 4] = [250, 1000, 4000, 16000];

/// Constants fixed before a regret run. The mirror-descent loop starts from
/// `Q_0 = 0` and the uniform `μ_0`, so `c0 = J* − min r`, `ω = 1/|A|` for the
/// first policy, and `γ` is that of the uniform policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPlan {
    pub c0: f64,
    pub gamma: f64,
    pub omega: f64,
    pub c_hat: f64,
    pub c5: f64,
    /// `(τ, mean TD error)` points behind `c_hat`.
    pub c_hat_grid: Vec<(usize, f64)>,
}

pub fn plan_regret<T: Real>(
    mdp: &Mdp<T>,
    features: &FeatureMap<T>,
    td: &TdConfig,
    anchor: usize,
    taus: &[usize],
    seeds: &[u64],
) -> Result<RegretPlan> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let uniform = StochasticPolicy::uniform(n, m);
    let c_hat_grid = td_error_grid(mdp, &uniform, features, td, anchor, taus, seeds)?;
    let c_hat = estimate_c_hat(&c_hat_grid)?;
    let opt = optimal_solution(mdp, anchor / m)?;
    let l0 = gap_stats_q(mdp, &vec![T::zero(); mdp.n_pairs()])?.l;
    let c0 = (opt.gain - l0).to_f64_lossy();
    let gamma = gamma_lower_bound_sa(mdp, std::slice::from_ref(&uniform))?.to_f64_lossy();
    let omega = 1.0 / m as f64;
    Ok(RegretPlan { c0, gamma, omega, c_hat, c5: c5(gamma, omega, c_hat)?, c_hat_grid })
}

/// One mirror-descent run at horizon `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRun {
    pub k_target: usize,
    pub tau: usize,
    pub iterations: usize,
    pub seed: u64,
    pub ledger: RegretLedger,
    /// Bound from the constants measured on the trace itself.
    pub bound: f64,
}

impl RegretRun {
    pub fn slack(&self) -> f64 {
        self.bound - self.ledger.pseudo_regret
    }
}

/// `τ = optimize_tau(K, c0, c5)`, `T = ⌊K/τ⌋`, `β = √τ`, mirror descent from
/// `Q_0 = 0`. The bound uses the run's own `γ`, `c0`, `δ̄₀` and `min_t ω_t`
/// together with the planned `Ĉ`.
pub fn run_regret<T: Real>(
    mdp: &Mdp<T>,
    features: &FeatureMap<T>,
    plan: &RegretPlan,
    td: &TdConfig,
    anchor: usize,
    k_target: usize,
    seed: u64,
) -> Result<(RegretRun, RlTrace<T>)> {
    let tau = optimize_tau(k_target, plan.c0, plan.c5)?.max(2);
    let iterations = (k_target / tau).max(1);
    let config = RlConfig {
        rule: PolicyUpdateRule { kind: UpdateKind::MirrorDescent, beta: (tau as f64).sqrt() },
        td: *td,
        tau,
        iterations,
        anchor,
        seed,
        evaluation: RlEvaluation::Td,
        lazify: None,
        initial_q: InitialQ::Zero,
    };
    let trace = run_policy_based(mdp, features, &config)?;
    let ledger = ledger_from_trace(&trace)?;
    let m = &trace.meta;
    let bound = pseudo_regret_bound(
        ledger.horizon_k,
        tau,
        m.gamma.to_f64_lossy(),
        m.c0.to_f64_lossy().max(0.0),
        m.delta0_bar.to_f64_lossy(),
        trace.omega_min().to_f64_lossy(),
        plan.c_hat,
    )?;
    Ok((RegretRun { k_target, tau, iterations, seed, ledger, bound }, trace))
}
