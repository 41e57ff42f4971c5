//! Closed-form performance bounds for approximate policy iteration.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, 1]")));
    }
    Ok(())
}

fn check_budgets<T: Real>(eps: T, delta: T) -> Result<()> {
    if !(eps >= T::zero() && delta >= T::zero()) {
        return Err(Error::Domain(format!("error budgets must be >= 0 (eps = {eps}, delta = {delta})")));
    }
    Ok(())
}

/// `(1-γ)^k` evaluated as `powi` when `k` fits, so that `k = 0` is exactly 1.
fn decay<T: Real>(gamma: T, k: usize) -> T {
    let base = T::one() - gamma;
    match i32::try_from(k) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(T::from_usize_lossy(k)),
    }
}

/// Bound on `J* − J_{μ_{k+1}}` after `k` iterations:
/// `[(1−(1−γ)^k)/γ]((1+γ)ε + 2δ) + (1−γ)^k (J* − l0 + ε)`.
pub fn theorem_bound<T: Real>(k: usize, gamma: T, eps: T, delta: T, j_star: T, l0: T) -> Result<T> {
    check_gamma(gamma)?;
    check_budgets(eps, delta)?;
    let d = decay(gamma, k);
    let per_step = (T::one() + gamma) * eps + T::lit(2.0) * delta;
    Ok((T::one() - d) / gamma * per_step + d * (j_star - l0 + eps))
}

/// `k → ∞` limit of [`theorem_bound`]: `((1+γ)ε + 2δ)/γ`.
pub fn theorem_limit<T: Real>(gamma: T, eps: T, delta: T) -> Result<T> {
    check_gamma(gamma)?;
    check_budgets(eps, delta)?;
    Ok(((T::one() + gamma) * eps + T::lit(2.0) * delta) / gamma)
}

/// Bound on the residual spread `u_{k−1} − l_{k−1}`:
/// `[(1−(1−γ)^k)/γ²]((1+γ)ε + 2δ) + (2δ+ε)/γ + (1−γ)^k (J* − l0 + ε)/γ`.
pub fn gap_bound<T: Real>(k: usize, gamma: T, eps: T, delta: T, j_star: T, l0: T) -> Result<T> {
    check_gamma(gamma)?;
    check_budgets(eps, delta)?;
    let d = decay(gamma, k);
    let two = T::lit(2.0);
    let per_step = (T::one() + gamma) * eps + two * delta;
    Ok((T::one() - d) / (gamma * gamma) * per_step
        + (two * delta + eps) / gamma
        + d * (j_star - l0 + eps) / gamma)
}

/// `k → ∞` limit of [`gap_bound`]: `(ε(1+2γ) + 2δ(1+γ))/γ²`.
pub fn gap_limit<T: Real>(gamma: T, eps: T, delta: T) -> Result<T> {
    check_gamma(gamma)?;
    check_budgets(eps, delta)?;
    let two = T::lit(2.0);
    Ok((eps * (T::one() + two * gamma) + two * delta * (T::one() + gamma)) / (gamma * gamma))
}

/// Discounted-reward API limit `(ε + 2αδ)/(1−α)²`.
pub fn discounted_bound<T: Real>(alpha: T, eps: T, delta: T) -> Result<T> {
    check_alpha(alpha)?;
    check_budgets(eps, delta)?;
    let h = T::one() / (T::one() - alpha);
    Ok(h * h * (eps + T::lit(2.0) * alpha * delta))
}

/// The same bound multiplied by `(1−α)`: `(ε + 2αδ)/(1−α)`.
pub fn discounted_bound_rescaled<T: Real>(alpha: T, eps: T, delta: T) -> Result<T> {
    Ok(discounted_bound(alpha, eps, delta)? * (T::one() - alpha))
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !(alpha >= T::zero() && alpha < T::one()) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in [0, 1)")));
    }
    Ok(())
}
