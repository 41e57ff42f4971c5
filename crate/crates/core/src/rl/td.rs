use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use crate::error::{Error, Result};
use crate::linalg::{orthogonal_complement, symmetric_eigenvalues, Matrix};
use crate::mdp::{Mdp, StochasticPolicy};
use crate::rng::Rng;
use crate::scalar::{dot, Real};

/// One emitted `(s, a, r)` sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub s: usize,
    pub a: usize,
    pub r: T,
    /// Flat pair index `s * |A| + a`.
    pub pair: usize,
    /// Copy of the previous sample inserted by the lazification emulation.
    pub duplicate: bool,
}

fn sample_index<T: Real>(probs: &[T], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64_lossy();
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver of mass past the last cumulative sum
    probs.iter().rposition(|p| *p > T::zero()).unwrap_or(probs.len() - 1)
}

/// Rolls out `len` samples of `policy` from a uniformly drawn start state.
///
/// With `kappa = Some(κ)` the rollout emulates the lazified model built from
/// `mdp`: each sample is followed, with probability κ, by one copy of itself,
/// and every reward is scaled by `1 − κ`.
pub fn sample_trajectory<T: Real>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    len: usize,
    rng: &mut Rng,
    kappa: Option<T>,
) -> Result<Vec<Sample<T>>> {
    policy.check_shape(mdp)?;
    if let Some(k) = kappa {
        if !(k > T::zero() && k < T::one()) {
            return Err(Error::Domain(format!("kappa = {k} must lie in (0, 1)")));
        }
    }
    let scale = kappa.map_or(T::one(), |k| T::one() - k);
    let dup_p = kappa.map_or(0.0, |k| k.to_f64_lossy());
    let mut out = Vec::with_capacity(len);
    let mut s = rng.random_range(0..mdp.n_states());
    while out.len() < len {
        let a = sample_index(policy.row(s), rng);
        let r = mdp.r(s, a) * scale;
        out.push(Sample { s, a, r, pair: mdp.sa_index(s, a), duplicate: false });
        if dup_p > 0.0 && out.len() < len && rng.random_bool(dup_p) {
            out.push(Sample { s, a, r, pair: mdp.sa_index(s, a), duplicate: true });
        }
        s = sample_index(mdp.next_dist(s, a), rng);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdConfig {
    pub lambda: f64,
    /// Step size `β_t = c1 / (t + c2)`. The default `c1 = 50, c2 = 500`
    /// keeps `c1` large enough for the `1/√τ` error rate on small tabular
    /// chains; `c1 = 1` stalls at a much slower rate.
    pub c1: f64,
    pub c2: f64,
    /// Gain estimate moves at `c_alpha · β_t`.
    pub c_alpha: f64,
}

impl Default for TdConfig {
    fn default() -> Self {
        TdConfig { lambda: 0.5, c1: 50.0, c2: 500.0, c_alpha: 1.0 }
    }
}

impl TdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.lambda)
            && self.c1 > 0.0
            && self.c2 > 0.0
            && self.c_alpha > 0.0
            && [self.c1, self.c2, self.c_alpha].iter().all(|x| x.is_finite());
        if !ok {
            return Err(Error::Domain(format!(
                "TD config needs lambda in [0,1) and positive finite c1, c2, c_alpha; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdState<T> {
    pub theta: Vec<T>,
    /// Running gain estimate `J_t`.
    pub j: T,
    /// Eligibility trace `z_t`.
    pub z: Vec<T>,
    /// Number of updates applied.
    pub step: usize,
    pub config: TdConfig,
}

/// Average-reward TD(λ) over consecutive sample pairs, starting from
/// `θ = 0, J = 0, z = 0`. The final `θ` is shifted along the constant
/// direction (when the features contain one) so that `φ(anchor)ᵀθ = 0`.
pub fn td_lambda_run<T: Real>(
    trajectory: &[Sample<T>],
    features: &FeatureMap<T>,
    config: &TdConfig,
    anchor: usize,
) -> Result<TdState<T>> {
    config.validate()?;
    if trajectory.len() < 2 {
        return Err(Error::Domain("TD needs a trajectory of length >= 2".into()));
    }
    if anchor >= features.n_pairs() {
        return Err(Error::Dimension(format!("anchor pair {anchor} out of range")));
    }
    if let Some(x) = trajectory.iter().find(|x| x.pair >= features.n_pairs()) {
        return Err(Error::Dimension(format!("sample pair {} outside the feature map", x.pair)));
    }
    let d = features.dim();
    let (lambda, c1, c2, ca) =
        (T::lit(config.lambda), T::lit(config.c1), T::lit(config.c2), T::lit(config.c_alpha));
    let mut theta = vec![T::zero(); d];
    let mut z = vec![T::zero(); d];
    let mut j = T::zero();
    for t in 0..trajectory.len() - 1 {
        let (cur, nxt) = (&trajectory[t], &trajectory[t + 1]);
        let (phi, phi_next) = (features.row(cur.pair), features.row(nxt.pair));
        let beta = c1 / (T::from_usize_lossy(t) + c2);
        for (zi, &p) in z.iter_mut().zip(phi) {
            *zi = lambda * *zi + p;
        }
        let td_err = cur.r - j + dot(phi_next, &theta) - dot(phi, &theta);
        j += ca * beta * (cur.r - j);
        for (th, &zi) in theta.iter_mut().zip(&z) {
            *th += beta * td_err * zi;
        }
        if !td_err.is_finite() || !j.is_finite() {
            return Err(Error::Numerical { step: t, detail: "TD iterate diverged".into() });
        }
    }
    if let Some(e) = features.constant_direction() {
        let shift = dot(features.row(anchor), &theta);
        for (th, &ei) in theta.iter_mut().zip(e) {
            *th -= shift * ei;
        }
    }
    Ok(TdState { theta, j, z, step: trajectory.len() - 1, config: *config })
}

/// Result of [`td_conditioning`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioning<T> {
    pub delta: T,
    /// Dimension of the subspace the minimum was taken over.
    pub subspace_dim: usize,
    /// Series terms used for the λ-weighted kernel.
    pub terms: usize,
    pub warning: Option<String>,
}

/// `Δ = min_{θ∈E, ‖θ‖=1} θᵀ Φᵀ D (I − 𝔔^λ) Φ θ` with
/// `𝔔^λ = (1−λ) Σ_m λ^m 𝔔^{m+1}` and `E` the complement of the constant
/// direction when the features represent constants.
pub fn td_conditioning<T: Real>(
    features: &FeatureMap<T>,
    kernel: &Matrix<T>,
    stationary: &[T],
    lambda: T,
) -> Result<Conditioning<T>> {
    let n = features.n_pairs();
    if kernel.rows() != n || kernel.cols() != n || stationary.len() != n {
        return Err(Error::Dimension(format!(
            "conditioning inputs must be {n}-dimensional to match the features"
        )));
    }
    if !(lambda >= T::zero() && lambda < T::one()) {
        return Err(Error::Domain(format!("lambda = {lambda} must lie in [0, 1)")));
    }
    let mut q_lambda = kernel.scale(T::one() - lambda);
    let mut power = kernel.clone();
    let mut weight = T::one();
    let mut terms = 1;
    let cutoff = T::lit(1e-12);
    loop {
        weight *= lambda;
        if weight < cutoff {
            break;
        }
        power = power.matmul(kernel);
        q_lambda = q_lambda.add(&power.scale((T::one() - lambda) * weight));
        terms += 1;
    }
    let phi = features.matrix();
    let mut dm = Matrix::identity(n).sub(&q_lambda);
    for i in 0..n {
        for v in dm.row_mut(i) {
            *v *= stationary[i];
        }
    }
    let a = phi.transpose().matmul(&dm).matmul(phi);
    let basis = match features.constant_direction() {
        Some(e) => orthogonal_complement(e),
        None => Matrix::identity(features.dim()),
    };
    if basis.cols() == 0 {
        return Err(Error::Precondition(
            "features span only the constant direction; the restricted subspace is empty".into(),
        ));
    }
    let restricted = basis.transpose().matmul(&a).matmul(&basis);
    let sym = restricted.add(&restricted.transpose()).scale(T::lit(0.5));
    let delta = symmetric_eigenvalues(&sym)?[0];
    let warning = (delta <= T::lit(-1e-10))
        .then(|| format!("conditioning constant is non-positive ({delta:e}); TD may not converge"));
    Ok(Conditioning { delta, subspace_dim: basis.cols(), terms, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{solve_bellman_q, state_action_kernel, stationary_distribution};
    use crate::rng::{stream, Component};
    use crate::scalar::{inf_dist, span};
    use crate::transforms::standard_pipeline;

    fn model() -> Mdp<f64> {
        let base = Mdp::new(
            vec![
                vec![vec![0.1, 0.6, 0.3], vec![0.7, 0.2, 0.1]],
                vec![vec![0.3, 0.3, 0.4], vec![0.05, 0.9, 0.05]],
                vec![vec![0.5, 0.25, 0.25], vec![0.2, 0.2, 0.6]],
            ],
            vec![vec![1.0, 0.2], vec![0.0, 1.5], vec![-0.5, 0.8]],
        )
        .unwrap();
        standard_pipeline(&base, Some(0.05), Some(0.1)).unwrap().0
    }

    fn policy() -> StochasticPolicy<f64> {
        StochasticPolicy::new(vec![vec![0.3, 0.7], vec![0.5, 0.5], vec![0.8, 0.2]]).unwrap()
    }

    #[test]
    fn one_state_rollout_is_constant() {
        let mdp = Mdp::new(vec![vec![vec![1.0]]], vec![vec![0.25]]).unwrap();
        let mu = StochasticPolicy::uniform(1, 1);
        let t = sample_trajectory(&mdp, &mu, 50, &mut stream(0, Component::Trajectory, 0), None).unwrap();
        assert!(t.iter().all(|x| x.s == 0 && x.a == 0 && x.r == 0.25 && !x.duplicate));
    }

    #[test]
    fn zero_rewards_leave_iterates_at_zero() {
        let mdp = Mdp::from_flat(3, 2, model().transitions_flat().to_vec(), vec![0.0; 6]).unwrap();
        let t = sample_trajectory(&mdp, &policy(), 500, &mut stream(1, Component::Trajectory, 0), None).unwrap();
        let st = td_lambda_run(&t, &FeatureMap::tabular(6), &TdConfig::default(), 0).unwrap();
        assert!(st.theta.iter().all(|&x| x == 0.0));
        assert_eq!(st.j, 0.0);
    }

    #[test]
    fn visit_frequencies_match_invariant_distribution() {
        let mdp = model();
        let mu = policy();
        let pi = stationary_distribution(&state_action_kernel(&mdp, &mu).unwrap().kernel).unwrap();
        let n = 1_000_000;
        let t = sample_trajectory(&mdp, &mu, n, &mut stream(2, Component::Trajectory, 0), None).unwrap();
        let mut freq = [0.0; 6];
        for x in &t {
            freq[x.pair] += 1.0 / n as f64;
        }
        assert!(inf_dist(&freq, &pi) < 1e-2, "{freq:?} vs {pi:?}");
    }

    #[test]
    fn duplicate_fraction_is_one_third_at_half() {
        let n = 1_000_000;
        let t = sample_trajectory(&model(), &policy(), n, &mut stream(3, Component::Trajectory, 0), Some(0.5))
            .unwrap();
        let frac = t.iter().filter(|x| x.duplicate).count() as f64 / n as f64;
        assert!((frac - 1.0 / 3.0).abs() < 0.02 / 3.0, "{frac}");
        assert!(t.windows(2).filter(|w| w[1].duplicate).all(|w| w[0].pair == w[1].pair));
    }

    #[test]
    fn tabular_td_recovers_q_for_several_seeds() {
        let mdp = model();
        let mu = policy();
        let ev = solve_bellman_q(&mdp, &mu, 0).unwrap();
        for seed in 0..5 {
            let t = sample_trajectory(&mdp, &mu, 100_000, &mut stream(seed, Component::Trajectory, 0), None).unwrap();
            let st = td_lambda_run(&t, &FeatureMap::tabular(6), &TdConfig::default(), 0).unwrap();
            let q = FeatureMap::tabular(6).values(&st.theta);
            assert!(inf_dist(&q, &ev.bias) < 0.1 * span(&ev.bias), "seed {seed}");
            assert!((st.j - ev.gain).abs() < 0.05 * (1.0 + ev.gain.abs()), "seed {seed}");
            assert!(q[0].abs() < 1e-12);
        }
    }

    #[test]
    fn expected_update_fixed_point_is_the_anchored_q() {
        // Synchronous TD(λ): θ += β Φᵀ D (I − λ𝔔)^{-1} (r − J + 𝔔Φθ − Φθ) with
        // tabular Φ, iterated to convergence.
        let mdp = model();
        let mu = policy();
        let sak = state_action_kernel(&mdp, &mu).unwrap();
        let d = stationary_distribution(&sak.kernel).unwrap();
        let ev = solve_bellman_q(&mdp, &mu, 0).unwrap();
        let lambda = 0.5;
        let resolvent = Matrix::identity(6).sub(&sak.kernel.scale(lambda));
        let mut theta = vec![0.0; 6];
        let mut j = 0.0;
        let jbar: f64 = d.iter().zip(&sak.reward).map(|(a, b)| a * b).sum();
        for _ in 0..20_000 {
            let next = sak.kernel.mul_vec(&theta);
            let err: Vec<f64> = (0..6).map(|i| sak.reward[i] - j + next[i] - theta[i]).collect();
            let z = crate::linalg::solve(&resolvent, &err).unwrap();
            for i in 0..6 {
                theta[i] += 0.5 * d[i] * z[i];
            }
            j += 0.5 * (jbar - j);
        }
        let shift = theta[0];
        theta.iter_mut().for_each(|x| *x -= shift);
        assert!(inf_dist(&theta, &ev.bias) < 1e-6);
        assert!((j - ev.gain).abs() < 1e-12);
    }

    #[test]
    fn td_rejects_short_trajectories_and_bad_config() {
        let t = sample_trajectory(&model(), &policy(), 1, &mut stream(0, Component::Trajectory, 0), None).unwrap();
        assert!(td_lambda_run(&t, &FeatureMap::tabular(6), &TdConfig::default(), 0).is_err());
        let bad = TdConfig { lambda: 1.0, ..TdConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn diverging_steps_report_numerical_error() {
        let t = sample_trajectory(&model(), &policy(), 5000, &mut stream(0, Component::Trajectory, 0), None).unwrap();
        let wild = TdConfig { c1: 1e200, c2: 1e-300, ..TdConfig::default() };
        assert!(matches!(
            td_lambda_run(&t, &FeatureMap::tabular(6), &wild, 0),
            Err(Error::Numerical { .. })
        ));
    }

    #[test]
    fn conditioning_is_positive_for_tabular_features() {
        let mdp = model();
        let sak = state_action_kernel(&mdp, &policy()).unwrap();
        let d = stationary_distribution(&sak.kernel).unwrap();
        let f = FeatureMap::tabular(6);
        let c0 = td_conditioning(&f, &sak.kernel, &d, 0.0).unwrap();
        assert_eq!(c0.terms, 1);
        assert!(c0.delta > 0.0 && c0.warning.is_none());
        assert_eq!(c0.subspace_dim, 5);
        let c5 = td_conditioning(&f, &sak.kernel, &d, 0.5).unwrap();
        assert!(c5.delta > 0.0 && c5.terms > 1);
    }

    #[test]
    fn lambda_zero_uses_the_kernel_itself() {
        let mdp = model();
        let sak = state_action_kernel(&mdp, &policy()).unwrap();
        let d = stationary_distribution(&sak.kernel).unwrap();
        let f = FeatureMap::tabular(6);
        let got = td_conditioning(&f, &sak.kernel, &d, 0.0).unwrap().delta;
        // direct oracle: D(I − 𝔔) restricted to 1^⊥
        let mut a = Matrix::identity(6).sub(&sak.kernel);
        for i in 0..6 {
            for v in a.row_mut(i) {
                *v *= d[i];
            }
        }
        let b = orthogonal_complement(&[1.0; 6]);
        let r = b.transpose().matmul(&a).matmul(&b);
        let want = symmetric_eigenvalues(&r.add(&r.transpose()).scale(0.5)).unwrap()[0];
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn redundant_constant_column_leaves_delta_unchanged() {
        // Φ0 = 0.8 · (identity without its last column) does not span 1.
        // Appending the column 0.6 · 1 makes 1 representable along the new
        // coordinate only, and the restricted minimum must not move.
        let mdp = model();
        let sak = state_action_kernel(&mdp, &policy()).unwrap();
        let d = stationary_distribution(&sak.kernel).unwrap();
        let narrow: Vec<Vec<f64>> =
            (0..6).map(|i| (0..5).map(|j| if i == j { 0.8 } else { 0.0 }).collect()).collect();
        let f0 = FeatureMap::new(Matrix::from_rows(&narrow).unwrap()).unwrap();
        assert!(f0.constant_direction().is_none());
        let wide: Vec<Vec<f64>> = narrow.iter().map(|r| [&r[..], &[0.6]].concat()).collect();
        let f1 = FeatureMap::new(Matrix::from_rows(&wide).unwrap()).unwrap();
        assert!(f1.constant_direction().is_some());
        for lambda in [0.0, 0.3, 0.7] {
            let a = td_conditioning(&f0, &sak.kernel, &d, lambda).unwrap();
            let b = td_conditioning(&f1, &sak.kernel, &d, lambda).unwrap();
            assert_eq!((a.subspace_dim, b.subspace_dim), (5, 5));
            assert!((a.delta - b.delta).abs() < 1e-12, "{} vs {}", a.delta, b.delta);
        }
    }
}
