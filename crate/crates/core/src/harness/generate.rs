use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::rng::{stream, Component};
use crate::scalar::Real;
use crate::transforms::exploration_mix;

/// Mixing weight applied to every generated instance.
pub const DEFAULT_MIX_EPS: f64 = 0.05;

fn default_mix() -> f64 {
    DEFAULT_MIX_EPS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// Shape of the Gamma variates normalized into each transition row.
    pub concentration: f64,
    pub reward_lo: f64,
    pub reward_hi: f64,
    pub seed: u64,
    #[serde(default = "default_mix")]
    pub mix_eps: f64,
}

impl RandomMdpSpec {
    pub fn new(n_states: usize, n_actions: usize, seed: u64) -> Self {
        RandomMdpSpec {
            n_states,
            n_actions,
            concentration: 1.0,
            reward_lo: 0.0,
            reward_hi: 1.0,
            seed,
            mix_eps: DEFAULT_MIX_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Dimension("random MDP needs at least one state and one action".into()));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::Domain(format!("concentration = {} must be positive", self.concentration)));
        }
        if !(self.reward_lo <= self.reward_hi) || !self.reward_lo.is_finite() || !self.reward_hi.is_finite() {
            return Err(Error::Domain(format!(
                "reward range [{}, {}] is invalid",
                self.reward_lo, self.reward_hi
            )));
        }
        if !(self.mix_eps > 0.0 && self.mix_eps < 1.0) {
            return Err(Error::Domain(format!("mix_eps = {} must lie in (0, 1)", self.mix_eps)));
        }
        Ok(())
    }
}

/// Rows are normalized Gamma(concentration) variates, rewards are uniform on
/// the range, and the result is exploration-mixed with `spec.mix_eps`.
pub fn generate_random_mdp<T: Real>(spec: &RandomMdpSpec) -> Result<Mdp<T>> {
    spec.validate()?;
    let (n, m) = (spec.n_states, spec.n_actions);
    let mut rng = stream(spec.seed, Component::MdpGen, 0);
    let gamma = Gamma::new(spec.concentration, 1.0)
        .map_err(|e| Error::Domain(format!("concentration: {e}")))?;
    let mut transition = Vec::with_capacity(n * m * n);
    for _ in 0..n * m {
        let row: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 && total.is_finite() {
            transition.extend(row.iter().map(|&x| T::lit(x / total)));
        } else {
            // every variate underflowed; fall back to a uniform row
            transition.extend(std::iter::repeat_n(T::one() / T::from_usize_lossy(n), n));
        }
    }
    let reward: Vec<T> = (0..n * m)
        .map(|_| {
            let x = if spec.reward_hi > spec.reward_lo {
                rng.random_range(spec.reward_lo..spec.reward_hi)
            } else {
                spec.reward_lo
            };
            T::lit(x)
        })
        .collect();
    let raw = Mdp::from_flat(n, m, normalize_rows(transition, n), reward)?;
    Ok(exploration_mix(&raw, T::lit(spec.mix_eps))?.0)
}

fn normalize_rows<T: Real>(mut t: Vec<T>, n: usize) -> Vec<T> {
    for row in t.chunks_mut(n) {
        let s: T = row.iter().copied().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    t
}

/// Moves in order up, right, down, left.
pub const GRID_ACTIONS: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// Grid of `width × height` cells, state `y * width + x`. The intended move
/// happens with probability `1 − slip`; each perpendicular move takes
/// `slip / 2`. Moves into a wall leave the agent in place. `rewards[cell]` is
/// paid for any action taken in that cell.
pub fn generate_gridworld<T: Real>(
    width: usize,
    height: usize,
    slip: f64,
    rewards: &[f64],
) -> Result<Mdp<T>> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("grid {width}x{height} has no cells")));
    }
    let n = width * height;
    if rewards.len() != n {
        return Err(Error::Dimension(format!("{} cell rewards for {n} cells", rewards.len())));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(Error::Domain(format!("slip = {slip} must lie in [0, 1)")));
    }
    let step = |s: usize, d: (isize, isize)| {
        let (x, y) = ((s % width) as isize, (s / width) as isize);
        let (nx, ny) = (x + d.0, y + d.1);
        if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
            s
        } else {
            ny as usize * width + nx as usize
        }
    };
    let mut transition = vec![T::zero(); n * 4 * n];
    let mut reward = Vec::with_capacity(n * 4);
    for s in 0..n {
        for a in 0..4 {
            let row = &mut transition[(s * 4 + a) * n..(s * 4 + a + 1) * n];
            row[step(s, GRID_ACTIONS[a])] += T::lit(1.0 - slip);
            for lateral in [(a + 1) % 4, (a + 3) % 4] {
                row[step(s, GRID_ACTIONS[lateral])] += T::lit(slip / 2.0);
            }
            reward.push(T::lit(rewards[s]));
        }
    }
    Mdp::from_flat(n, 4, transition, reward)
}
