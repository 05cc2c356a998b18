//! Rollout storage. Rewards stay vectors (one column per term) end to end;
//! the only place they are summed is advantage aggregation.

use ndarray::{Array1, Array2};

/// Transitions indexed `(t, e) -> t * n_envs + e`. Observations are stored
/// raw; normalization happens at network input.
pub struct RolloutBuffer {
    pub horizon: usize,
    pub n_envs: usize,
    /// Reward vector length (value heads).
    pub k: usize,
    pub actor_obs: Array2<f64>,
    pub critic_obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    pub rewards: Array2<f64>,
    /// Rollout-time per-head values.
    pub values: Array2<f64>,
    /// Episode ended at this transition.
    pub dones: Vec<bool>,
    /// Per-head values of the state after the last transition (E x K).
    pub bootstrap: Array2<f64>,
    filled: usize,
}

impl RolloutBuffer {
    pub fn new(
        horizon: usize,
        n_envs: usize,
        k: usize,
        actor_dim: usize,
        critic_dim: usize,
        act_dim: usize,
    ) -> RolloutBuffer {
        let cap = horizon * n_envs;
        RolloutBuffer {
            horizon,
            n_envs,
            k,
            actor_obs: Array2::zeros((cap, actor_dim)),
            critic_obs: Array2::zeros((cap, critic_dim)),
            actions: Array2::zeros((cap, act_dim)),
            log_probs: Array1::zeros(cap),
            rewards: Array2::zeros((cap, k)),
            values: Array2::zeros((cap, k)),
            dones: vec![false; cap],
            bootstrap: Array2::zeros((n_envs, k)),
            filled: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.filled
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    pub fn capacity(&self) -> usize {
        self.horizon * self.n_envs
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.capacity()
    }

    pub fn clear(&mut self) {
        self.filled = 0;
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        t: usize,
        e: usize,
        actor_obs: &[f64],
        critic_obs: &[f64],
        action: &[f64],
        log_prob: f64,
        rewards: &[f64],
        values: &[f64],
        done: bool,
    ) {
        let idx = t * self.n_envs + e;
        assert!(idx < self.capacity());
        self.actor_obs.row_mut(idx).assign(
            &ndarray::ArrayView1::from(actor_obs),
        );
        self.critic_obs
            .row_mut(idx)
            .assign(&ndarray::ArrayView1::from(critic_obs));
        self.actions
            .row_mut(idx)
            .assign(&ndarray::ArrayView1::from(action));
        self.log_probs[idx] = log_prob;
        self.rewards
            .row_mut(idx)
            .assign(&ndarray::ArrayView1::from(rewards));
        self.values
            .row_mut(idx)
            .assign(&ndarray::ArrayView1::from(values));
        self.dones[idx] = done;
        self.filled = self.filled.max(idx + 1);
    }
}
