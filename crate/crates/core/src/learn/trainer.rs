//! Training loop: parallel rollout collection, vectorized-value PPO updates,
//! terrain curriculum, metrics logging and checkpointing with full resume.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::checkpoint::{rng_from_state_bytes, rng_state_bytes, Checkpoint, CheckpointError};
use super::nn::{Adam, PolicyNet, ValueNet};
use super::norm::RunningNorm;
use super::ppo::{ppo_update, Mirrors, PpoConfig, UpdateStats};
use crate::env::rewards::{NUM_TERMS, TERM_NAMES};
use crate::env::{Env, EnvConfig, EpisodeStats};
use crate::rng::{stream, sub_seed, Stream};
use crate::terrain::NUM_LEVELS;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub kl_target: f64,
    pub adaptive_lr: bool,
    pub symmetry_weight: f64,
    pub entropy_weight: f64,
    pub value_loss_coef: f64,
    pub max_grad_norm: f64,
    pub horizon: usize,
    pub num_envs: usize,
    pub iterations: usize,
    pub hidden_policy: Vec<usize>,
    pub hidden_value: Vec<usize>,
    pub init_noise_std: f64,
    pub checkpoint_every: usize,
    /// Promote when MXD >= this fraction of the commanded distance.
    pub promote_threshold: f64,
    /// Demote when MXD < this fraction of the commanded distance.
    pub demote_threshold: f64,
    /// One value head per reward term; `false` collapses the vector to a
    /// single summed head (the no-vectorization ablation).
    pub vectorize_rewards: bool,
    pub initial_level: u32,
    pub max_level: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            lam: 0.95,
            clip: 0.2,
            epochs: 5,
            minibatches: 4,
            learning_rate: 1e-3,
            kl_target: 0.01,
            adaptive_lr: true,
            symmetry_weight: 1.0,
            entropy_weight: 0.005,
            value_loss_coef: 1.0,
            max_grad_norm: 1.0,
            horizon: 24,
            num_envs: 64,
            iterations: 300,
            hidden_policy: vec![512, 256, 128],
            hidden_value: vec![512, 256, 128],
            init_noise_std: 1.0,
            checkpoint_every: 100,
            promote_threshold: 0.8,
            demote_threshold: 0.4,
            vectorize_rewards: true,
            initial_level: 0,
            max_level: NUM_LEVELS - 1,
        }
    }
}

impl TrainConfig {
    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            gamma: self.gamma,
            lam: self.lam,
            clip: self.clip,
            epochs: self.epochs,
            minibatches: self.minibatches,
            value_loss_coef: self.value_loss_coef,
            entropy_weight: self.entropy_weight,
            symmetry_weight: self.symmetry_weight,
            max_grad_norm: self.max_grad_norm,
            kl_target: self.kl_target,
            adaptive_lr: self.adaptive_lr,
            ..PpoConfig::default()
        }
    }

    pub fn heads(&self) -> usize {
        if self.vectorize_rewards {
            NUM_TERMS
        } else {
            1
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Mean weighted reward per term over the iteration's steps.
    pub term_means: Vec<f64>,
    pub mean_episode_len: f64,
    pub mean_level: f64,
    pub episodes_finished: usize,
    pub update: UpdateStats,
}

pub struct TrainSummary {
    pub iterations: Vec<IterationMetrics>,
    pub final_checkpoint: PathBuf,
    pub non_finite_updates: usize,
}

/// Policy + everything needed to run it: networks, normalizers, reward-head
/// count and bookkeeping to resume training.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub env_cfg: EnvConfig,
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub actor_norm: RunningNorm,
    pub critic_norm: RunningNorm,
    pub adam_policy: Adam,
    pub adam_value: Adam,
    pub lr: f64,
    pub iteration: u64,
    pub levels: Vec<u32>,
    pub episode_counters: Vec<u64>,
    pub rng: Stream,
    envs: Vec<Env>,
    seed: u64,
    mirrors: Mirrors,
}

impl Trainer {
    pub fn new(
        model: crate::dynamics::RobotModel,
        env_cfg: EnvConfig,
        cfg: TrainConfig,
        seed: u64,
    ) -> Trainer {
        let mut envs: Vec<Env> = (0..cfg.num_envs)
            .map(|_| Env::new(model.clone(), env_cfg.clone()))
            .collect();
        let layout = envs[0].layout().clone();
        let mut net_rng = stream(seed, 0x11);
        let policy = PolicyNet::new(
            layout.actor_dim(),
            &cfg.hidden_policy,
            layout.n_act(),
            cfg.init_noise_std,
            &mut net_rng,
        );
        let value = ValueNet::new(
            layout.critic_dim(),
            &cfg.hidden_value,
            cfg.heads(),
            &mut net_rng,
        );
        let mirrors = Mirrors {
            actor_obs: envs[0].actor_obs_mirror(),
            critic_obs: envs[0].critic_obs_mirror(),
            action: envs[0].action_mirror(),
        };
        let adam_policy = Adam::new(policy.n_params());
        let adam_value = Adam::new(value.mlp.n_params());
        let lr = cfg.learning_rate;
        let levels = vec![cfg.initial_level; cfg.num_envs];
        let episode_counters = vec![0; cfg.num_envs];
        let actor_norm = RunningNorm::new(layout.actor_dim());
        let critic_norm = RunningNorm::new(layout.critic_dim());
        let rng = stream(seed, 0x22);
        // Touch the envs so dimensions are consistent before first rollout.
        envs.iter_mut().for_each(|e| {
            e.enable_logging(false);
        });
        Trainer {
            cfg,
            env_cfg,
            policy,
            value,
            actor_norm,
            critic_norm,
            adam_policy,
            adam_value,
            lr,
            iteration: 0,
            levels,
            episode_counters,
            rng,
            envs,
            seed,
            mirrors,
        }
    }

    fn episode_seed(&self, env_index: usize, counter: u64) -> u64 {
        sub_seed(self.seed, ((env_index as u64) << 40) ^ counter)
    }

    /// Deterministic policy mean for a batch of raw actor observations.
    pub fn policy_mean(&self, actor_raw: &Array2<f64>) -> Array2<f64> {
        self.policy.mlp.infer(&self.actor_norm.apply(actor_raw))
    }

    fn collect_rollout(
        &mut self,
        obs: &mut Vec<Vec<f64>>,
        crit: &mut Vec<Vec<f64>>,
        buffer: &mut RolloutBuffer,
        metrics: &mut RolloutAccumulator,
    ) {
        let e_count = self.cfg.num_envs;
        let layout = self.envs[0].layout().clone();
        for t in 0..self.cfg.horizon {
            let mut actor_raw = Array2::zeros((e_count, layout.actor_dim()));
            let mut critic_raw = Array2::zeros((e_count, layout.critic_dim()));
            for e in 0..e_count {
                actor_raw
                    .row_mut(e)
                    .assign(&ndarray::ArrayView1::from(&obs[e][..]));
                critic_raw
                    .row_mut(e)
                    .assign(&ndarray::ArrayView1::from(&crit[e][..]));
            }
            self.actor_norm.update(&actor_raw);
            self.critic_norm.update(&critic_raw);
            let mean = self.policy.mlp.infer(&self.actor_norm.apply(&actor_raw));
            let values = self.value.values(&self.critic_norm.apply(&critic_raw));

            // Sample actions in fixed env order for determinism.
            let mut actions = Array2::zeros((e_count, layout.n_act()));
            for e in 0..e_count {
                for j in 0..layout.n_act() {
                    let eps: f64 = StandardNormal.sample(&mut self.rng);
                    actions[(e, j)] = mean[(e, j)] + self.policy.log_std[j].exp() * eps;
                }
            }
            let log_probs = self.policy.log_prob(&mean, &actions);

            // Step every environment (each owns its state and RNG).
            let action_rows: Vec<Vec<f64>> = (0..e_count)
                .map(|e| actions.row(e).to_vec())
                .collect();
            let results: Vec<_> = self
                .envs
                .par_iter_mut()
                .zip(action_rows.par_iter())
                .map(|(env, act)| env.step(act))
                .collect();

            for (e, r) in results.into_iter().enumerate() {
                let reward_row: Vec<f64> = if self.cfg.vectorize_rewards {
                    r.rewards.values.clone()
                } else {
                    vec![r.rewards.total()]
                };
                buffer.push(
                    t,
                    e,
                    &obs[e],
                    &crit[e],
                    actions.row(e).as_slice().unwrap(),
                    log_probs[e],
                    &reward_row,
                    values.row(e).as_slice().unwrap(),
                    r.done,
                );
                metrics.add_step(&r.rewards.values);
                if r.done {
                    let stats = self.envs[e].stats();
                    self.update_curriculum(e, &stats);
                    metrics.add_episode(&stats, self.levels[e]);
                    self.episode_counters[e] += 1;
                    let seed = self.episode_seed(e, self.episode_counters[e]);
                    let (o, c) = self.envs[e].reset(self.levels[e], seed);
                    obs[e] = o;
                    crit[e] = c;
                } else {
                    obs[e] = r.actor_obs;
                    crit[e] = r.critic_obs;
                }
            }
        }
        // Bootstrap values for the post-rollout states.
        let mut critic_raw = Array2::zeros((e_count, self.envs[0].layout().critic_dim()));
        for e in 0..e_count {
            critic_raw
                .row_mut(e)
                .assign(&ndarray::ArrayView1::from(&crit[e][..]));
        }
        let boot = self.value.values(&self.critic_norm.apply(&critic_raw));
        buffer.bootstrap.assign(&boot);
    }

    fn update_curriculum(&mut self, e: usize, stats: &EpisodeStats) {
        if stats.command_vx <= 0.1 {
            return;
        }
        let commanded = stats.command_vx * self.env_cfg.episode_seconds;
        if stats.mxd >= self.cfg.promote_threshold * commanded {
            self.levels[e] = (self.levels[e] + 1).min(self.cfg.max_level);
        } else if stats.mxd < self.cfg.demote_threshold * commanded {
            self.levels[e] = self.levels[e].saturating_sub(1);
        }
    }

    /// Run `iterations` of rollout + update, appending metrics rows and
    /// writing periodic checkpoints. Training state is flushed to disk
    /// before returning.
    pub fn train(&mut self, out_dir: &Path) -> std::io::Result<TrainSummary> {
        std::fs::create_dir_all(out_dir)?;
        let metrics_path = out_dir.join("metrics.csv");
        let fresh = self.iteration == 0 || !metrics_path.exists();
        let mut metrics_file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&metrics_path)?;
        if fresh {
            let mut header = vec![
                "iteration".to_string(),
                "mean_total_reward".into(),
                "mean_episode_len".into(),
                "mean_level".into(),
                "episodes".into(),
                "policy_loss".into(),
                "value_loss".into(),
                "symmetry_loss".into(),
                "entropy".into(),
                "kl".into(),
                "clip_fraction".into(),
                "lr".into(),
            ];
            header.extend(TERM_NAMES.iter().map(|n| format!("mean_rew_{n}")));
            writeln!(metrics_file, "{}", header.join(","))?;
        }

        let layout = self.envs[0].layout().clone();
        let mut buffer = RolloutBuffer::new(
            self.cfg.horizon,
            self.cfg.num_envs,
            self.cfg.heads(),
            layout.actor_dim(),
            layout.critic_dim(),
            layout.n_act(),
        );

        // (Re)start all environments.
        let mut obs = Vec::with_capacity(self.cfg.num_envs);
        let mut crit = Vec::with_capacity(self.cfg.num_envs);
        for e in 0..self.cfg.num_envs {
            self.episode_counters[e] += 1;
            let seed = self.episode_seed(e, self.episode_counters[e]);
            let (o, c) = self.envs[e].reset(self.levels[e], seed);
            obs.push(o);
            crit.push(c);
        }

        let ppo_cfg = self.cfg.ppo();
        let mut summary = TrainSummary {
            iterations: Vec::new(),
            final_checkpoint: out_dir.join("checkpoint_final.zmlk"),
            non_finite_updates: 0,
        };
        let end_iteration = self.iteration + self.cfg.iterations as u64;
        while self.iteration < end_iteration {
            buffer.clear();
            let mut acc = RolloutAccumulator::new();
            self.collect_rollout(&mut obs, &mut crit, &mut buffer, &mut acc);

            let mut update_rng = stream(self.seed, 0x33 ^ self.iteration);
            let update = match ppo_update(
                &buffer,
                &mut self.policy,
                &mut self.value,
                &self.actor_norm,
                &self.critic_norm,
                &self.mirrors,
                &ppo_cfg,
                &mut self.lr,
                &mut self.adam_policy,
                &mut self.adam_value,
                &mut update_rng,
            ) {
                Ok(stats) => stats,
                Err(_) => {
                    summary.non_finite_updates += 1;
                    UpdateStats::default()
                }
            };

            self.iteration += 1;
            let m = acc.finish(self.iteration as usize, &self.levels, update);
            let mut row = vec![
                format!("{}", m.iteration),
                format!("{}", m.term_means.iter().sum::<f64>()),
                format!("{}", m.mean_episode_len),
                format!("{}", m.mean_level),
                format!("{}", m.episodes_finished),
                format!("{}", m.update.policy_loss),
                format!("{}", m.update.value_loss),
                format!("{}", m.update.symmetry_loss),
                format!("{}", m.update.entropy),
                format!("{}", m.update.kl),
                format!("{}", m.update.clip_fraction),
                format!("{}", m.update.lr),
            ];
            row.extend(m.term_means.iter().map(|v| format!("{v}")));
            writeln!(metrics_file, "{}", row.join(","))?;
            summary.iterations.push(m);

            if self.cfg.checkpoint_every > 0
                && (self.iteration % self.cfg.checkpoint_every as u64 == 0)
            {
                let path = out_dir.join(format!("checkpoint_{:06}.zmlk", self.iteration));
                self.save_checkpoint(&path).map_err(io_other)?;
            }
        }
        metrics_file.flush()?;
        self.save_checkpoint(&summary.final_checkpoint)
            .map_err(io_other)?;
        Ok(summary)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), CheckpointError> {
        let model_hash = self.envs[0].base_model().content_hash();
        let mut c = Checkpoint::new(model_hash);
        let mut p = Vec::new();
        self.policy.write_flat(&mut p);
        c.put_f64("policy.params", p);
        let mut v = Vec::new();
        self.value.mlp.write_flat(&mut v);
        c.put_f64("value.params", v);
        c.put_f64("adam_policy.m", self.adam_policy.m.clone());
        c.put_f64("adam_policy.v", self.adam_policy.v.clone());
        c.put_u64("adam_policy.t", self.adam_policy.t);
        c.put_f64("adam_value.m", self.adam_value.m.clone());
        c.put_f64("adam_value.v", self.adam_value.v.clone());
        c.put_u64("adam_value.t", self.adam_value.t);
        c.put_f64("actor_norm.mean", self.actor_norm.mean.to_vec());
        c.put_f64("actor_norm.m2", self.actor_norm.m2.to_vec());
        c.put_f64("actor_norm.count", vec![self.actor_norm.count]);
        c.put_f64("critic_norm.mean", self.critic_norm.mean.to_vec());
        c.put_f64("critic_norm.m2", self.critic_norm.m2.to_vec());
        c.put_f64("critic_norm.count", vec![self.critic_norm.count]);
        c.put_f64(
            "curriculum.levels",
            self.levels.iter().map(|l| *l as f64).collect(),
        );
        let counters: Vec<u8> = self
            .episode_counters
            .iter()
            .flat_map(|c| c.to_le_bytes())
            .collect();
        c.put_bytes("episode_counters", counters);
        c.put_u64("iteration", self.iteration);
        c.put_f64("lr", vec![self.lr]);
        c.put_bytes("rng", rng_state_bytes(&self.rng));
        c.put_u64("heads", self.cfg.heads() as u64);
        c.put_u64("actor_dim", self.envs[0].layout().actor_dim() as u64);
        c.put_u64("critic_dim", self.envs[0].layout().critic_dim() as u64);
        c.put_u64("n_act", self.envs[0].layout().n_act() as u64);
        c.save(path)
    }

    pub fn restore_checkpoint(&mut self, c: &Checkpoint) -> Result<(), CheckpointError> {
        let model_hash = self.envs[0].base_model().content_hash();
        c.verify_model_hash(&model_hash)?;
        self.policy.read_flat(c.f64s("policy.params")?);
        self.value.mlp.read_flat(c.f64s("value.params")?);
        self.adam_policy.m = c.f64s("adam_policy.m")?.to_vec();
        self.adam_policy.v = c.f64s("adam_policy.v")?.to_vec();
        self.adam_policy.t = c.u64("adam_policy.t")?;
        self.adam_value.m = c.f64s("adam_value.m")?.to_vec();
        self.adam_value.v = c.f64s("adam_value.v")?.to_vec();
        self.adam_value.t = c.u64("adam_value.t")?;
        self.actor_norm.mean = Array1::from(c.f64s("actor_norm.mean")?.to_vec());
        self.actor_norm.m2 = Array1::from(c.f64s("actor_norm.m2")?.to_vec());
        self.actor_norm.count = c.scalar("actor_norm.count")?;
        self.critic_norm.mean = Array1::from(c.f64s("critic_norm.mean")?.to_vec());
        self.critic_norm.m2 = Array1::from(c.f64s("critic_norm.m2")?.to_vec());
        self.critic_norm.count = c.scalar("critic_norm.count")?;
        self.levels = c
            .f64s("curriculum.levels")?
            .iter()
            .map(|l| *l as u32)
            .collect();
        self.episode_counters = c
            .bytes("episode_counters")?
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        self.iteration = c.u64("iteration")?;
        self.lr = c.scalar("lr")?;
        if let Some(rng) = rng_from_state_bytes(c.bytes("rng")?) {
            self.rng = rng;
        }
        Ok(())
    }
}

fn io_other(e: CheckpointError) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

struct RolloutAccumulator {
    term_sums: Vec<f64>,
    steps: usize,
    episode_lens: Vec<f64>,
    episode_levels: Vec<u32>,
}

impl RolloutAccumulator {
    fn new() -> Self {
        RolloutAccumulator {
            term_sums: vec![0.0; NUM_TERMS],
            steps: 0,
            episode_lens: Vec::new(),
            episode_levels: Vec::new(),
        }
    }

    fn add_step(&mut self, terms: &[f64]) {
        for (s, t) in self.term_sums.iter_mut().zip(terms) {
            *s += t;
        }
        self.steps += 1;
    }

    fn add_episode(&mut self, stats: &EpisodeStats, level: u32) {
        self.episode_lens.push(stats.length_s);
        self.episode_levels.push(level);
    }

    fn finish(self, iteration: usize, levels: &[u32], update: UpdateStats) -> IterationMetrics {
        let steps = self.steps.max(1) as f64;
        IterationMetrics {
            iteration,
            term_means: self.term_sums.iter().map(|s| s / steps).collect(),
            mean_episode_len: if self.episode_lens.is_empty() {
                0.0
            } else {
                self.episode_lens.iter().sum::<f64>() / self.episode_lens.len() as f64
            },
            mean_level: levels.iter().map(|l| *l as f64).sum::<f64>() / levels.len() as f64,
            episodes_finished: self.episode_lens.len(),
            update,
        }
    }
}

/// Run one evaluation episode with the deterministic policy mean.
/// Returns the episode statistics (and the log when requested).
pub fn run_policy_episode(
    env: &mut Env,
    policy: &PolicyNet,
    actor_norm: &RunningNorm,
    level: u32,
    seed: u64,
    keep_log: bool,
) -> (EpisodeStats, Option<crate::env::log::EpisodeLog>) {
    env.enable_logging(keep_log);
    let (mut obs, _) = env.reset(level, seed);
    loop {
        let x = Array2::from_shape_vec((1, obs.len()), obs.clone()).unwrap();
        let mean = policy.mlp.infer(&actor_norm.apply(&x));
        let action: Vec<f64> = mean.row(0).to_vec();
        let r = env.step(&action);
        obs = r.actor_obs;
        if r.done {
            break;
        }
    }
    let stats = env.stats();
    let log = if keep_log { Some(env.take_log()) } else { None };
    (stats, log)
}
