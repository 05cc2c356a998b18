//! Goal-conditioned locomotion environment: command sampling, observation
//! assembly, the vectorized reward suite, domain randomization, pushes,
//! multiplicative action noise, termination and episode metrics.

pub mod log;
pub mod obs;
pub mod randomization;
pub mod rewards;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::balance::{self, DEFAULT_SUPPORT_EPSILON};
use crate::dynamics::{
    self, forward_kinematics, momentum::momentum_with_rates, pd_torques, ContactMemory,
    ContactSet, JointGroup, PdGains, RobotModel, SimParams, SimState,
};
use crate::rng::{stream, Stream};
use crate::terrain::{
    generate_terrain, mix_terrains, sample_height_window, HeightField, TerrainKind, TerrainSpec,
    WINDOW_POINTS,
};
use log::{EpisodeLog, LogRow};
use obs::{Frame, ObsBuilder, ObsLayout, Privileged, SignedPermutation};
use randomization::{apply_action_noise, RandomizationConfig, RandomizationDraw};
use rewards::{compute_rewards, RewardConfig, RewardInputs, RewardVector, NUM_TERMS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainMode {
    /// Kind drawn from the curriculum mix, parameters from the level.
    Curriculum,
    /// Fixed kind with optional parameter overrides.
    Fixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainConfig {
    pub mode: TerrainMode,
    pub kind: TerrainKind,
    pub width: Option<f64>,
    pub gradient: Option<f64>,
    pub step_height: Option<f64>,
    pub path_length: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig {
            mode: TerrainMode::Curriculum,
            kind: TerrainKind::Plane,
            width: None,
            gradient: None,
            step_height: None,
            path_length: 12.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandConfig {
    pub vx_range: (f64, f64),
    pub vy_range: (f64, f64),
    pub yaw_gain: f64,
    pub yaw_limit: f64,
}

impl Default for CommandConfig {
    fn default() -> Self {
        CommandConfig {
            vx_range: (-0.5, 1.0),
            vy_range: (-0.2, 0.2),
            yaw_gain: 0.5,
            yaw_limit: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub physics_dt: f64,
    pub control_decimation: usize,
    pub episode_seconds: f64,
    /// Actions scale to joint-position offsets around the default pose.
    pub action_scale: f64,
    pub privileged_dim: usize,
    /// Freeze arm/torso joints at the default pose and shrink the action
    /// space to the legs.
    pub freeze_upper_body: bool,
    pub spawn_x: f64,
    pub command: CommandConfig,
    pub terrain: TerrainConfig,
    pub rewards: RewardConfig,
    pub randomization: RandomizationConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            physics_dt: 1e-3,
            control_decimation: 20,
            episode_seconds: 20.0,
            action_scale: 0.25,
            privileged_dim: 70,
            freeze_upper_body: false,
            spawn_x: -0.3,
            command: CommandConfig::default(),
            terrain: TerrainConfig::default(),
            rewards: RewardConfig::default(),
            randomization: RandomizationConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.control_decimation as f64
    }

    pub fn max_steps(&self) -> usize {
        (self.episode_seconds / self.control_dt()).round() as usize
    }
}

/// Velocity command: linear parts held per episode, yaw rate recomputed from
/// the heading error each step.
#[derive(Debug, Clone, Copy)]
pub struct Command {
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl Command {
    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.yaw_rate]
    }
}

/// Yaw-rate command steering the robot toward the world +x heading:
/// `clip(gain * heading_error, -limit, limit)`.
pub fn heading_yaw_command(state: &SimState, cfg: &CommandConfig) -> f64 {
    let err = wrap_angle(-state.yaw());
    (cfg.yaw_gain * err).clamp(-cfg.yaw_limit, cfg.yaw_limit)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Draw the linear command parts uniformly; yaw from the heading rule.
pub fn sample_command(state: &SimState, rng: &mut impl Rng, cfg: &CommandConfig) -> Command {
    Command {
        vx: rng.gen_range(cfg.vx_range.0..cfg.vx_range.1),
        vy: rng.gen_range(cfg.vy_range.0..cfg.vy_range.1),
        yaw_rate: heading_yaw_command(state, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// Base dropped below half the nominal height over terrain.
    FallHeight,
    /// Projected gravity tipped past the orientation threshold.
    FallOrientation,
    OffPath,
    Timeout,
    NumericalDivergence,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::FallHeight => "fall_height",
            TerminationReason::FallOrientation => "fall_orientation",
            TerminationReason::OffPath => "off_path",
            TerminationReason::Timeout => "timeout",
            TerminationReason::NumericalDivergence => "divergence",
        }
    }
}

/// Episode termination rule.
pub fn check_termination(
    state: &SimState,
    terrain: &HeightField,
    nominal_height: f64,
    time_limit: f64,
) -> Option<TerminationReason> {
    let (elev, on_path) = terrain.height_at(state.base_pos.x, state.base_pos.y);
    if !on_path {
        return Some(TerminationReason::OffPath);
    }
    if state.base_pos.z - elev < 0.5 * nominal_height {
        return Some(TerminationReason::FallHeight);
    }
    let g = state.projected_gravity();
    if (g.x * g.x + g.y * g.y).sqrt() > 0.8 {
        return Some(TerminationReason::FallOrientation);
    }
    if state.time >= time_limit - 1e-9 {
        return Some(TerminationReason::Timeout);
    }
    None
}

#[derive(Debug, Clone)]
pub struct EpisodeStats {
    /// Final x-displacement reached at least 4 m.
    pub success: bool,
    /// X-displacement at episode end, clamped at zero.
    pub mxd: f64,
    pub length_s: f64,
    pub reward_sums: Vec<f64>,
    pub zmp_series: Vec<Option<f64>>,
    pub reason: Option<TerminationReason>,
    /// Forward command the episode was asked to track.
    pub command_vx: f64,
}

pub const SUCCESS_DISTANCE: f64 = 4.0;

/// Metrics from a parsed episode log (displacement against the recorded
/// spawn position).
pub fn episode_metrics(log: &EpisodeLog) -> EpisodeStats {
    let start_x = log
        .meta_value("start_x")
        .and_then(|v| v.parse::<f64>().ok())
        .or_else(|| log.rows.first().map(|r| r.base_pos[0]))
        .unwrap_or(0.0);
    let end_x = log.rows.last().map(|r| r.base_pos[0]).unwrap_or(start_x);
    let displacement = end_x - start_x;
    let mut reward_sums = vec![0.0; NUM_TERMS];
    for row in &log.rows {
        for (s, r) in reward_sums.iter_mut().zip(&row.rewards) {
            *s += r;
        }
    }
    EpisodeStats {
        success: displacement >= SUCCESS_DISTANCE,
        mxd: displacement.max(0.0),
        length_s: log.rows.last().map(|r| r.time).unwrap_or(0.0),
        reward_sums,
        zmp_series: log.rows.iter().map(|r| r.zmp_distance).collect(),
        reason: None,
        command_vx: log.rows.first().map(|r| r.command[0]).unwrap_or(0.0),
    }
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub time: f64,
    pub reason: Option<TerminationReason>,
    pub zmp_distance: Option<f64>,
    pub angular_momentum_norm: f64,
    /// Velocity deltas applied this step, if a push fired.
    pub push: Option<(Vector3<f64>, Vector3<f64>)>,
}

pub struct StepResult {
    pub actor_obs: Vec<f64>,
    pub critic_obs: Vec<f64>,
    pub rewards: RewardVector,
    pub done: bool,
    pub info: StepInfo,
}

/// One simulation environment instance, owned by a single rollout worker.
pub struct Env {
    cfg: EnvConfig,
    base_model: RobotModel,
    model: RobotModel,
    layout: ObsLayout,
    params: SimParams,
    state: SimState,
    memory: ContactMemory,
    terrain: HeightField,
    gains: PdGains,
    draw: RandomizationDraw,
    rng: Stream,
    command: Command,
    builder: ObsBuilder,
    current_target: Vec<f64>,
    pending_target: Vec<f64>,
    action: Vec<f64>,
    prev_action: Vec<f64>,
    prev_prev_action: Vec<f64>,
    last_torques: Vec<f64>,
    prev_base_lin_vel: Vector3<f64>,
    air_time: [f64; 2],
    was_contact: [bool; 2],
    next_push_time: f64,
    nominal_height: f64,
    start_x: f64,
    steps: usize,
    done: bool,
    reason: Option<TerminationReason>,
    reward_sums: Vec<f64>,
    zmp_series: Vec<Option<f64>>,
    level: u32,
    seed: u64,
    logging: bool,
    log_rows: Vec<LogRow>,
}

impl Env {
    pub fn new(model: RobotModel, cfg: EnvConfig) -> Env {
        let action_joints: Vec<usize> = if cfg.freeze_upper_body {
            model.joints_in_group(JointGroup::Leg)
        } else {
            (0..model.n_dof()).collect()
        };
        let layout = ObsLayout::new(&model, action_joints, cfg.privileged_dim);
        let state = SimState::at_default_pose(&model);
        let nominal_height = dynamics::standing_base_height(&model);
        let n = model.n_dof();
        let terrain = HeightField::plane(1.0);
        let memory = ContactMemory::new(&model);
        let gains = PdGains::from_model(&model);
        let draw = RandomizationDraw::nominal(&model);
        let builder = ObsBuilder::start(&layout, &state);
        Env {
            cfg,
            model: model.clone(),
            base_model: model,
            layout,
            params: SimParams::default(),
            state,
            memory,
            terrain,
            gains,
            draw,
            rng: stream(0, 0),
            command: Command {
                vx: 0.0,
                vy: 0.0,
                yaw_rate: 0.0,
            },
            builder,
            current_target: vec![0.0; n],
            pending_target: vec![0.0; n],
            action: vec![],
            prev_action: vec![],
            prev_prev_action: vec![],
            last_torques: vec![0.0; n],
            prev_base_lin_vel: Vector3::zeros(),
            air_time: [0.0; 2],
            was_contact: [false; 2],
            next_push_time: f64::INFINITY,
            nominal_height,
            start_x: 0.0,
            steps: 0,
            done: true,
            reason: None,
            reward_sums: vec![0.0; NUM_TERMS],
            zmp_series: Vec::new(),
            level: 0,
            seed: 0,
            logging: false,
            log_rows: Vec::new(),
        }
    }

    pub fn layout(&self) -> &ObsLayout {
        &self.layout
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn base_model(&self) -> &RobotModel {
        &self.base_model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn terrain(&self) -> &HeightField {
        &self.terrain
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn enable_logging(&mut self, on: bool) {
        self.logging = on;
    }

    pub fn actor_obs_mirror(&self) -> SignedPermutation {
        obs::actor_obs_mirror(&self.base_model, &self.layout)
    }

    pub fn critic_obs_mirror(&self) -> SignedPermutation {
        obs::critic_obs_mirror(&self.base_model, &self.layout)
    }

    pub fn action_mirror(&self) -> SignedPermutation {
        obs::action_mirror(&self.base_model, &self.layout.action_joints)
    }

    /// Start a fresh episode: new terrain, new randomization draw applied to
    /// a copy of the base model, robot at the path start, histories padded
    /// with the initial frame.
    pub fn reset(&mut self, level: u32, seed: u64) -> (Vec<f64>, Vec<f64>) {
        self.level = level;
        self.seed = seed;
        self.rng = stream(seed, 0xE0);
        let kind = match self.cfg.terrain.mode {
            TerrainMode::Curriculum => mix_terrains(&mut self.rng),
            TerrainMode::Fixed => self.cfg.terrain.kind,
        };
        let (mut spec, _) = generate_terrain(kind, level, &mut self.rng);
        spec.path_length = self.cfg.terrain.path_length;
        if self.cfg.terrain.mode == TerrainMode::Fixed {
            if let Some(w) = self.cfg.terrain.width {
                spec.width = w;
            }
            if let Some(g) = self.cfg.terrain.gradient {
                spec.gradient = g;
            }
            if let Some(h) = self.cfg.terrain.step_height {
                spec.step_height = h;
            }
        }
        self.draw =
            RandomizationDraw::sample(&self.cfg.randomization, &self.base_model, &mut self.rng);
        spec.friction = self.draw.friction;
        self.terrain = HeightField::from_spec(&spec);
        self.model = self.draw.apply_to_model(&self.base_model);
        self.gains =
            PdGains::from_model(&self.model).scaled(&self.draw.kp_scale, &self.draw.kd_scale);

        self.state = SimState::at_default_pose(&self.model);
        self.state.base_pos = Vector3::new(self.cfg.spawn_x, 0.0, self.nominal_height + 1e-3);
        self.memory.clear();
        self.command = sample_command(&self.state, &mut self.rng, &self.cfg.command);
        self.builder = ObsBuilder::start(&self.layout, &self.state);
        self.current_target = self.model.default_pose.clone();
        self.pending_target = self.model.default_pose.clone();
        self.action = vec![0.0; self.layout.n_act()];
        self.prev_action = vec![0.0; self.layout.n_act()];
        self.prev_prev_action = vec![0.0; self.layout.n_act()];
        self.last_torques = vec![0.0; self.model.n_dof()];
        self.prev_base_lin_vel = Vector3::zeros();
        self.air_time = [0.0; 2];
        self.was_contact = [true, true];
        self.next_push_time = if self.cfg.randomization.enabled && self.cfg.randomization.pushes {
            self.exp_interval()
        } else {
            f64::INFINITY
        };
        self.start_x = self.state.base_pos.x;
        self.steps = 0;
        self.done = false;
        self.reason = None;
        self.reward_sums = vec![0.0; NUM_TERMS];
        self.zmp_series = Vec::new();
        self.log_rows = Vec::new();

        let contacts = ContactSet::empty();
        self.observations(&contacts)
    }

    fn exp_interval(&mut self) -> f64 {
        let u: f64 = self.rng.gen::<f64>();
        self.state.time + self.cfg.randomization.push_interval_mean * -(1.0 - u).ln()
    }

    /// Instantaneous base velocity deltas (the push mechanism).
    pub fn apply_push(&mut self, dv: Vector3<f64>, dw: Vector3<f64>) {
        self.state.base_lin_vel += dv;
        self.state.base_ang_vel += dw;
    }

    /// Advance one control step.
    pub fn step(&mut self, action: &[f64]) -> StepResult {
        assert!(!self.done, "environment must be reset");
        assert_eq!(action.len(), self.layout.n_act());
        assert!(action.iter().all(|a| a.is_finite()));

        self.prev_prev_action = std::mem::take(&mut self.prev_action);
        self.prev_action = std::mem::take(&mut self.action);
        self.action = action.to_vec();
        self.prev_base_lin_vel = self.state.base_lin_vel;

        let noisy = apply_action_noise(action, self.draw.sigma_an, &mut self.rng);
        let mut target = self.model.default_pose.clone();
        for (k, &j) in self.layout.action_joints.iter().enumerate() {
            target[j] += self.cfg.action_scale * noisy[k];
        }
        self.pending_target = target;
        let delay_steps = ((self.draw.delay / self.cfg.physics_dt).round() as usize)
            .min(self.cfg.control_decimation - 1);

        let mut contacts = ContactSet::empty();
        let mut diverged = false;
        for k in 0..self.cfg.control_decimation {
            if k == delay_steps {
                self.current_target = self.pending_target.clone();
            }
            let mut tau = pd_torques(&self.model, &self.state, &self.current_target, &self.gains);
            if self.draw.tau_rfi != 0.0 {
                for (j, t) in tau.iter_mut().enumerate() {
                    let lim = self.model.joints[j].torque_limit;
                    *t = (*t + self.draw.rfi_torque(&self.cfg.randomization, lim, &mut self.rng))
                        .clamp(-lim, lim);
                }
            }
            match dynamics::step(
                &self.model,
                &self.state,
                &tau,
                &self.terrain,
                &self.params,
                &mut self.memory,
                self.cfg.physics_dt,
            ) {
                Ok((next, c)) => {
                    self.state = next;
                    contacts = c;
                    self.last_torques = tau;
                }
                Err(dynamics::DynamicsError::NumericalDivergence) => {
                    diverged = true;
                    break;
                }
            }
        }

        let mut push = None;
        if !diverged && self.state.time >= self.next_push_time {
            let m = self.cfg.randomization.push_max_v;
            let w = self.cfg.randomization.push_max_w;
            let dv = Vector3::new(self.rng.gen_range(-m..m), self.rng.gen_range(-m..m), 0.0);
            let dw = Vector3::new(
                self.rng.gen_range(-w..w),
                self.rng.gen_range(-w..w),
                self.rng.gen_range(-w..w),
            );
            self.apply_push(dv, dw);
            self.next_push_time = self.exp_interval();
            push = Some((dv, dw));
        }

        self.steps += 1;
        self.command.yaw_rate = heading_yaw_command(&self.state, &self.cfg.command);

        // Air-time tracking per foot.
        let mut touchdown = [None, None];
        for side in 0..2 {
            let now = contacts.feet[side].force.norm() > balance::CONTACT_FORCE_THRESHOLD;
            if now {
                if !self.was_contact[side] {
                    touchdown[side] = Some(self.air_time[side]);
                }
                self.air_time[side] = 0.0;
            } else {
                self.air_time[side] += self.cfg.control_dt();
            }
            self.was_contact[side] = now;
        }

        let kin = forward_kinematics(&self.model, &self.state);
        let momentum =
            momentum_with_rates(&self.model, &self.state, &contacts, self.params.gravity);
        let zml = balance::compute_zml(&momentum);
        let sole = |side: usize| {
            let foot = &self.model.feet[side];
            let link = &kin[foot.link];
            link.origin + link.rot * foot.sole_center
        };
        let csp = balance::support_center(
            &sole(0),
            &sole(1),
            &contacts.feet[0].force,
            &contacts.feet[1].force,
            DEFAULT_SUPPORT_EPSILON,
        );
        let zmp_distance = if csp.contact_count == 0 {
            None
        } else {
            balance::zmp_distance(&csp, &zml).ok()
        };

        let reward_vector = if diverged {
            RewardVector::zeros()
        } else {
            let inputs = RewardInputs {
                model: &self.model,
                state: &self.state,
                kin: &kin,
                contacts: &contacts,
                momentum: &momentum,
                terrain: &self.terrain,
                command: self.command.as_array(),
                action: &self.action,
                prev_action: &self.prev_action,
                prev_prev_action: &self.prev_prev_action,
                target_q: &self.pending_target,
                torques: &self.last_torques,
                prev_base_lin_vel: self.prev_base_lin_vel,
                control_dt: self.cfg.control_dt(),
                touchdown_air_time: touchdown,
                nominal_height: self.nominal_height,
                zmp_distance,
            };
            compute_rewards(&inputs, &self.cfg.rewards)
        };

        let reason = if diverged {
            Some(TerminationReason::NumericalDivergence)
        } else {
            check_termination(
                &self.state,
                &self.terrain,
                self.nominal_height,
                self.cfg.episode_seconds,
            )
        };
        self.done = reason.is_some();
        self.reason = reason;

        for (s, r) in self.reward_sums.iter_mut().zip(&reward_vector.values) {
            *s += r;
        }
        self.zmp_series.push(zmp_distance);

        self.builder
            .push(Frame::from_state(&self.state, self.action.clone()));
        let (actor_obs, critic_obs) = self.observations(&contacts);

        if self.logging {
            self.log_rows.push(LogRow {
                time: self.state.time,
                base_pos: [
                    self.state.base_pos.x,
                    self.state.base_pos.y,
                    self.state.base_pos.z,
                ],
                base_quat: {
                    let c = self.state.base_quat.coords;
                    [c.w, c.x, c.y, c.z]
                },
                command: self.command.as_array(),
                rewards: reward_vector.values.clone(),
                zmp_distance,
                contact: [contacts.feet[0].in_contact, contacts.feet[1].in_contact],
            });
        }

        StepResult {
            actor_obs,
            critic_obs,
            rewards: reward_vector,
            done: self.done,
            info: StepInfo {
                time: self.state.time,
                reason,
                zmp_distance,
                angular_momentum_norm: momentum.angular_base.norm(),
                push,
            },
        }
    }

    fn observations(&mut self, contacts: &ContactSet) -> (Vec<f64>, Vec<f64>) {
        let mut actor = Vec::with_capacity(self.layout.actor_dim());
        self.builder
            .actor_obs(&self.layout, self.command.as_array(), &mut actor);
        let (elev, _) = self
            .terrain
            .height_at(self.state.base_pos.x, self.state.base_pos.y);
        let priv_block = Privileged {
            base_lin_vel: self.state.base_lin_vel,
            base_height: self.state.base_pos.z - elev,
            feet_contact: [contacts.feet[0].in_contact, contacts.feet[1].in_contact],
            kp_scale: self.draw.kp_scale.clone(),
            kd_scale: self.draw.kd_scale.clone(),
            link_mass_scale: self.draw.link_mass_scale.clone(),
        };
        let mut window = vec![0.0; WINDOW_POINTS];
        sample_height_window(
            &self.terrain,
            (self.state.base_pos.x, self.state.base_pos.y),
            self.state.base_pos.z,
            self.state.yaw(),
            &mut window,
        );
        let mut critic = Vec::with_capacity(self.layout.critic_dim());
        obs::critic_obs(&self.layout, &actor, &priv_block, &window, &mut critic);
        (actor, critic)
    }

    /// Episode statistics; call once the episode finished.
    pub fn stats(&self) -> EpisodeStats {
        let displacement = self.state.base_pos.x - self.start_x;
        EpisodeStats {
            success: displacement >= SUCCESS_DISTANCE,
            mxd: displacement.max(0.0),
            length_s: self.steps as f64 * self.cfg.control_dt(),
            reward_sums: self.reward_sums.clone(),
            zmp_series: self.zmp_series.clone(),
            reason: self.reason,
            command_vx: self.command.vx,
        }
    }

    /// Episode log with header metadata (valid when logging was enabled).
    pub fn take_log(&mut self) -> EpisodeLog {
        let spec: &TerrainSpec = &self.terrain.spec;
        let meta = vec![
            ("seed".to_string(), format!("{}", self.seed)),
            ("start_x".into(), format!("{}", self.start_x)),
            ("terrain_kind".into(), spec.kind.as_str().to_string()),
            ("terrain_level".into(), format!("{}", spec.level)),
            ("terrain_width".into(), format!("{}", spec.width)),
            ("terrain_gradient".into(), format!("{}", spec.gradient)),
            (
                "terrain_step_height".into(),
                format!("{}", spec.step_height),
            ),
            ("friction".into(), format!("{}", self.draw.friction)),
            ("load_mass".into(), format!("{}", self.draw.load_mass)),
            ("action_delay_s".into(), format!("{}", self.draw.delay)),
            ("tau_rfi".into(), format!("{}", self.draw.tau_rfi)),
            ("sigma_an".into(), format!("{}", self.draw.sigma_an)),
        ];
        EpisodeLog {
            meta,
            rows: std::mem::take(&mut self.log_rows),
        }
    }
}
