//! The vectorized reward suite: named per-term values, never pre-summed.
//! The two balance terms delegate to the balance module; the remaining
//! shaping terms are declared defaults with their scales and weights in
//! config.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::balance;
use crate::dynamics::{ContactSet, LinkKin, MomentumState, RobotModel, SimState};
use crate::terrain::HeightField;

/// Term names, fixed order. Groups: task (0..3), gait (3..11),
/// regularization (11..20).
pub const TERM_NAMES: [&str; 20] = [
    "lin_vel_tracking",
    "ang_vel_tracking",
    "low_speed",
    "zmp",
    "feet_air_time",
    "feet_contact",
    "feet_separation",
    "feet_slippage",
    "feet_height",
    "base_height",
    "feet_edge",
    "angular_momentum",
    "orientation",
    "base_acceleration",
    "action_smoothness",
    "action_closeness",
    "torque",
    "dof_velocity",
    "dof_position_limit",
    "collision",
];

pub const NUM_TERMS: usize = TERM_NAMES.len();

pub fn term_index(name: &str) -> Option<usize> {
    TERM_NAMES.iter().position(|n| *n == name)
}

/// Weighted per-term rewards for one control step.
#[derive(Debug, Clone)]
pub struct RewardVector {
    pub values: Vec<f64>,
}

impl RewardVector {
    pub fn zeros() -> RewardVector {
        RewardVector {
            values: vec![0.0; NUM_TERMS],
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub lin_vel_tracking: f64,
    pub ang_vel_tracking: f64,
    pub low_speed: f64,
    pub zmp: f64,
    pub feet_air_time: f64,
    pub feet_contact: f64,
    pub feet_separation: f64,
    pub feet_slippage: f64,
    pub feet_height: f64,
    pub base_height: f64,
    pub feet_edge: f64,
    pub angular_momentum: f64,
    pub orientation: f64,
    pub base_acceleration: f64,
    pub action_smoothness: f64,
    pub action_closeness: f64,
    pub torque: f64,
    pub dof_velocity: f64,
    pub dof_position_limit: f64,
    pub collision: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            lin_vel_tracking: 1.0,
            ang_vel_tracking: 0.5,
            low_speed: -0.1,
            zmp: 0.5,
            feet_air_time: 0.5,
            feet_contact: 0.3,
            feet_separation: -1.0,
            feet_slippage: -0.1,
            feet_height: -5.0,
            base_height: -10.0,
            feet_edge: -1.0,
            angular_momentum: 0.25,
            orientation: -2.0,
            base_acceleration: -1e-4,
            action_smoothness: -1e-3,
            action_closeness: -0.05,
            torque: -2e-6,
            dof_velocity: -1e-4,
            dof_position_limit: -10.0,
            collision: -1.0,
        }
    }
}

impl RewardWeights {
    pub fn as_vec(&self) -> Vec<f64> {
        vec![
            self.lin_vel_tracking,
            self.ang_vel_tracking,
            self.low_speed,
            self.zmp,
            self.feet_air_time,
            self.feet_contact,
            self.feet_separation,
            self.feet_slippage,
            self.feet_height,
            self.base_height,
            self.feet_edge,
            self.angular_momentum,
            self.orientation,
            self.base_acceleration,
            self.action_smoothness,
            self.action_closeness,
            self.torque,
            self.dof_velocity,
            self.dof_position_limit,
            self.collision,
        ]
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        match name {
            "lin_vel_tracking" => self.lin_vel_tracking = value,
            "ang_vel_tracking" => self.ang_vel_tracking = value,
            "low_speed" => self.low_speed = value,
            "zmp" => self.zmp = value,
            "feet_air_time" => self.feet_air_time = value,
            "feet_contact" => self.feet_contact = value,
            "feet_separation" => self.feet_separation = value,
            "feet_slippage" => self.feet_slippage = value,
            "feet_height" => self.feet_height = value,
            "base_height" => self.base_height = value,
            "feet_edge" => self.feet_edge = value,
            "angular_momentum" => self.angular_momentum = value,
            "orientation" => self.orientation = value,
            "base_acceleration" => self.base_acceleration = value,
            "action_smoothness" => self.action_smoothness = value,
            "action_closeness" => self.action_closeness = value,
            "torque" => self.torque = value,
            "dof_velocity" => self.dof_velocity = value,
            "dof_position_limit" => self.dof_position_limit = value,
            "collision" => self.collision = value,
            _ => return false,
        }
        true
    }
}

/// Shaping scales for the declared-default term forms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    /// Variance of the velocity-tracking exponentials.
    pub tracking_sigma: f64,
    /// Command speed below which gait bonuses are not granted.
    pub moving_threshold: f64,
    /// Target swing duration (s).
    pub air_time_target: f64,
    /// Lateral feet separation band (m).
    pub separation_band: (f64, f64),
    /// Target swing apex clearance (m).
    pub swing_height_target: f64,
    /// Sole points closer than this to the path edge are penalized (m).
    pub edge_margin: f64,
    /// Fraction of the position-limit range treated as soft.
    pub soft_limit_fraction: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            tracking_sigma: 0.25,
            moving_threshold: 0.1,
            air_time_target: 0.5,
            separation_band: (0.15, 0.45),
            swing_height_target: 0.08,
            edge_margin: 0.02,
            soft_limit_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub params: RewardParams,
}

/// Everything a reward evaluation needs from the current control step.
pub struct RewardInputs<'a> {
    pub model: &'a RobotModel,
    pub state: &'a SimState,
    pub kin: &'a [LinkKin],
    pub contacts: &'a ContactSet,
    pub momentum: &'a MomentumState,
    pub terrain: &'a HeightField,
    /// (vx, vy, yaw rate) command.
    pub command: [f64; 3],
    /// Raw policy actions: current, previous, one before that.
    pub action: &'a [f64],
    pub prev_action: &'a [f64],
    pub prev_prev_action: &'a [f64],
    /// Full-robot PD targets for the current step.
    pub target_q: &'a [f64],
    /// Torques applied in the last physics sub-step.
    pub torques: &'a [f64],
    /// Base linear velocity at the previous control step.
    pub prev_base_lin_vel: Vector3<f64>,
    /// Control period (s).
    pub control_dt: f64,
    /// Per-foot swing duration at touchdown, None when no touchdown
    /// happened this step.
    pub touchdown_air_time: [Option<f64>; 2],
    /// Nominal standing base height over terrain.
    pub nominal_height: f64,
    /// ZMP distance for this step, None during flight or degenerate ZML.
    pub zmp_distance: Option<f64>,
}

/// Evaluate every term and multiply by its weight.
pub fn compute_rewards(inp: &RewardInputs, cfg: &RewardConfig) -> RewardVector {
    let p = &cfg.params;
    let w = cfg.weights.as_vec();
    let mut raw = [0.0; NUM_TERMS];

    let yaw = inp.state.yaw();
    let (cy, sy) = (yaw.cos(), yaw.sin());
    let v = inp.state.base_lin_vel;
    let v_local = Vector2::new(cy * v.x + sy * v.y, -sy * v.x + cy * v.y);
    let cmd_v = Vector2::new(inp.command[0], inp.command[1]);
    let moving = cmd_v.norm() > p.moving_threshold;

    // Task group.
    let lin_err = (v_local - cmd_v).norm_squared();
    raw[0] = (-lin_err / p.tracking_sigma).exp();
    let ang_err = inp.state.base_ang_vel.z - inp.command[2];
    raw[1] = (-(ang_err * ang_err) / p.tracking_sigma).exp();
    raw[2] = if inp.command[0] > 0.2 && v_local.x.abs() < 0.5 * inp.command[0] {
        1.0
    } else {
        0.0
    };

    // Gait group.
    raw[3] = inp.zmp_distance.map_or(0.0, balance::reward_zmp);
    if moving {
        for side in 0..2 {
            if let Some(air) = inp.touchdown_air_time[side] {
                raw[4] += air - p.air_time_target;
            }
        }
        let single_support = inp.contacts.feet[0].in_contact != inp.contacts.feet[1].in_contact;
        raw[5] = if single_support { 1.0 } else { 0.0 };
    }
    let sole = |side: usize| {
        let foot = &inp.model.feet[side];
        let link = &inp.kin[foot.link];
        let arm = link.rot * foot.sole_center;
        (link.origin + arm, link.v_origin + link.omega.cross(&arm))
    };
    let (sole_l, vel_l) = sole(0);
    let (sole_r, vel_r) = sole(1);
    let lateral = {
        let d = sole_r - sole_l;
        (-sy * d.x + cy * d.y).abs()
    };
    raw[6] = (p.separation_band.0 - lateral).max(0.0) + (lateral - p.separation_band.1).max(0.0);
    for (side, vel) in [(0, vel_l), (1, vel_r)] {
        if inp.contacts.feet[side].in_contact {
            raw[7] += vel.x * vel.x + vel.y * vel.y;
        }
    }
    for (side, pos) in [(0, sole_l), (1, sole_r)] {
        if !inp.contacts.feet[side].in_contact && moving {
            let (elev, _) = inp.terrain.height_at(pos.x, pos.y);
            let clearance = pos.z - elev;
            let d = clearance - p.swing_height_target;
            raw[8] += d * d;
        }
    }
    let (terrain_under_base, _) = inp
        .terrain
        .height_at(inp.state.base_pos.x, inp.state.base_pos.y);
    let height_err = (inp.state.base_pos.z - terrain_under_base) - inp.nominal_height;
    raw[9] = height_err * height_err;
    for foot in &inp.model.feet {
        let link = &inp.kin[foot.link];
        let offending = foot.sole_points.iter().any(|sp| {
            let pos = link.origin + link.rot * sp;
            inp.terrain.edge_clearance(pos.y) < p.edge_margin
        });
        if offending {
            raw[10] += 1.0;
        }
    }

    // Regularization group.
    raw[11] = balance::reward_angular_momentum(&inp.momentum.angular_base);
    let g = inp.state.projected_gravity();
    raw[12] = g.x * g.x + g.y * g.y;
    let dv = (inp.state.base_lin_vel - inp.prev_base_lin_vel) / inp.control_dt;
    raw[13] = dv.norm_squared();
    raw[14] = inp
        .action
        .iter()
        .zip(inp.prev_action)
        .zip(inp.prev_prev_action)
        .map(|((a, b), c)| {
            let d = a - 2.0 * b + c;
            d * d
        })
        .sum();
    raw[15] = inp
        .target_q
        .iter()
        .zip(&inp.state.q)
        .map(|(t, q)| (t - q) * (t - q))
        .sum();
    raw[16] = inp.torques.iter().map(|t| t * t).sum();
    raw[17] = inp.state.qd.iter().map(|v| v * v).sum();
    for (j, joint) in inp.model.joints.iter().enumerate() {
        let (lo, hi) = joint.pos_limits;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * p.soft_limit_fraction;
        let q = inp.state.q[j];
        raw[18] += (q - (mid + half)).max(0.0) + ((mid - half) - q).max(0.0);
    }
    let foot_links: Vec<usize> = inp.model.feet.iter().map(|f| f.link).collect();
    for link in 0..inp.model.n_links() {
        if foot_links.contains(&link) {
            continue;
        }
        let com = inp.kin[link].com;
        let (elev, _) = inp.terrain.height_at(com.x, com.y);
        if com.z - elev < inp.model.links[link].collision_radius {
            raw[19] += 1.0;
        }
    }

    RewardVector {
        values: raw.iter().zip(&w).map(|(r, w)| r * w).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::builtin;
    use crate::dynamics::{compute_momentum, forward_kinematics};

    fn base_inputs<'a>(
        model: &'a RobotModel,
        state: &'a SimState,
        kin: &'a [LinkKin],
        contacts: &'a ContactSet,
        momentum: &'a MomentumState,
        terrain: &'a HeightField,
        zeros: &'a [f64],
        target: &'a [f64],
    ) -> RewardInputs<'a> {
        RewardInputs {
            model,
            state,
            kin,
            contacts,
            momentum,
            terrain,
            command: [0.0, 0.0, 0.0],
            action: zeros,
            prev_action: zeros,
            prev_prev_action: zeros,
            target_q: target,
            torques: zeros,
            prev_base_lin_vel: state.base_lin_vel,
            control_dt: 0.02,
            touchdown_air_time: [None, None],
            nominal_height: crate::dynamics::standing_base_height(model),
            zmp_distance: None,
        }
    }

    #[test]
    fn perfect_tracking_gives_unit_task_terms() {
        let model = builtin::biped10();
        let mut state = SimState::at_default_pose(&model);
        state.base_pos.z = crate::dynamics::standing_base_height(&model);
        let kin = forward_kinematics(&model, &state);
        let contacts = ContactSet::empty();
        let momentum = compute_momentum(&model, &state);
        let terrain = HeightField::plane(1.0);
        let zeros = vec![0.0; model.n_dof()];
        let target = model.default_pose.clone();
        let inp = base_inputs(&model, &state, &kin, &contacts, &momentum, &terrain, &zeros, &target);
        let cfg = RewardConfig::default();
        let r = compute_rewards(&inp, &cfg);
        assert_eq!(r.values[0], cfg.weights.lin_vel_tracking);
        assert_eq!(r.values[1], cfg.weights.ang_vel_tracking);
        assert_eq!(r.values.len(), NUM_TERMS);
    }

    #[test]
    fn double_support_earns_no_single_contact_bonus() {
        let model = builtin::biped10();
        let mut state = SimState::at_default_pose(&model);
        state.base_pos.z = crate::dynamics::standing_base_height(&model);
        let kin = forward_kinematics(&model, &state);
        let mut contacts = ContactSet::empty();
        contacts.feet[0].in_contact = true;
        contacts.feet[1].in_contact = true;
        let momentum = compute_momentum(&model, &state);
        let terrain = HeightField::plane(1.0);
        let zeros = vec![0.0; model.n_dof()];
        let target = model.default_pose.clone();
        let mut inp =
            base_inputs(&model, &state, &kin, &contacts, &momentum, &terrain, &zeros, &target);
        inp.command = [0.6, 0.0, 0.0];
        let r = compute_rewards(&inp, &RewardConfig::default());
        assert_eq!(r.values[term_index("feet_contact").unwrap()], 0.0);
    }

    #[test]
    fn balance_terms_match_balance_module_exactly() {
        let model = builtin::biped10();
        let state = crate::dynamics::testutil::random_state(&model, 77);
        let kin = forward_kinematics(&model, &state);
        let contacts = ContactSet::empty();
        let momentum = compute_momentum(&model, &state);
        let terrain = HeightField::plane(1.0);
        let zeros = vec![0.0; model.n_dof()];
        let target = model.default_pose.clone();
        let mut inp =
            base_inputs(&model, &state, &kin, &contacts, &momentum, &terrain, &zeros, &target);
        inp.zmp_distance = Some(0.037);
        let cfg = RewardConfig::default();
        let r = compute_rewards(&inp, &cfg);
        let zi = term_index("zmp").unwrap();
        let ai = term_index("angular_momentum").unwrap();
        assert!(
            (r.values[zi] - cfg.weights.zmp * balance::reward_zmp(0.037)).abs() < 1e-12
        );
        assert!(
            (r.values[ai]
                - cfg.weights.angular_momentum
                    * balance::reward_angular_momentum(&momentum.angular_base))
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn flight_phase_zeroes_the_zmp_term() {
        let model = builtin::biped10();
        let state = SimState::at_default_pose(&model);
        let kin = forward_kinematics(&model, &state);
        let contacts = ContactSet::empty();
        let momentum = compute_momentum(&model, &state);
        let terrain = HeightField::plane(1.0);
        let zeros = vec![0.0; model.n_dof()];
        let target = model.default_pose.clone();
        let inp = base_inputs(&model, &state, &kin, &contacts, &momentum, &terrain, &zeros, &target);
        let r = compute_rewards(&inp, &RewardConfig::default());
        assert_eq!(r.values[term_index("zmp").unwrap()], 0.0);
    }

    #[test]
    fn term_names_align_with_weight_vector() {
        let w = RewardWeights::default();
        let v = w.as_vec();
        assert_eq!(v.len(), NUM_TERMS);
        assert_eq!(v[term_index("zmp").unwrap()], w.zmp);
        assert_eq!(v[term_index("collision").unwrap()], w.collision);
        let mut w2 = RewardWeights::default();
        assert!(w2.set("zmp", 0.0));
        assert!(!w2.set("nonexistent", 1.0));
        assert_eq!(w2.as_vec()[term_index("zmp").unwrap()], 0.0);
    }
}
