//! Articulated rigid-body biped: model description, forward kinematics,
//! momentum bookkeeping, PD actuation, penalty contact and semi-implicit
//! time integration.

pub mod articulated;
pub mod contact;
pub mod kinematics;
pub mod mirror;
pub mod model;
pub mod momentum;

pub use articulated::step;
pub use contact::{ContactMemory, ContactSet, FootContact};
pub use kinematics::{forward_kinematics, LinkKin};
pub use mirror::mirror_state;
pub use model::{JointGroup, RobotModel};
pub use momentum::{compute_momentum, momentum_rates, MomentumState};

use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

/// Standard gravity magnitude (m/s^2); the gravity vector is `[0, 0, -g]`.
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum DynamicsError {
    /// A state entry left the trust region (non-finite or |x| > 1e6).
    /// The caller terminates the episode.
    #[error("numerical divergence during integration")]
    NumericalDivergence,
}

/// Physical state of the robot: the single source of physical truth.
#[derive(Debug, Clone)]
pub struct SimState {
    /// Base position (world, m).
    pub base_pos: Vector3<f64>,
    /// Base orientation (unit quaternion).
    pub base_quat: UnitQuaternion<f64>,
    /// Base linear velocity (world, m/s).
    pub base_lin_vel: Vector3<f64>,
    /// Base angular velocity (world, rad/s).
    pub base_ang_vel: Vector3<f64>,
    /// Joint positions (rad).
    pub q: Vec<f64>,
    /// Joint velocities (rad/s).
    pub qd: Vec<f64>,
    /// Simulation time (s).
    pub time: f64,
}

impl SimState {
    pub fn zeroed(model: &RobotModel) -> SimState {
        SimState {
            base_pos: Vector3::zeros(),
            base_quat: UnitQuaternion::identity(),
            base_lin_vel: Vector3::zeros(),
            base_ang_vel: Vector3::zeros(),
            q: vec![0.0; model.n_dof()],
            qd: vec![0.0; model.n_dof()],
            time: 0.0,
        }
    }

    /// Zero twist at the model default pose.
    pub fn at_default_pose(model: &RobotModel) -> SimState {
        let mut s = Self::zeroed(model);
        s.q.copy_from_slice(&model.default_pose);
        s
    }

    /// Advance positions by `h` along the current velocities, holding the
    /// velocities fixed. Used by finite-difference oracles.
    pub fn advanced_kinematically(&self, h: f64) -> SimState {
        let mut s = self.clone();
        s.base_pos += h * self.base_lin_vel;
        s.base_quat =
            UnitQuaternion::from_scaled_axis(self.base_ang_vel * h) * self.base_quat;
        for j in 0..self.q.len() {
            s.q[j] += h * self.qd[j];
        }
        s.time += h;
        s
    }

    /// Projected gravity: the unit world down direction expressed in the base
    /// frame.
    pub fn projected_gravity(&self) -> Vector3<f64> {
        self.base_quat.inverse_transform_vector(&Vector3::new(0.0, 0.0, -1.0))
    }

    /// Yaw of the base heading (rotation of base +x about world z).
    pub fn yaw(&self) -> f64 {
        let fwd = self.base_quat * Vector3::x();
        fwd.y.atan2(fwd.x)
    }

    pub fn is_within(&self, limit: f64) -> bool {
        let ok = |v: &Vector3<f64>| v.iter().all(|x| x.is_finite() && x.abs() <= limit);
        ok(&self.base_pos)
            && ok(&self.base_lin_vel)
            && ok(&self.base_ang_vel)
            && self.base_quat.coords.iter().all(|x| x.is_finite())
            && self
                .q
                .iter()
                .chain(self.qd.iter())
                .all(|x| x.is_finite() && x.abs() <= limit)
    }
}

/// Simulation parameters. Contact is penalty-based: a normal spring-damper
/// per sole point, tangential stick-slip anchor springs clamped to the
/// Coulomb cone.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub gravity: f64,
    /// Contact normal stiffness (N/m).
    pub contact_kn: f64,
    /// Contact normal damping (N·s/m).
    pub contact_cn: f64,
    /// Tangential anchor-spring stiffness (N/m).
    pub contact_kt: f64,
    /// Tangential damping (N·s/m).
    pub contact_ct: f64,
    /// Penetration depth cap for the normal spring (m); bounds forces on bad
    /// states.
    pub contact_max_depth: f64,
    /// Joint-limit penalty stiffness (N·m/rad).
    pub limit_stiffness: f64,
    /// Joint-limit penalty damping (N·m·s/rad).
    pub limit_damping: f64,
    /// Divergence trust region for state entries.
    pub divergence_limit: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            gravity: GRAVITY,
            contact_kn: 2e4,
            contact_cn: 100.0,
            contact_kt: 1e4,
            contact_ct: 100.0,
            contact_max_depth: 0.1,
            limit_stiffness: 300.0,
            limit_damping: 5.0,
            divergence_limit: 1e6,
        }
    }
}

/// Per-joint PD gains; the randomization layer scales the model defaults.
#[derive(Debug, Clone)]
pub struct PdGains {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
}

impl PdGains {
    pub fn from_model(model: &RobotModel) -> PdGains {
        PdGains {
            kp: model.joints.iter().map(|j| j.kp).collect(),
            kd: model.joints.iter().map(|j| j.kd).collect(),
        }
    }

    pub fn scaled(&self, kp_scale: &[f64], kd_scale: &[f64]) -> PdGains {
        PdGains {
            kp: self.kp.iter().zip(kp_scale).map(|(k, s)| k * s).collect(),
            kd: self.kd.iter().zip(kd_scale).map(|(k, s)| k * s).collect(),
        }
    }
}

/// Base height at which the lowest sole point touches z = 0 in the default
/// pose: the nominal standing height used for spawning and termination.
pub fn standing_base_height(model: &RobotModel) -> f64 {
    let state = SimState::at_default_pose(model);
    let kin = forward_kinematics(model, &state);
    let mut min_z = f64::INFINITY;
    for foot in &model.feet {
        let link = &kin[foot.link];
        for sp in &foot.sole_points {
            let p = link.origin + link.rot * sp;
            min_z = min_z.min(p.z);
        }
    }
    -min_z
}

/// Joint-space PD law: `tau_j = kp_j (target_j - q_j) - kd_j qd_j`, clamped
/// to the per-joint torque limit.
pub fn pd_torques(
    model: &RobotModel,
    state: &SimState,
    target_q: &[f64],
    gains: &PdGains,
) -> Vec<f64> {
    assert_eq!(target_q.len(), model.n_dof());
    (0..model.n_dof())
        .map(|j| {
            let raw = gains.kp[j] * (target_q[j] - state.q[j]) - gains.kd[j] * state.qd[j];
            let lim = model.joints[j].torque_limit;
            raw.clamp(-lim, lim)
        })
        .collect()
}
