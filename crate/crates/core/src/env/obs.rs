//! Observation assembly and the reflection maps over observation and action
//! vectors.
//!
//! Actor observation layout (quantity-major, each history block oldest
//! frame first):
//!
//! ```text
//! [ command (3) | q history (4n) | qd history (4n) | base angular velocity
//!   history (12) | projected gravity history (12) | previous actions (4m) ]
//! ```
//!
//! with `n` actuated joints and `m` policy-controlled joints (m = n unless
//! the upper body is frozen). Total: 3 + 4(2n + 6 + m); for m = n this is
//! the familiar 3 + 4(3n + 6).
//!
//! Critic observation: actor observation, then the privileged block (base
//! linear velocity 3, base height 1, feet contact indicators 2, PD gain
//! scales 2n, link mass scales, zero padding), then the 187-point height
//! window.

use nalgebra::Vector3;

use crate::dynamics::{RobotModel, SimState};
use crate::terrain::{WINDOW_NX, WINDOW_NY, WINDOW_POINTS};

pub const HISTORY: usize = 4;

#[derive(Debug, Clone)]
pub struct ObsLayout {
    pub n_dof: usize,
    pub n_links: usize,
    /// Policy-controlled joint indices (ascending).
    pub action_joints: Vec<usize>,
    pub privileged_dim: usize,
}

impl ObsLayout {
    pub fn new(model: &RobotModel, action_joints: Vec<usize>, privileged_dim: usize) -> ObsLayout {
        let natural = 6 + 2 * model.n_dof() + model.n_links();
        assert!(
            natural <= privileged_dim,
            "privileged block needs at least {natural} dims"
        );
        ObsLayout {
            n_dof: model.n_dof(),
            n_links: model.n_links(),
            action_joints,
            privileged_dim,
        }
    }

    pub fn n_act(&self) -> usize {
        self.action_joints.len()
    }

    pub fn actor_dim(&self) -> usize {
        3 + HISTORY * (2 * self.n_dof + 6 + self.n_act())
    }

    pub fn critic_dim(&self) -> usize {
        self.actor_dim() + self.privileged_dim + WINDOW_POINTS
    }
}

/// One per-control-step snapshot of the proprioceptive quantities.
#[derive(Debug, Clone)]
pub struct Frame {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub omega: Vector3<f64>,
    pub gravity: Vector3<f64>,
    pub action: Vec<f64>,
}

impl Frame {
    pub fn from_state(state: &SimState, action: Vec<f64>) -> Frame {
        Frame {
            q: state.q.clone(),
            qd: state.qd.clone(),
            omega: state.base_ang_vel,
            gravity: state.projected_gravity(),
            action,
        }
    }
}

/// Rolling 4-frame history buffer.
#[derive(Debug, Clone)]
pub struct ObsBuilder {
    frames: Vec<Frame>,
}

impl ObsBuilder {
    /// Start an episode: the state frame is replicated across the history,
    /// actions are zero.
    pub fn start(layout: &ObsLayout, state: &SimState) -> ObsBuilder {
        let frame = Frame::from_state(state, vec![0.0; layout.n_act()]);
        ObsBuilder {
            frames: vec![frame; HISTORY],
        }
    }

    pub fn push(&mut self, frame: Frame) {
        self.frames.remove(0);
        self.frames.push(frame);
    }

    /// Assemble the actor observation for command `(vx, vy, yaw_rate)`.
    pub fn actor_obs(&self, layout: &ObsLayout, command: [f64; 3], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&command);
        for f in &self.frames {
            out.extend_from_slice(&f.q);
        }
        for f in &self.frames {
            out.extend_from_slice(&f.qd);
        }
        for f in &self.frames {
            out.extend_from_slice(f.omega.as_slice());
        }
        for f in &self.frames {
            out.extend_from_slice(f.gravity.as_slice());
        }
        for f in &self.frames {
            out.extend_from_slice(&f.action);
        }
        debug_assert_eq!(out.len(), layout.actor_dim());
    }
}

/// Privileged block inputs gathered by the environment.
#[derive(Debug, Clone)]
pub struct Privileged {
    pub base_lin_vel: Vector3<f64>,
    pub base_height: f64,
    pub feet_contact: [bool; 2],
    pub kp_scale: Vec<f64>,
    pub kd_scale: Vec<f64>,
    pub link_mass_scale: Vec<f64>,
}

/// Critic observation: actor obs ++ privileged block ++ height window.
pub fn critic_obs(
    layout: &ObsLayout,
    actor: &[f64],
    priv_block: &Privileged,
    window: &[f64],
    out: &mut Vec<f64>,
) {
    debug_assert_eq!(actor.len(), layout.actor_dim());
    debug_assert_eq!(window.len(), WINDOW_POINTS);
    out.clear();
    out.extend_from_slice(actor);
    let start = out.len();
    out.extend_from_slice(priv_block.base_lin_vel.as_slice());
    out.push(priv_block.base_height);
    out.push(priv_block.feet_contact[0] as u8 as f64);
    out.push(priv_block.feet_contact[1] as u8 as f64);
    out.extend_from_slice(&priv_block.kp_scale);
    out.extend_from_slice(&priv_block.kd_scale);
    out.extend_from_slice(&priv_block.link_mass_scale);
    while out.len() - start < layout.privileged_dim {
        out.push(0.0);
    }
    assert_eq!(out.len() - start, layout.privileged_dim);
    out.extend_from_slice(window);
    debug_assert_eq!(out.len(), layout.critic_dim());
}

/// A linear involution `out[i] = sign[i] * x[src[i]]`.
#[derive(Debug, Clone)]
pub struct SignedPermutation {
    pub src: Vec<usize>,
    pub sign: Vec<f64>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> SignedPermutation {
        SignedPermutation {
            src: (0..n).collect(),
            sign: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.src.len());
        self.src
            .iter()
            .zip(&self.sign)
            .map(|(&s, &g)| g * x[s])
            .collect()
    }

    fn set(&mut self, dst: usize, src: usize, sign: f64) {
        self.src[dst] = src;
        self.sign[dst] = sign;
    }
}

/// Reflection over policy actions (and any joint-space vector restricted to
/// the action set). The action set must be closed under the symmetry map.
pub fn action_mirror(model: &RobotModel, action_joints: &[usize]) -> SignedPermutation {
    let mut map = SignedPermutation::identity(action_joints.len());
    for (k, &j) in action_joints.iter().enumerate() {
        let mj = model.mirror_joint[j];
        let mk = action_joints
            .iter()
            .position(|&a| a == mj)
            .expect("action joint set must be closed under the symmetry map");
        map.set(k, mk, model.mirror_sign[j]);
    }
    map
}

/// Reflection over the actor observation.
pub fn actor_obs_mirror(model: &RobotModel, layout: &ObsLayout) -> SignedPermutation {
    let n = layout.n_dof;
    let m = layout.n_act();
    let mut map = SignedPermutation::identity(layout.actor_dim());
    // Command: vx, vy, yaw rate.
    map.set(0, 0, 1.0);
    map.set(1, 1, -1.0);
    map.set(2, 2, -1.0);
    let mut off = 3;
    // Joint position and velocity histories.
    for _ in 0..2 {
        for f in 0..HISTORY {
            for j in 0..n {
                map.set(
                    off + f * n + j,
                    off + f * n + model.mirror_joint[j],
                    model.mirror_sign[j],
                );
            }
        }
        off += HISTORY * n;
    }
    // Base angular velocity (pseudovector): negate x and z.
    for f in 0..HISTORY {
        let b = off + f * 3;
        map.set(b, b, -1.0);
        map.set(b + 1, b + 1, 1.0);
        map.set(b + 2, b + 2, -1.0);
    }
    off += HISTORY * 3;
    // Projected gravity (vector): negate y.
    for f in 0..HISTORY {
        let b = off + f * 3;
        map.set(b, b, 1.0);
        map.set(b + 1, b + 1, -1.0);
        map.set(b + 2, b + 2, 1.0);
    }
    off += HISTORY * 3;
    // Action history blocks.
    let amap = action_mirror(model, &layout.action_joints);
    for f in 0..HISTORY {
        for k in 0..m {
            map.set(off + f * m + k, off + f * m + amap.src[k], amap.sign[k]);
        }
    }
    map
}

/// Reflection over the critic observation (actor part, privileged block,
/// height window).
pub fn critic_obs_mirror(model: &RobotModel, layout: &ObsLayout) -> SignedPermutation {
    let actor = actor_obs_mirror(model, layout);
    let n = layout.n_dof;
    let mut map = SignedPermutation::identity(layout.critic_dim());
    map.src[..actor.len()].copy_from_slice(&actor.src);
    map.sign[..actor.len()].copy_from_slice(&actor.sign);
    let mut off = actor.len();
    // Base linear velocity: negate y.
    map.set(off, off, 1.0);
    map.set(off + 1, off + 1, -1.0);
    map.set(off + 2, off + 2, 1.0);
    // Base height unchanged; feet contact indicators swap.
    map.set(off + 4, off + 5, 1.0);
    map.set(off + 5, off + 4, 1.0);
    off += 6;
    // PD gain scales permute without sign flips.
    for block in 0..2 {
        for j in 0..n {
            map.set(off + block * n + j, off + block * n + model.mirror_joint[j], 1.0);
        }
    }
    off += 2 * n;
    // Link mass scales permute via the link map.
    for l in 0..layout.n_links {
        map.set(off + l, off + model.mirror_link(l), 1.0);
    }
    off = actor.len() + layout.privileged_dim; // padding stays identity
    // Height window: lateral axis flips.
    for ix in 0..WINDOW_NX {
        for iy in 0..WINDOW_NY {
            map.set(
                off + ix * WINDOW_NY + iy,
                off + ix * WINDOW_NY + (WINDOW_NY - 1 - iy),
                1.0,
            );
        }
    }
    map
}
