//! Equations of motion for the floating-base tree: composite mass matrix via
//! per-link Jacobians, velocity-product and gravity terms via a recursive
//! Newton-Euler pass, direct Cholesky solve, semi-implicit Euler integration
//! (velocities first, then positions).

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};

use super::contact::{foot_contacts, ContactMemory, ContactSet};
use super::kinematics::{forward_kinematics, joint_axis_world, LinkKin};
use super::model::RobotModel;
use super::{DynamicsError, SimParams, SimState};
use crate::terrain::HeightField;

/// One generalized-velocity coordinate.
#[derive(Clone, Copy)]
enum Dof {
    /// Base translation along a world axis.
    BaseLin(usize),
    /// Base rotation about a world axis through the base position.
    BaseAng(usize),
    /// Revolute joint.
    Joint(usize),
}

struct JacobianContext<'a> {
    model: &'a RobotModel,
    base_pos: Vector3<f64>,
    /// World joint axes.
    axis_w: Vec<Vector3<f64>>,
    /// World joint anchors.
    anchor: Vec<Vector3<f64>>,
}

impl<'a> JacobianContext<'a> {
    fn new(model: &'a RobotModel, state: &SimState, kin: &[LinkKin]) -> Self {
        JacobianContext {
            model,
            base_pos: state.base_pos,
            axis_w: (0..model.n_dof())
                .map(|j| joint_axis_world(model, kin, j))
                .collect(),
            anchor: (0..model.n_dof()).map(|j| kin[j + 1].origin).collect(),
        }
    }

    /// DOFs affecting `link`, in ascending generalized-coordinate order.
    fn dofs_of(&self, link: usize, out: &mut Vec<(usize, Dof)>) {
        out.clear();
        if !self.model.fixed_base {
            for a in 0..3 {
                out.push((a, Dof::BaseLin(a)));
            }
            for a in 0..3 {
                out.push((3 + a, Dof::BaseAng(a)));
            }
        }
        let off = if self.model.fixed_base { 0 } else { 6 };
        for &j in self.model.joint_path(link) {
            out.push((off + j, Dof::Joint(j)));
        }
    }

    /// Point-velocity Jacobian column at world point `p`.
    fn jv(&self, dof: Dof, p: &Vector3<f64>) -> Vector3<f64> {
        match dof {
            Dof::BaseLin(a) => axis_unit(a),
            Dof::BaseAng(a) => axis_unit(a).cross(&(p - self.base_pos)),
            Dof::Joint(j) => self.axis_w[j].cross(&(p - self.anchor[j])),
        }
    }

    /// Angular-velocity Jacobian column.
    fn jw(&self, dof: Dof) -> Vector3<f64> {
        match dof {
            Dof::BaseLin(_) => Vector3::zeros(),
            Dof::BaseAng(a) => axis_unit(a),
            Dof::Joint(j) => self.axis_w[j],
        }
    }
}

fn axis_unit(a: usize) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    v[a] = 1.0;
    v
}

fn world_inertia(model: &RobotModel, kin: &LinkKin, link: usize) -> Matrix3<f64> {
    let r = kin.rot.to_rotation_matrix();
    let rm = r.matrix();
    rm * model.links[link].inertia * rm.transpose()
}

/// Joint-space mass matrix (symmetric positive definite).
fn mass_matrix(model: &RobotModel, kin: &[LinkKin], ctx: &JacobianContext) -> DMatrix<f64> {
    let nv = model.n_vel();
    let mut m = DMatrix::zeros(nv, nv);
    let mut dofs = Vec::with_capacity(nv);
    let mut cols: Vec<(usize, Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(nv);
    for link in 0..model.n_links() {
        let mass = model.links[link].mass;
        let iw = world_inertia(model, &kin[link], link);
        ctx.dofs_of(link, &mut dofs);
        cols.clear();
        for &(idx, dof) in &dofs {
            cols.push((idx, ctx.jv(dof, &kin[link].com), ctx.jw(dof)));
        }
        for a in 0..cols.len() {
            let (ia, jva, jwa) = cols[a];
            let iw_jwa = iw * jwa;
            for &(ib, jvb, jwb) in cols.iter().skip(a) {
                m[(ia, ib)] += mass * jva.dot(&jvb) + iw_jwa.dot(&jwb);
            }
        }
    }
    for a in 0..nv {
        for b in (a + 1)..nv {
            m[(b, a)] = m[(a, b)];
        }
    }
    m
}

/// Generalized bias force: velocity-product terms plus gravity, so that
/// `M u_dot = Q_applied - bias`.
fn bias_forces(
    model: &RobotModel,
    state: &SimState,
    kin: &[LinkKin],
    ctx: &JacobianContext,
    gravity: f64,
) -> DVector<f64> {
    let n_links = model.n_links();
    let g_vec = Vector3::new(0.0, 0.0, -gravity);
    // Forward pass: link accelerations with zero generalized acceleration.
    let mut alpha = vec![Vector3::zeros(); n_links];
    let mut a_origin = vec![Vector3::zeros(); n_links];
    for (j, joint) in model.joints.iter().enumerate() {
        let p = joint.parent_link;
        let c = j + 1;
        let arm = kin[c].origin - kin[p].origin;
        alpha[c] = alpha[p] + kin[p].omega.cross(&(ctx.axis_w[j] * state.qd[j]));
        a_origin[c] =
            a_origin[p] + alpha[p].cross(&arm) + kin[p].omega.cross(&kin[p].omega.cross(&arm));
    }
    // Per-link inertial wrench, gravity included.
    let mut f_acc = vec![Vector3::zeros(); n_links];
    let mut n_acc = vec![Vector3::zeros(); n_links];
    for link in 0..n_links {
        let com_arm = kin[link].com - kin[link].origin;
        let a_com = a_origin[link]
            + alpha[link].cross(&com_arm)
            + kin[link].omega.cross(&kin[link].omega.cross(&com_arm));
        let iw = world_inertia(model, &kin[link], link);
        let f = model.links[link].mass * (a_com - g_vec);
        let n = iw * alpha[link] + kin[link].omega.cross(&(iw * kin[link].omega));
        f_acc[link] = f;
        // Moment about the world origin.
        n_acc[link] = n + kin[link].com.cross(&f);
    }
    // Backward pass: accumulate subtree wrenches and project onto each DOF.
    let nv = model.n_vel();
    let mut bias = DVector::zeros(nv);
    let off = if model.fixed_base { 0 } else { 6 };
    for link in (1..n_links).rev() {
        let j = link - 1;
        bias[off + j] = ctx.axis_w[j]
            .dot(&(n_acc[link] - ctx.anchor[j].cross(&f_acc[link])));
        let parent = model.joints[j].parent_link;
        let (f, n) = (f_acc[link], n_acc[link]);
        f_acc[parent] += f;
        n_acc[parent] += n;
    }
    if !model.fixed_base {
        let f = f_acc[0];
        let n_base = n_acc[0] - state.base_pos.cross(&f);
        for a in 0..3 {
            bias[a] = f[a];
            bias[3 + a] = n_base[a];
        }
    }
    bias
}

/// Joint torques that statically cancel gravity at the current pose
/// (zero-velocity Newton-Euler pass, joint rows only). Combined with a PD
/// law this holds a posture without sag.
pub fn gravity_compensation(model: &RobotModel, state: &SimState, gravity: f64) -> Vec<f64> {
    let mut still = state.clone();
    still.base_lin_vel = Vector3::zeros();
    still.base_ang_vel = Vector3::zeros();
    still.qd.fill(0.0);
    let kin = forward_kinematics(model, &still);
    let ctx = JacobianContext::new(model, &still, &kin);
    let bias = bias_forces(model, &still, &kin, &ctx, gravity);
    let off = if model.fixed_base { 0 } else { 6 };
    (0..model.n_dof()).map(|j| bias[off + j]).collect()
}

/// Static stance feedforward: joint torques for equilibrium of the current
/// pose assuming the body weight is shared equally across all sole points.
/// Adding this to a PD law holds a standing posture without sag.
pub fn standing_feedforward(model: &RobotModel, state: &SimState, gravity: f64) -> Vec<f64> {
    let mut still = state.clone();
    still.base_lin_vel = Vector3::zeros();
    still.base_ang_vel = Vector3::zeros();
    still.qd.fill(0.0);
    let kin = forward_kinematics(model, &still);
    let ctx = JacobianContext::new(model, &still, &kin);
    let bias = bias_forces(model, &still, &kin, &ctx, gravity);
    let off = if model.fixed_base { 0 } else { 6 };
    let mut tau: Vec<f64> = (0..model.n_dof()).map(|j| bias[off + j]).collect();
    let n_points: usize = model.feet.iter().map(|f| f.sole_points.len()).sum();
    let support = Vector3::new(0.0, 0.0, model.total_mass() * gravity / n_points as f64);
    let mut dofs = Vec::new();
    for foot in &model.feet {
        let link = &kin[foot.link];
        ctx.dofs_of(foot.link, &mut dofs);
        for sp in &foot.sole_points {
            let p = link.origin + link.rot * sp;
            for &(idx, dof) in &dofs {
                if idx >= off {
                    tau[idx - off] -= ctx.jv(dof, &p).dot(&support);
                }
            }
        }
    }
    tau
}

/// Joint-limit penalty torque (stiff spring-damper beyond the limit range).
fn joint_limit_torque(model: &RobotModel, state: &SimState, j: usize, params: &SimParams) -> f64 {
    let (lo, hi) = model.joints[j].pos_limits;
    let q = state.q[j];
    if q < lo {
        params.limit_stiffness * (lo - q) - params.limit_damping * state.qd[j]
    } else if q > hi {
        -params.limit_stiffness * (q - hi) - params.limit_damping * state.qd[j]
    } else {
        0.0
    }
}

/// Advance the state by one physics step under the given joint torques.
///
/// Contact forces are evaluated from the pre-step state and held constant
/// over the step; integration is semi-implicit (velocities first). The
/// returned contact set reflects the forces applied during this step, and
/// `memory` carries the tangential friction anchors between steps.
pub fn step(
    model: &RobotModel,
    state: &SimState,
    torques: &[f64],
    terrain: &HeightField,
    params: &SimParams,
    memory: &mut ContactMemory,
    dt: f64,
) -> Result<(SimState, ContactSet), DynamicsError> {
    debug_assert!(dt > 0.0 && dt <= 2e-3, "physics dt must be in (0, 2e-3]");
    assert_eq!(torques.len(), model.n_dof());

    let kin = forward_kinematics(model, state);
    let ctx = JacobianContext::new(model, state, &kin);
    let contacts = foot_contacts(model, &kin, terrain, params, memory);

    let nv = model.n_vel();
    let off = if model.fixed_base { 0 } else { 6 };
    let mut rhs = -bias_forces(model, state, &kin, &ctx, params.gravity);
    for j in 0..model.n_dof() {
        rhs[off + j] += torques[j] + joint_limit_torque(model, state, j, params);
    }
    let mut dofs = Vec::with_capacity(nv);
    for (side, foot) in model.feet.iter().enumerate() {
        if contacts.feet[side].points.is_empty() {
            continue;
        }
        ctx.dofs_of(foot.link, &mut dofs);
        for point in &contacts.feet[side].points {
            for &(idx, dof) in &dofs {
                rhs[idx] += ctx.jv(dof, &point.pos).dot(&point.force);
            }
        }
    }

    let m = mass_matrix(model, &kin, &ctx);
    let chol = m
        .cholesky()
        .ok_or(DynamicsError::NumericalDivergence)?;
    let u_dot = chol.solve(&rhs);

    let mut next = state.clone();
    if !model.fixed_base {
        next.base_lin_vel += dt * Vector3::new(u_dot[0], u_dot[1], u_dot[2]);
        next.base_ang_vel += dt * Vector3::new(u_dot[3], u_dot[4], u_dot[5]);
    }
    for j in 0..model.n_dof() {
        next.qd[j] += dt * u_dot[off + j];
    }
    next.base_pos += dt * next.base_lin_vel;
    next.base_quat = UnitQuaternion::from_scaled_axis(next.base_ang_vel * dt) * next.base_quat;
    next.base_quat = UnitQuaternion::new_normalize(next.base_quat.into_inner());
    for j in 0..model.n_dof() {
        next.q[j] += dt * next.qd[j];
    }
    next.time += dt;

    if !next.is_within(params.divergence_limit) {
        return Err(DynamicsError::NumericalDivergence);
    }
    Ok((next, contacts))
}
