//! Forward kinematics: world pose and velocity of every link.

use nalgebra::{UnitQuaternion, Vector3};

use super::model::RobotModel;
use super::SimState;

#[derive(Debug, Clone)]
pub struct LinkKin {
    /// Link frame orientation (world).
    pub rot: UnitQuaternion<f64>,
    /// Link frame origin (world); for link `j + 1` this is the anchor of
    /// joint `j`.
    pub origin: Vector3<f64>,
    /// Link CoM (world).
    pub com: Vector3<f64>,
    /// Velocity of the link frame origin (world).
    pub v_origin: Vector3<f64>,
    /// Velocity of the link CoM (world).
    pub v_com: Vector3<f64>,
    /// Angular velocity (world).
    pub omega: Vector3<f64>,
}

/// Pose and velocity of every link from the base state and joint state.
/// The root entry reproduces the base pose exactly.
pub fn forward_kinematics(model: &RobotModel, state: &SimState) -> Vec<LinkKin> {
    let mut out = Vec::with_capacity(model.n_links());
    let base = &model.links[0];
    let base_rot = state.base_quat;
    let base_com_arm = base_rot * base.com;
    out.push(LinkKin {
        rot: base_rot,
        origin: state.base_pos,
        com: state.base_pos + base_com_arm,
        v_origin: state.base_lin_vel,
        v_com: state.base_lin_vel + state.base_ang_vel.cross(&base_com_arm),
        omega: state.base_ang_vel,
    });
    for (j, joint) in model.joints.iter().enumerate() {
        let parent = &out[joint.parent_link];
        let rot = parent.rot * UnitQuaternion::from_axis_angle(&joint.axis, state.q[j]);
        let arm = parent.rot * joint.origin;
        let origin = parent.origin + arm;
        let v_origin = parent.v_origin + parent.omega.cross(&arm);
        let axis_world = parent.rot * joint.axis.into_inner();
        let omega = parent.omega + axis_world * state.qd[j];
        let com_arm = rot * model.links[j + 1].com;
        out.push(LinkKin {
            rot,
            origin,
            com: origin + com_arm,
            v_origin,
            v_com: v_origin + omega.cross(&com_arm),
            omega,
        });
    }
    out
}

/// World rotation axis of joint `j` given the kinematics of its child link.
pub fn joint_axis_world(model: &RobotModel, kin: &[LinkKin], j: usize) -> Vector3<f64> {
    kin[j + 1].rot * model.joints[j].axis.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::builtin;
    use nalgebra::Vector3;

    #[test]
    fn identity_state_places_links_at_model_offsets() {
        let model = builtin::biped21();
        let state = SimState::zeroed(&model);
        let kin = forward_kinematics(&model, &state);
        assert_eq!(kin[0].origin, Vector3::zeros());
        // Pelvis -> left hip yaw: pure translation by the joint origin.
        let hip_yaw = model.joint_index("left_hip_yaw").unwrap();
        assert_eq!(kin[hip_yaw + 1].origin, model.joints[hip_yaw].origin);
        // Deep chain: offsets accumulate additively at zero pose.
        let ankle = model.joint_index("left_ankle_roll").unwrap();
        let mut expect = Vector3::zeros();
        let mut link = ankle + 1;
        while link != 0 {
            expect += model.joints[link - 1].origin;
            link = model.joints[link - 1].parent_link;
        }
        assert!((kin[ankle + 1].origin - expect).norm() < 1e-15);
    }

    #[test]
    fn base_translation_shifts_all_links() {
        let model = builtin::biped21();
        let mut state = SimState::zeroed(&model);
        let reference = forward_kinematics(&model, &state);
        state.base_pos = Vector3::new(1.0, 0.0, 0.0);
        let shifted = forward_kinematics(&model, &state);
        for (a, b) in reference.iter().zip(&shifted) {
            let d = b.origin - a.origin;
            assert!((d - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
            let d = b.com - a.com;
            assert!((d - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn link_velocities_match_finite_differences() {
        let model = builtin::biped21();
        let state = crate::dynamics::testutil::random_state(&model, 3);
        let h = 1e-6;
        let plus = state.advanced_kinematically(h);
        let minus = state.advanced_kinematically(-h);
        let kin = forward_kinematics(&model, &state);
        let kin_p = forward_kinematics(&model, &plus);
        let kin_m = forward_kinematics(&model, &minus);
        for i in 0..model.n_links() {
            let fd_com = (kin_p[i].com - kin_m[i].com) / (2.0 * h);
            let scale = kin[i].v_com.norm().max(1.0);
            assert!(
                (fd_com - kin[i].v_com).norm() / scale < 1e-6,
                "link {i}: fd {fd_com:?} vs analytic {:?}",
                kin[i].v_com
            );
        }
    }

}
