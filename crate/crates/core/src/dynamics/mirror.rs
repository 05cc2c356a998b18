//! Physical-state realization of the x-z-plane reflection.

use super::model::{reflect_pseudo, reflect_quat, reflect_y, RobotModel};
use super::SimState;

/// Reflect a simulator state across the x-z plane: y components of position
/// and linear velocity negate, roll/yaw of orientation and angular velocity
/// negate, joints permute and flip sign per the model symmetry map.
pub fn mirror_state(model: &RobotModel, state: &SimState) -> SimState {
    let n = model.n_dof();
    let mut q = vec![0.0; n];
    let mut qd = vec![0.0; n];
    for j in 0..n {
        let m = model.mirror_joint[j];
        q[j] = model.mirror_sign[j] * state.q[m];
        qd[j] = model.mirror_sign[j] * state.qd[m];
    }
    SimState {
        base_pos: reflect_y(&state.base_pos),
        base_quat: reflect_quat(&state.base_quat),
        base_lin_vel: reflect_y(&state.base_lin_vel),
        base_ang_vel: reflect_pseudo(&state.base_ang_vel),
        q,
        qd,
        time: state.time,
    }
}

/// Mirror a joint-space vector (actions, torques, targets).
pub fn mirror_joint_vec(model: &RobotModel, v: &[f64]) -> Vec<f64> {
    (0..model.n_dof())
        .map(|j| model.mirror_sign[j] * v[model.mirror_joint[j]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::builtin;
    use crate::dynamics::{step, testutil, SimParams};
    use crate::terrain::HeightField;
    use nalgebra::Vector3;

    #[test]
    fn symmetric_state_is_a_fixed_point() {
        let model = builtin::biped21();
        let mut state = SimState::at_default_pose(&model);
        state.base_pos = Vector3::new(0.3, 0.0, 1.0);
        state.base_lin_vel = Vector3::new(0.5, 0.0, -0.1);
        // Pure pitch is mirror-symmetric.
        state.base_quat =
            nalgebra::UnitQuaternion::from_scaled_axis(Vector3::new(0.0, 0.2, 0.0));
        state.base_ang_vel = Vector3::new(0.0, 0.4, 0.0);
        let mirrored = mirror_state(&model, &state);
        assert!((mirrored.base_pos - state.base_pos).norm() < 1e-15);
        assert!((mirrored.base_lin_vel - state.base_lin_vel).norm() < 1e-15);
        for j in 0..model.n_dof() {
            assert_eq!(mirrored.q[j], state.q[j]);
        }
    }

    #[test]
    fn mirror_is_an_involution() {
        let model = builtin::biped21();
        let state = testutil::random_state(&model, 11);
        let twice = mirror_state(&model, &mirror_state(&model, &state));
        assert!((twice.base_pos - state.base_pos).norm() < 1e-12);
        assert!((twice.base_lin_vel - state.base_lin_vel).norm() < 1e-12);
        assert!((twice.base_ang_vel - state.base_ang_vel).norm() < 1e-12);
        assert!(
            (twice.base_quat.coords - state.base_quat.coords).norm() < 1e-12
        );
        for j in 0..model.n_dof() {
            assert!((twice.q[j] - state.q[j]).abs() < 1e-12);
            assert!((twice.qd[j] - state.qd[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn stepping_commutes_with_mirroring_on_symmetric_terrain() {
        let model = builtin::biped21();
        let mut nominal = testutil::random_state(&model, 21);
        // Start near standing so contacts engage during the window.
        nominal.base_pos = Vector3::new(0.0, 0.05, crate::dynamics::standing_base_height(&model) + 0.02);
        nominal.base_lin_vel *= 0.3;
        nominal.base_ang_vel *= 0.3;
        for j in 0..model.n_dof() {
            nominal.q[j] = model.default_pose[j] + 0.2 * (nominal.q[j] - model.default_pose[j]);
            nominal.qd[j] *= 0.3;
        }
        let mut mirrored = mirror_state(&model, &nominal);
        let terrain = HeightField::plane(1.0);
        let params = SimParams::default();
        let mut rng = crate::rng::stream(77, 0);
        use rand::Rng;
        let mut memory = crate::dynamics::ContactMemory::new(&model);
        let mut memory_m = crate::dynamics::ContactMemory::new(&model);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let tau: Vec<f64> = (0..model.n_dof())
                .map(|_| rng.gen_range(-8.0..8.0))
                .collect();
            let tau_m = mirror_joint_vec(&model, &tau);
            let (next, _) =
                step(&model, &nominal, &tau, &terrain, &params, &mut memory, 1e-3).unwrap();
            let (next_m, _) =
                step(&model, &mirrored, &tau_m, &terrain, &params, &mut memory_m, 1e-3).unwrap();
            nominal = next;
            mirrored = next_m;
            let expect = mirror_state(&model, &nominal);
            let err = (expect.base_pos - mirrored.base_pos).norm()
                + (expect.base_lin_vel - mirrored.base_lin_vel).norm()
                + (expect.base_ang_vel - mirrored.base_ang_vel).norm()
                + expect
                    .q
                    .iter()
                    .zip(&mirrored.q)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            worst = worst.max(err);
        }
        assert!(worst < 1e-6, "trajectories diverged by {worst}");
    }
}
