//! Whole-body momentum: total linear momentum, angular momentum about the
//! world origin and about the base position, and their analytic rates from
//! the Newton-Euler balance (gravity plus ground reaction).

use nalgebra::Vector3;

use super::contact::ContactSet;
use super::kinematics::forward_kinematics;
use super::model::RobotModel;
use super::SimState;

#[derive(Debug, Clone)]
pub struct MomentumState {
    /// Total mass (kg).
    pub mass: f64,
    /// Whole-body CoM (world, m).
    pub com: Vector3<f64>,
    /// Linear momentum (kg·m/s).
    pub linear: Vector3<f64>,
    /// Angular momentum about the world origin (kg·m^2/s).
    pub angular_origin: Vector3<f64>,
    /// Angular momentum about the base position, with link motion taken
    /// relative to the base twist (kg·m^2/s).
    pub angular_base: Vector3<f64>,
    /// Linear momentum rate (N); zero unless filled by `momentum_rates`.
    pub p_dot: Vector3<f64>,
    /// Rate of angular momentum about the world origin (N·m); zero unless
    /// filled by `momentum_rates`.
    pub l_dot: Vector3<f64>,
}

/// Momentum summary of `state` (rates left at zero).
pub fn compute_momentum(model: &RobotModel, state: &SimState) -> MomentumState {
    let kin = forward_kinematics(model, state);
    let mass = model.total_mass();
    let mut weighted_pos = Vector3::zeros();
    let mut linear = Vector3::zeros();
    let mut angular_origin = Vector3::zeros();
    let mut angular_base = Vector3::zeros();
    for (link, k) in kin.iter().enumerate() {
        let m = model.links[link].mass;
        let r = k.rot.to_rotation_matrix();
        let rm = r.matrix();
        let iw = rm * model.links[link].inertia * rm.transpose();
        weighted_pos += m * k.com;
        linear += m * k.v_com;
        angular_origin += k.com.cross(&(m * k.v_com)) + iw * k.omega;
        let p_rel = k.com - state.base_pos;
        let v_rel = k.v_com - state.base_lin_vel;
        let w_rel = k.omega - state.base_ang_vel;
        angular_base += p_rel.cross(&(m * v_rel)) + iw * w_rel;
    }
    MomentumState {
        mass,
        com: weighted_pos / mass,
        linear,
        angular_origin,
        angular_base,
        p_dot: Vector3::zeros(),
        l_dot: Vector3::zeros(),
    }
}

/// Analytic momentum rates from the Newton-Euler balance:
/// `P_dot = M g + f` and `L_dot = p_com x M g + tau`, with `f` and `tau` the
/// total ground reaction force and its moment about the world origin taken
/// from the contact set of the same step.
pub fn momentum_rates(
    model: &RobotModel,
    state: &SimState,
    contacts: &ContactSet,
    gravity: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let m = compute_momentum(model, state);
    rates_from(&m, contacts, gravity)
}

/// Rates for an already-computed momentum summary.
pub fn rates_from(
    momentum: &MomentumState,
    contacts: &ContactSet,
    gravity: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let g_vec = Vector3::new(0.0, 0.0, -gravity);
    let p_dot = momentum.mass * g_vec + contacts.total_force;
    let l_dot = momentum.com.cross(&(momentum.mass * g_vec)) + contacts.total_moment;
    (p_dot, l_dot)
}

/// Momentum summary with rates filled in.
pub fn momentum_with_rates(
    model: &RobotModel,
    state: &SimState,
    contacts: &ContactSet,
    gravity: f64,
) -> MomentumState {
    let mut m = compute_momentum(model, state);
    let (p_dot, l_dot) = rates_from(&m, contacts, gravity);
    m.p_dot = p_dot;
    m.l_dot = l_dot;
    m
}
