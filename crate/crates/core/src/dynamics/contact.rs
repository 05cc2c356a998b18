//! Penalty foot-ground contact: a normal spring-damper per sole point, with
//! stick-slip tangential friction realized as an anchored spring clamped to
//! the Coulomb cone. Anchors live in a small contact memory owned by the
//! caller; when the clamp engages the anchor slides so the stored spring
//! force stays on the cone.

use nalgebra::{Vector2, Vector3};

use super::kinematics::LinkKin;
use super::model::RobotModel;
use super::SimParams;
use crate::terrain::HeightField;

#[derive(Debug, Clone)]
pub struct ContactPoint {
    /// World position of the sole point.
    pub pos: Vector3<f64>,
    /// Ground reaction force on the robot (N).
    pub force: Vector3<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct FootContact {
    /// Active contact points only.
    pub points: Vec<ContactPoint>,
    /// Summed ground reaction force on this foot.
    pub force: Vector3<f64>,
    /// Strict indicator: any nonzero force on this foot.
    pub in_contact: bool,
}

#[derive(Debug, Clone)]
pub struct ContactSet {
    /// [left, right]
    pub feet: [FootContact; 2],
    /// Total ground reaction force (N).
    pub total_force: Vector3<f64>,
    /// Total ground reaction moment about the world origin (N·m).
    pub total_moment: Vector3<f64>,
}

impl ContactSet {
    pub fn empty() -> ContactSet {
        ContactSet {
            feet: [FootContact::default(), FootContact::default()],
            total_force: Vector3::zeros(),
            total_moment: Vector3::zeros(),
        }
    }

    pub fn any_contact(&self) -> bool {
        self.feet.iter().any(|f| f.in_contact)
    }
}

/// Tangential friction anchors, one slot per sole point. `None` while the
/// point is airborne.
#[derive(Debug, Clone)]
pub struct ContactMemory {
    anchors: [Vec<Option<Vector2<f64>>>; 2],
}

impl ContactMemory {
    pub fn new(model: &RobotModel) -> ContactMemory {
        ContactMemory {
            anchors: [
                vec![None; model.feet[0].sole_points.len()],
                vec![None; model.feet[1].sole_points.len()],
            ],
        }
    }

    pub fn clear(&mut self) {
        for side in &mut self.anchors {
            side.fill(None);
        }
    }

    /// Reflect across the x-z plane: feet swap and anchor y negates.
    pub fn mirrored(&self) -> ContactMemory {
        let flip = |side: &Vec<Option<Vector2<f64>>>| {
            side.iter()
                .map(|a| a.map(|p| Vector2::new(p.x, -p.y)))
                .collect()
        };
        ContactMemory {
            anchors: [flip(&self.anchors[1]), flip(&self.anchors[0])],
        }
    }
}

/// Evaluate foot-sole contacts against the terrain, updating the friction
/// anchors in `memory`.
pub fn foot_contacts(
    model: &RobotModel,
    kin: &[LinkKin],
    terrain: &HeightField,
    params: &SimParams,
    memory: &mut ContactMemory,
) -> ContactSet {
    let mut feet = [FootContact::default(), FootContact::default()];
    for (side, foot) in model.feet.iter().enumerate() {
        let link = &kin[foot.link];
        for (pi, sp) in foot.sole_points.iter().enumerate() {
            let arm = link.rot * sp;
            let pos = link.origin + arm;
            let (ground, _) = terrain.height_at(pos.x, pos.y);
            let depth = ground - pos.z;
            if depth <= 0.0 {
                // Hysteresis: keep the anchor through micro-liftoffs so
                // normal-direction chatter cannot erase stiction.
                if depth < -2e-3 {
                    memory.anchors[side][pi] = None;
                }
                continue;
            }
            let vel = link.v_origin + link.omega.cross(&arm);
            let capped_depth = depth.min(params.contact_max_depth);
            let fn_mag =
                (params.contact_kn * capped_depth - params.contact_cn * vel.z).max(0.0);
            if fn_mag == 0.0 {
                continue;
            }
            let p_xy = Vector2::new(pos.x, pos.y);
            let v_xy = Vector2::new(vel.x, vel.y);
            let anchor = memory.anchors[side][pi].unwrap_or(p_xy);
            let mut ft = -params.contact_kt * (p_xy - anchor) - params.contact_ct * v_xy;
            let cap = terrain.friction * fn_mag;
            let ft_norm = ft.norm();
            if ft_norm > cap {
                ft *= cap / ft_norm;
                // Slide the anchor so the spring alone reproduces the clamped
                // force at the current position.
                memory.anchors[side][pi] =
                    Some(p_xy + (ft + params.contact_ct * v_xy) / params.contact_kt);
            } else {
                memory.anchors[side][pi] = Some(anchor);
            }
            let force = Vector3::new(ft.x, ft.y, fn_mag);
            feet[side].force += force;
            feet[side].points.push(ContactPoint { pos, force });
        }
        feet[side].in_contact = feet[side].force.norm() > 0.0;
    }
    let mut total_force = Vector3::zeros();
    let mut total_moment = Vector3::zeros();
    for foot in &feet {
        for p in &foot.points {
            total_force += p.force;
            total_moment += p.pos.cross(&p.force);
        }
    }
    ContactSet {
        feet,
        total_force,
        total_moment,
    }
}
