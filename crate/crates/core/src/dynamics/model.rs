//! Robot description: kinematic tree, mass properties, actuation limits,
//! foot geometry and the left/right symmetry map.
//!
//! Link 0 is the base. Joint `j` connects `parent_link[j]` to child link
//! `j + 1`; at zero joint angle the child frame is axis-aligned with its
//! parent and offset by the joint origin. The rotation axis of a revolute
//! joint is the same vector in parent and child coordinates, so it is stored
//! once.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("unsupported model format_version {0} (expected {MODEL_FORMAT_VERSION})")]
    FormatVersion(u32),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unknown builtin model '{0}'")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointGroup {
    Leg,
    Arm,
    Torso,
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    /// Inertia tensor about the link CoM, in the link frame.
    pub inertia: Matrix3<f64>,
    /// CoM offset in the link frame.
    pub com: Vector3<f64>,
    /// Radius of the collision proxy sphere centered at the link CoM.
    pub collision_radius: f64,
}

#[derive(Debug, Clone)]
pub struct JointSpec {
    pub name: String,
    pub parent_link: usize,
    /// Joint origin in the parent link frame.
    pub origin: Vector3<f64>,
    /// Rotation axis (unit), identical in parent and child coordinates.
    pub axis: Unit<Vector3<f64>>,
    pub pos_limits: (f64, f64),
    pub vel_limit: f64,
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
    pub group: JointGroup,
}

#[derive(Debug, Clone)]
pub struct FootSpec {
    pub link: usize,
    /// Sole contact points in the foot link frame (at least 4).
    pub sole_points: Vec<Vector3<f64>>,
    /// Sole center in the foot link frame.
    pub sole_center: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    /// [left, right]
    pub feet: [FootSpec; 2],
    /// Involution on joint indices for the x-z-plane reflection.
    pub mirror_joint: Vec<usize>,
    /// Per-joint angle sign under reflection.
    pub mirror_sign: Vec<f64>,
    pub default_pose: Vec<f64>,
    pub fixed_base: bool,
    /// Joint path (root to leaf) per link; empty for the base.
    paths: Vec<Vec<usize>>,
    /// Link involution derived from the joint map.
    mirror_link: Vec<usize>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        links: Vec<LinkSpec>,
        joints: Vec<JointSpec>,
        feet: [FootSpec; 2],
        mirror_joint: Vec<usize>,
        mirror_sign: Vec<f64>,
        default_pose: Vec<f64>,
        fixed_base: bool,
    ) -> Result<Self, ModelError> {
        let mut model = RobotModel {
            name: name.into(),
            links,
            joints,
            feet,
            mirror_joint,
            mirror_sign,
            default_pose,
            fixed_base,
            paths: Vec::new(),
            mirror_link: Vec::new(),
        };
        model.finish()?;
        Ok(model)
    }

    fn finish(&mut self) -> Result<(), ModelError> {
        self.validate_tree()?;
        self.paths = (0..self.links.len())
            .map(|link| {
                let mut path = Vec::new();
                let mut cur = link;
                while cur != 0 {
                    let joint = cur - 1;
                    path.push(joint);
                    cur = self.joints[joint].parent_link;
                }
                path.reverse();
                path
            })
            .collect();
        self.mirror_link = std::iter::once(0)
            .chain((0..self.joints.len()).map(|j| self.mirror_joint[j] + 1))
            .collect();
        self.validate_properties()?;
        Ok(())
    }

    fn validate_tree(&self) -> Result<(), ModelError> {
        let n = self.joints.len();
        if self.links.len() != n + 1 {
            return Err(ModelError::Invalid(format!(
                "expected {} links for {} joints, got {}",
                n + 1,
                n,
                self.links.len()
            )));
        }
        for (j, joint) in self.joints.iter().enumerate() {
            if joint.parent_link > j {
                return Err(ModelError::Invalid(format!(
                    "joint '{}' has parent link {} which does not precede child link {}",
                    joint.name,
                    joint.parent_link,
                    j + 1
                )));
            }
        }
        Ok(())
    }

    fn validate_properties(&self) -> Result<(), ModelError> {
        for link in &self.links {
            if !(link.mass > 0.0) {
                return Err(ModelError::Invalid(format!(
                    "link '{}' has non-positive mass",
                    link.name
                )));
            }
            let sym = 0.5 * (link.inertia + link.inertia.transpose());
            if (link.inertia - sym).norm() > 1e-12 * link.inertia.norm().max(1.0) {
                return Err(ModelError::Invalid(format!(
                    "link '{}' inertia is not symmetric",
                    link.name
                )));
            }
            let eig = sym.symmetric_eigenvalues();
            if eig.min() <= 0.0 {
                return Err(ModelError::Invalid(format!(
                    "link '{}' inertia is not positive definite",
                    link.name
                )));
            }
        }
        for foot in &self.feet {
            if foot.link >= self.links.len() {
                return Err(ModelError::Invalid("foot link index out of range".into()));
            }
            if foot.sole_points.len() < 4 {
                return Err(ModelError::Invalid(
                    "each foot needs at least 4 sole contact points".into(),
                ));
            }
        }
        let n = self.joints.len();
        if self.mirror_joint.len() != n || self.mirror_sign.len() != n || self.default_pose.len() != n
        {
            return Err(ModelError::Invalid(
                "mirror map / default pose length must equal joint count".into(),
            ));
        }
        for j in 0..n {
            let m = self.mirror_joint[j];
            if m >= n || self.mirror_joint[m] != j {
                return Err(ModelError::Invalid(format!(
                    "mirror map is not an involution at joint {j}"
                )));
            }
            if self.mirror_sign[j].abs() != 1.0 || self.mirror_sign[m] != self.mirror_sign[j] {
                return Err(ModelError::Invalid(format!(
                    "mirror sign at joint {j} must be ±1 and symmetric under the pairing"
                )));
            }
        }
        Ok(())
    }

    pub fn n_dof(&self) -> usize {
        self.joints.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// Generalized velocity dimension: 6 + n_dof for floating base.
    pub fn n_vel(&self) -> usize {
        if self.fixed_base {
            self.n_dof()
        } else {
            6 + self.n_dof()
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    /// Joints on the path from the base to `link`, root first.
    pub fn joint_path(&self, link: usize) -> &[usize] {
        &self.paths[link]
    }

    pub fn mirror_link(&self, link: usize) -> usize {
        self.mirror_link[link]
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Indices of joints in `group`.
    pub fn joints_in_group(&self, group: JointGroup) -> Vec<usize> {
        (0..self.n_dof())
            .filter(|&j| self.joints[j].group == group)
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ModelError::Parse { source, .. } => ModelError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    /// Resolve `builtin:<name>` to a built-in model, otherwise load a file.
    pub fn resolve(spec: &str) -> Result<Self, ModelError> {
        match spec.strip_prefix("builtin:") {
            Some("biped21") => Ok(builtin::biped21()),
            Some("biped10") => Ok(builtin::biped10()),
            Some(other) => Err(ModelError::UnknownBuiltin(other.to_string())),
            None => Self::load(spec),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let file: file::ModelFile = toml::from_str(text).map_err(|source| ModelError::Parse {
            path: "<string>".into(),
            source: Box::new(source),
        })?;
        file.into_model()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&file::ModelFile::from_model(self))
            .expect("model serialization cannot fail")
    }

    /// Content hash binding checkpoints to the model they were trained on.
    pub fn content_hash(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.to_toml_string().as_bytes());
        h.finalize().into()
    }
}

/// Inertia of a solid box with side lengths `(lx, ly, lz)` about its center.
pub fn box_inertia(mass: f64, lx: f64, ly: f64, lz: f64) -> Matrix3<f64> {
    let c = mass / 12.0;
    Matrix3::from_diagonal(&Vector3::new(
        c * (ly * ly + lz * lz),
        c * (lx * lx + lz * lz),
        c * (lx * lx + ly * ly),
    ))
}

/// Reflection across the x-z plane.
pub fn reflect_y(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, -v.y, v.z)
}

/// Mirror a rotation across the x-z plane: q = (w, x, y, z) -> (w, -x, y, -z).
pub fn reflect_quat(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.coords; // (x, y, z, w)
    UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(c.w, -c.x, c.y, -c.z))
}

/// Mirror a pseudovector (angular velocity/momentum) across the x-z plane.
pub fn reflect_pseudo(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.x, v.y, -v.z)
}

mod file {
    use super::*;

    fn default_collision_radius() -> f64 {
        0.05
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ModelFile {
        pub format_version: u32,
        pub name: String,
        #[serde(default)]
        pub fixed_base: bool,
        pub links: Vec<LinkFile>,
        pub joints: Vec<JointFile>,
        pub feet: Vec<FootFile>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct LinkFile {
        pub name: String,
        pub mass: f64,
        /// [ixx, iyy, izz, ixy, ixz, iyz]
        pub inertia: [f64; 6],
        pub com: [f64; 3],
        #[serde(default = "default_collision_radius")]
        pub collision_radius: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct JointFile {
        pub name: String,
        pub parent_link: usize,
        pub origin: [f64; 3],
        pub axis: [f64; 3],
        pub pos_limits: [f64; 2],
        pub vel_limit: f64,
        pub torque_limit: f64,
        pub kp: f64,
        pub kd: f64,
        pub group: JointGroup,
        /// Name of the joint this one maps to under reflection (itself if central).
        pub mirror: String,
        pub mirror_sign: f64,
        pub default_pos: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct FootFile {
        pub link: usize,
        pub sole_points: Vec<[f64; 3]>,
        pub sole_center: [f64; 3],
    }

    impl ModelFile {
        pub fn into_model(self) -> Result<RobotModel, ModelError> {
            if self.format_version != MODEL_FORMAT_VERSION {
                return Err(ModelError::FormatVersion(self.format_version));
            }
            if self.feet.len() != 2 {
                return Err(ModelError::Invalid(format!(
                    "expected exactly 2 feet, got {}",
                    self.feet.len()
                )));
            }
            let links = self
                .links
                .into_iter()
                .map(|l| LinkSpec {
                    name: l.name,
                    mass: l.mass,
                    inertia: inertia_from_array(&l.inertia),
                    com: Vector3::from(l.com),
                    collision_radius: l.collision_radius,
                })
                .collect();
            let mirror_names: Vec<String> = self.joints.iter().map(|j| j.mirror.clone()).collect();
            let names: Vec<String> = self.joints.iter().map(|j| j.name.clone()).collect();
            let mirror_joint = mirror_names
                .iter()
                .map(|m| {
                    names
                        .iter()
                        .position(|n| n == m)
                        .ok_or_else(|| ModelError::Invalid(format!("unknown mirror joint '{m}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mirror_sign = self.joints.iter().map(|j| j.mirror_sign).collect();
            let default_pose = self.joints.iter().map(|j| j.default_pos).collect();
            let joints = self
                .joints
                .into_iter()
                .map(|j| {
                    let axis = Vector3::from(j.axis);
                    if (axis.norm() - 1.0).abs() > 1e-9 {
                        return Err(ModelError::Invalid(format!(
                            "joint '{}' axis is not a unit vector",
                            j.name
                        )));
                    }
                    Ok(JointSpec {
                        name: j.name,
                        parent_link: j.parent_link,
                        origin: Vector3::from(j.origin),
                        axis: Unit::new_unchecked(axis),
                        pos_limits: (j.pos_limits[0], j.pos_limits[1]),
                        vel_limit: j.vel_limit,
                        torque_limit: j.torque_limit,
                        kp: j.kp,
                        kd: j.kd,
                        group: j.group,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut feet_iter = self.feet.into_iter().map(|f| FootSpec {
                link: f.link,
                sole_points: f.sole_points.into_iter().map(Vector3::from).collect(),
                sole_center: Vector3::from(f.sole_center),
            });
            let feet = [feet_iter.next().unwrap(), feet_iter.next().unwrap()];
            RobotModel::new(
                self.name,
                links,
                joints,
                feet,
                mirror_joint,
                mirror_sign,
                default_pose,
                self.fixed_base,
            )
        }

        pub fn from_model(m: &RobotModel) -> Self {
            ModelFile {
                format_version: MODEL_FORMAT_VERSION,
                name: m.name.clone(),
                fixed_base: m.fixed_base,
                links: m
                    .links
                    .iter()
                    .map(|l| LinkFile {
                        name: l.name.clone(),
                        mass: l.mass,
                        inertia: inertia_to_array(&l.inertia),
                        com: l.com.into(),
                        collision_radius: l.collision_radius,
                    })
                    .collect(),
                joints: m
                    .joints
                    .iter()
                    .enumerate()
                    .map(|(j, spec)| JointFile {
                        name: spec.name.clone(),
                        parent_link: spec.parent_link,
                        origin: spec.origin.into(),
                        axis: spec.axis.into_inner().into(),
                        pos_limits: [spec.pos_limits.0, spec.pos_limits.1],
                        vel_limit: spec.vel_limit,
                        torque_limit: spec.torque_limit,
                        kp: spec.kp,
                        kd: spec.kd,
                        group: spec.group,
                        mirror: m.joints[m.mirror_joint[j]].name.clone(),
                        mirror_sign: m.mirror_sign[j],
                        default_pos: m.default_pose[j],
                    })
                    .collect(),
                feet: m
                    .feet
                    .iter()
                    .map(|f| FootFile {
                        link: f.link,
                        sole_points: f.sole_points.iter().map(|p| (*p).into()).collect(),
                        sole_center: f.sole_center.into(),
                    })
                    .collect(),
            }
        }
    }

    fn inertia_from_array(a: &[f64; 6]) -> Matrix3<f64> {
        Matrix3::new(
            a[0], a[3], a[4], //
            a[3], a[1], a[5], //
            a[4], a[5], a[2],
        )
    }

    fn inertia_to_array(m: &Matrix3<f64>) -> [f64; 6] {
        [
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 2)],
        ]
    }
}

pub mod builtin {
    //! Built-in robot descriptions.
    //!
    //! The right half of each biped is generated from the left half by exact
    //! floating-point reflection, so the models are mirror-symmetric to the
    //! last bit and every paired joint carries mirror sign -1.

    use super::*;

    struct Builder {
        links: Vec<LinkSpec>,
        joints: Vec<JointSpec>,
        mirror_name: Vec<String>,
        mirror_sign: Vec<f64>,
        default_pose: Vec<f64>,
    }

    struct JointDef {
        name: String,
        parent: usize,
        origin: Vector3<f64>,
        axis: Vector3<f64>,
        limits: (f64, f64),
        vel: f64,
        torque: f64,
        kp: f64,
        kd: f64,
        group: JointGroup,
        default_pos: f64,
    }

    impl Builder {
        fn new(base: LinkSpec) -> Self {
            Builder {
                links: vec![base],
                joints: Vec::new(),
                mirror_name: Vec::new(),
                mirror_sign: Vec::new(),
                default_pose: Vec::new(),
            }
        }

        /// Central joint (maps to itself). Axis must satisfy S·a = ±a.
        fn central(&mut self, def: JointDef, link: LinkSpec) -> usize {
            // Self-paired sign: +1 for the y axis (S·a = -a), -1 otherwise.
            let sign = if def.axis.y.abs() > 0.5 { 1.0 } else { -1.0 };
            self.push(def, link, None, sign)
        }

        /// Left-side joint; the right twin is generated by `mirror_left`.
        fn left(&mut self, def: JointDef, link: LinkSpec) -> usize {
            self.push(def, link, None, -1.0)
        }

        fn push(
            &mut self,
            def: JointDef,
            link: LinkSpec,
            mirror_of: Option<usize>,
            sign: f64,
        ) -> usize {
            let j = self.joints.len();
            self.joints.push(JointSpec {
                name: def.name.clone(),
                parent_link: def.parent,
                origin: def.origin,
                axis: Unit::new_normalize(def.axis),
                pos_limits: def.limits,
                vel_limit: def.vel,
                torque_limit: def.torque,
                kp: def.kp,
                kd: def.kd,
                group: def.group,
            });
            self.links.push(link);
            self.mirror_name.push(match mirror_of {
                Some(m) => self.joints[m].name.clone(),
                None => def.name,
            });
            self.mirror_sign.push(sign);
            self.default_pose.push(def.default_pos);
            j
        }

        /// Generate right-side twins for joints `range`, reflected across the
        /// x-z plane. `link_map` translates left parent links to right ones.
        fn mirror_left(&mut self, range: std::ops::Range<usize>) {
            let mut link_map: Vec<usize> = (0..self.links.len()).collect();
            for j in range {
                let left = self.joints[j].clone();
                let left_link = self.links[j + 1].clone();
                let def = JointDef {
                    name: left.name.replace("left", "right"),
                    parent: link_map[left.parent_link],
                    origin: reflect_y(&left.origin),
                    axis: reflect_y(&left.axis),
                    limits: (-left.pos_limits.1, -left.pos_limits.0),
                    vel: left.vel_limit,
                    torque: left.torque_limit,
                    kp: left.kp,
                    kd: left.kd,
                    group: left.group,
                    default_pos: -self.default_pose[j],
                };
                let link = LinkSpec {
                    name: left_link.name.replace("left", "right"),
                    mass: left_link.mass,
                    // Reflection through x-z: I' = S I S (negate xy and yz products).
                    inertia: {
                        let mut i = left_link.inertia;
                        i[(0, 1)] = -i[(0, 1)];
                        i[(1, 0)] = -i[(1, 0)];
                        i[(1, 2)] = -i[(1, 2)];
                        i[(2, 1)] = -i[(2, 1)];
                        i
                    },
                    com: reflect_y(&left_link.com),
                    collision_radius: left_link.collision_radius,
                };
                let right = self.push(def, link, Some(j), -1.0);
                // Fix up the pairing for the left joint.
                self.mirror_name[j] = self.joints[right].name.clone();
                link_map[j + 1] = right + 1;
            }
        }

        fn build(
            self,
            name: &str,
            feet: [FootSpec; 2],
            fixed_base: bool,
        ) -> RobotModel {
            let names: Vec<String> = self.joints.iter().map(|j| j.name.clone()).collect();
            let mirror_joint = self
                .mirror_name
                .iter()
                .map(|m| names.iter().position(|n| n == m).expect("mirror name"))
                .collect();
            RobotModel::new(
                name,
                self.links,
                self.joints,
                feet,
                mirror_joint,
                self.mirror_sign,
                self.default_pose,
                fixed_base,
            )
            .expect("builtin model must validate")
        }
    }

    fn leg(b: &mut Builder, parent: usize) -> (std::ops::Range<usize>, usize) {
        let start = b.joints.len();
        let hip_yaw = b.left(
            JointDef {
                name: "left_hip_yaw".into(),
                parent,
                origin: Vector3::new(0.0, 0.10, -0.07),
                axis: Vector3::z(),
                limits: (-1.0, 1.0),
                vel: 20.0,
                torque: 60.0,
                kp: 100.0,
                kd: 4.0,
                group: JointGroup::Leg,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "left_hip_yaw_link".into(),
                mass: 1.0,
                inertia: box_inertia(1.0, 0.08, 0.08, 0.08),
                com: Vector3::new(0.0, 0.0, -0.02),
                collision_radius: 0.05,
            },
        );
        let hip_roll = b.left(
            JointDef {
                name: "left_hip_roll".into(),
                parent: hip_yaw + 1,
                origin: Vector3::new(0.0, 0.0, -0.04),
                axis: Vector3::x(),
                limits: (-0.8, 0.8),
                vel: 20.0,
                torque: 90.0,
                kp: 100.0,
                kd: 4.0,
                group: JointGroup::Leg,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "left_hip_roll_link".into(),
                mass: 1.5,
                inertia: box_inertia(1.5, 0.09, 0.09, 0.10),
                com: Vector3::new(0.0, 0.0, -0.03),
                collision_radius: 0.05,
            },
        );
        let hip_pitch = b.left(
            JointDef {
                name: "left_hip_pitch".into(),
                parent: hip_roll + 1,
                origin: Vector3::new(0.0, 0.0, -0.05),
                axis: Vector3::y(),
                limits: (-1.8, 1.8),
                vel: 20.0,
                torque: 120.0,
                kp: 150.0,
                kd: 6.0,
                group: JointGroup::Leg,
                default_pos: -0.2,
            },
            LinkSpec {
                name: "left_thigh".into(),
                mass: 3.5,
                inertia: box_inertia(3.5, 0.10, 0.10, 0.42),
                com: Vector3::new(0.0, 0.0, -0.20),
                collision_radius: 0.06,
            },
        );
        let knee = b.left(
            JointDef {
                name: "left_knee".into(),
                parent: hip_pitch + 1,
                origin: Vector3::new(0.0, 0.0, -0.40),
                axis: Vector3::y(),
                limits: (-0.3, 2.4),
                vel: 22.0,
                torque: 140.0,
                kp: 200.0,
                kd: 8.0,
                group: JointGroup::Leg,
                default_pos: 0.4,
            },
            LinkSpec {
                name: "left_shank".into(),
                mass: 2.5,
                inertia: box_inertia(2.5, 0.08, 0.08, 0.42),
                com: Vector3::new(0.0, 0.0, -0.19),
                collision_radius: 0.05,
            },
        );
        let ankle_pitch = b.left(
            JointDef {
                name: "left_ankle_pitch".into(),
                parent: knee + 1,
                origin: Vector3::new(0.0, 0.0, -0.40),
                axis: Vector3::y(),
                limits: (-1.0, 1.0),
                vel: 22.0,
                torque: 80.0,
                kp: 350.0,
                kd: 2.5,
                group: JointGroup::Leg,
                default_pos: -0.2,
            },
            LinkSpec {
                name: "left_ankle_link".into(),
                mass: 0.6,
                inertia: box_inertia(0.6, 0.06, 0.06, 0.06),
                com: Vector3::new(0.0, 0.0, -0.02),
                collision_radius: 0.04,
            },
        );
        let ankle_roll = b.left(
            JointDef {
                name: "left_ankle_roll".into(),
                parent: ankle_pitch + 1,
                origin: Vector3::new(0.0, 0.0, -0.04),
                axis: Vector3::x(),
                limits: (-0.6, 0.6),
                vel: 22.0,
                torque: 60.0,
                kp: 60.0,
                kd: 1.0,
                group: JointGroup::Leg,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "left_foot".into(),
                mass: 1.2,
                inertia: box_inertia(1.2, 0.20, 0.14, 0.10),
                com: Vector3::new(0.02, 0.0, -0.03),
                collision_radius: 0.04,
            },
        );
        (start..start + 6, ankle_roll + 1)
    }

    fn arm(b: &mut Builder, parent: usize) -> std::ops::Range<usize> {
        let start = b.joints.len();
        let sp = b.left(
            JointDef {
                name: "left_shoulder_pitch".into(),
                parent,
                origin: Vector3::new(0.0, 0.18, 0.31),
                axis: Vector3::y(),
                limits: (-2.0, 2.0),
                vel: 20.0,
                torque: 40.0,
                kp: 40.0,
                kd: 2.0,
                group: JointGroup::Arm,
                default_pos: 0.2,
            },
            LinkSpec {
                name: "left_shoulder_pitch_link".into(),
                mass: 0.8,
                inertia: box_inertia(0.8, 0.07, 0.07, 0.07),
                com: Vector3::new(0.0, 0.02, -0.02),
                collision_radius: 0.04,
            },
        );
        let sr = b.left(
            JointDef {
                name: "left_shoulder_roll".into(),
                parent: sp + 1,
                origin: Vector3::new(0.0, 0.0, -0.04),
                axis: Vector3::x(),
                limits: (-0.5, 1.8),
                vel: 20.0,
                torque: 40.0,
                kp: 40.0,
                kd: 2.0,
                group: JointGroup::Arm,
                default_pos: 0.1,
            },
            LinkSpec {
                name: "left_shoulder_roll_link".into(),
                mass: 0.7,
                inertia: box_inertia(0.7, 0.06, 0.06, 0.08),
                com: Vector3::new(0.0, 0.0, -0.03),
                collision_radius: 0.04,
            },
        );
        let sy = b.left(
            JointDef {
                name: "left_shoulder_yaw".into(),
                parent: sr + 1,
                origin: Vector3::new(0.0, 0.0, -0.06),
                axis: Vector3::z(),
                limits: (-1.5, 1.5),
                vel: 20.0,
                torque: 30.0,
                kp: 30.0,
                kd: 1.5,
                group: JointGroup::Arm,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "left_upper_arm".into(),
                mass: 1.0,
                inertia: box_inertia(1.0, 0.06, 0.06, 0.24),
                com: Vector3::new(0.0, 0.0, -0.12),
                collision_radius: 0.04,
            },
        );
        b.left(
            JointDef {
                name: "left_elbow".into(),
                parent: sy + 1,
                origin: Vector3::new(0.0, 0.0, -0.24),
                axis: Vector3::y(),
                limits: (-2.0, 0.5),
                vel: 20.0,
                torque: 30.0,
                kp: 30.0,
                kd: 1.5,
                group: JointGroup::Arm,
                default_pos: -0.3,
            },
            LinkSpec {
                name: "left_forearm".into(),
                mass: 0.8,
                inertia: box_inertia(0.8, 0.05, 0.05, 0.22),
                com: Vector3::new(0.0, 0.0, -0.11),
                collision_radius: 0.04,
            },
        );
        start..start + 4
    }

    fn foot_spec(link: usize, side: f64) -> FootSpec {
        let z = -0.05;
        FootSpec {
            link,
            sole_points: vec![
                Vector3::new(0.11, side * 0.045, z),
                Vector3::new(0.11, side * -0.045, z),
                Vector3::new(-0.07, side * 0.045, z),
                Vector3::new(-0.07, side * -0.045, z),
            ],
            sole_center: Vector3::new(0.02, 0.0, z),
        }
    }

    /// Default desk-scale biped: 21 actuated DOF (2x6 leg, 2x4 arm, 1 waist),
    /// about 45 kg, box-link mass geometry.
    pub fn biped21() -> RobotModel {
        let mut b = Builder::new(LinkSpec {
            name: "pelvis".into(),
            mass: 8.0,
            inertia: box_inertia(8.0, 0.25, 0.30, 0.14),
            com: Vector3::new(0.0, 0.0, 0.05),
            collision_radius: 0.10,
        });
        let waist = b.central(
            JointDef {
                name: "waist_yaw".into(),
                parent: 0,
                origin: Vector3::new(0.0, 0.0, 0.12),
                axis: Vector3::z(),
                limits: (-1.2, 1.2),
                vel: 20.0,
                torque: 80.0,
                kp: 120.0,
                kd: 5.0,
                group: JointGroup::Torso,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "torso".into(),
                mass: 10.0,
                inertia: box_inertia(10.0, 0.22, 0.28, 0.40),
                com: Vector3::new(0.0, 0.0, 0.18),
                collision_radius: 0.12,
            },
        );
        let torso_link = waist + 1;
        let (leg_range, left_foot_link) = leg(&mut b, 0);
        b.mirror_left(leg_range);
        let right_foot_link = b.links.len() - 1;
        let arm_range = arm(&mut b, torso_link);
        b.mirror_left(arm_range);
        b.build(
            "biped21",
            [foot_spec(left_foot_link, 1.0), foot_spec(right_foot_link, -1.0)],
            false,
        )
    }

    /// Reduced 10-DOF legs-only biped for fast tests (no hip yaw, no arms,
    /// no waist).
    pub fn biped10() -> RobotModel {
        let mut b = Builder::new(LinkSpec {
            name: "pelvis".into(),
            mass: 10.0,
            inertia: box_inertia(10.0, 0.22, 0.26, 0.14),
            com: Vector3::new(0.0, 0.0, 0.03),
            collision_radius: 0.10,
        });
        let start = b.joints.len();
        let hip_roll = b.left(
            JointDef {
                name: "left_hip_roll".into(),
                parent: 0,
                origin: Vector3::new(0.0, 0.09, -0.06),
                axis: Vector3::x(),
                limits: (-0.8, 0.8),
                vel: 20.0,
                torque: 90.0,
                kp: 90.0,
                kd: 4.0,
                group: JointGroup::Leg,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "left_hip_roll_link".into(),
                mass: 1.5,
                inertia: box_inertia(1.5, 0.09, 0.09, 0.10),
                com: Vector3::new(0.0, 0.0, -0.03),
                collision_radius: 0.05,
            },
        );
        let hip_pitch = b.left(
            JointDef {
                name: "left_hip_pitch".into(),
                parent: hip_roll + 1,
                origin: Vector3::new(0.0, 0.0, -0.05),
                axis: Vector3::y(),
                limits: (-1.8, 1.8),
                vel: 20.0,
                torque: 120.0,
                kp: 150.0,
                kd: 6.0,
                group: JointGroup::Leg,
                default_pos: -0.2,
            },
            LinkSpec {
                name: "left_thigh".into(),
                mass: 3.5,
                inertia: box_inertia(3.5, 0.10, 0.10, 0.38),
                com: Vector3::new(0.0, 0.0, -0.18),
                collision_radius: 0.06,
            },
        );
        let knee = b.left(
            JointDef {
                name: "left_knee".into(),
                parent: hip_pitch + 1,
                origin: Vector3::new(0.0, 0.0, -0.36),
                axis: Vector3::y(),
                limits: (-0.3, 2.4),
                vel: 22.0,
                torque: 140.0,
                kp: 200.0,
                kd: 8.0,
                group: JointGroup::Leg,
                default_pos: 0.4,
            },
            LinkSpec {
                name: "left_shank".into(),
                mass: 2.5,
                inertia: box_inertia(2.5, 0.08, 0.08, 0.38),
                com: Vector3::new(0.0, 0.0, -0.17),
                collision_radius: 0.05,
            },
        );
        let ankle_pitch = b.left(
            JointDef {
                name: "left_ankle_pitch".into(),
                parent: knee + 1,
                origin: Vector3::new(0.0, 0.0, -0.36),
                axis: Vector3::y(),
                limits: (-1.0, 1.0),
                vel: 22.0,
                torque: 80.0,
                kp: 350.0,
                kd: 2.5,
                group: JointGroup::Leg,
                default_pos: -0.2,
            },
            LinkSpec {
                name: "left_ankle_link".into(),
                mass: 0.6,
                inertia: box_inertia(0.6, 0.06, 0.06, 0.06),
                com: Vector3::new(0.0, 0.0, -0.02),
                collision_radius: 0.04,
            },
        );
        b.left(
            JointDef {
                name: "left_ankle_roll".into(),
                parent: ankle_pitch + 1,
                origin: Vector3::new(0.0, 0.0, -0.04),
                axis: Vector3::x(),
                limits: (-0.6, 0.6),
                vel: 22.0,
                torque: 60.0,
                kp: 60.0,
                kd: 1.0,
                group: JointGroup::Leg,
                default_pos: 0.0,
            },
            LinkSpec {
                name: "left_foot".into(),
                mass: 1.2,
                inertia: box_inertia(1.2, 0.20, 0.14, 0.10),
                com: Vector3::new(0.02, 0.0, -0.03),
                collision_radius: 0.04,
            },
        );
        let leg_range = start..start + 5;
        let left_foot_link = b.links.len() - 1;
        b.mirror_left(leg_range);
        let right_foot_link = b.links.len() - 1;
        b.build(
            "biped10",
            [foot_spec(left_foot_link, 1.0), foot_spec(right_foot_link, -1.0)],
            false,
        )
    }

    /// Single passive pendulum on a fixed base. Used by integration tests;
    /// the two foot descriptors are placeholders on the bob link.
    pub fn pendulum(length: f64, mass: f64) -> RobotModel {
        let bob = LinkSpec {
            name: "bob".into(),
            mass,
            inertia: box_inertia(mass, 0.05, 0.05, length),
            com: Vector3::new(0.0, 0.0, -length / 2.0),
            collision_radius: 0.02,
        };
        let base = LinkSpec {
            name: "anchor".into(),
            mass: 1.0,
            inertia: box_inertia(1.0, 0.1, 0.1, 0.1),
            com: Vector3::zeros(),
            collision_radius: 0.02,
        };
        let joint = JointSpec {
            name: "hinge".into(),
            parent_link: 0,
            origin: Vector3::zeros(),
            axis: Unit::new_unchecked(Vector3::y()),
            pos_limits: (-1e9, 1e9),
            vel_limit: 1e9,
            torque_limit: 1e9,
            kp: 0.0,
            kd: 0.0,
            group: JointGroup::Torso,
        };
        let dummy_foot = |_side: f64| FootSpec {
            link: 1,
            sole_points: vec![
                Vector3::new(0.01, 0.01, -length),
                Vector3::new(0.01, -0.01, -length),
                Vector3::new(-0.01, 0.01, -length),
                Vector3::new(-0.01, -0.01, -length),
            ],
            sole_center: Vector3::new(0.0, 0.0, -length),
        };
        RobotModel::new(
            "pendulum",
            vec![base, bob],
            vec![joint],
            [dummy_foot(1.0), dummy_foot(-1.0)],
            vec![0],
            vec![1.0],
            vec![0.0],
            true,
        )
        .expect("pendulum model must validate")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biped21_has_expected_dimensions() {
        let m = builtin::biped21();
        assert_eq!(m.n_dof(), 21);
        assert_eq!(m.n_links(), 22);
        assert!((m.total_mass() - 45.2).abs() < 1e-9);
    }

    #[test]
    fn biped10_has_expected_dimensions() {
        let m = builtin::biped10();
        assert_eq!(m.n_dof(), 10);
        assert_eq!(m.n_links(), 11);
    }

    #[test]
    fn mirror_map_is_involution_with_symmetric_signs() {
        for m in [builtin::biped21(), builtin::biped10()] {
            for j in 0..m.n_dof() {
                let k = m.mirror_joint[j];
                assert_eq!(m.mirror_joint[k], j);
                assert_eq!(m.mirror_sign[j], m.mirror_sign[k]);
                // Paired geometry is the exact reflection of its twin.
                let a = &m.joints[j];
                let b = &m.joints[k];
                assert_eq!(reflect_y(&a.origin), b.origin);
                assert_eq!(reflect_y(&a.axis), b.axis.into_inner());
            }
        }
    }

    #[test]
    fn default_pose_is_mirror_fixed_point() {
        let m = builtin::biped21();
        for j in 0..m.n_dof() {
            let mirrored = m.mirror_sign[j] * m.default_pose[m.mirror_joint[j]];
            assert_eq!(mirrored, m.default_pose[j]);
        }
    }

    #[test]
    fn toml_round_trip_preserves_model() {
        let m = builtin::biped21();
        let text = m.to_toml_string();
        let back = RobotModel::from_toml_str(&text).unwrap();
        assert_eq!(m.to_toml_string(), back.to_toml_string());
        assert_eq!(m.content_hash(), back.content_hash());
        assert_eq!(back.n_dof(), 21);
    }

    #[test]
    fn format_version_is_checked() {
        let m = builtin::biped10();
        let text = m.to_toml_string().replace("format_version = 1", "format_version = 99");
        match RobotModel::from_toml_str(&text) {
            Err(ModelError::FormatVersion(99)) => {}
            other => panic!("expected format version error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let m = builtin::biped10();
        let text = format!("{}\nbogus_key = 1\n", m.to_toml_string());
        assert!(RobotModel::from_toml_str(&text).is_err());
    }

    #[test]
    fn nonpositive_mass_is_rejected() {
        let mut text = builtin::biped10().to_toml_string();
        text = text.replacen("mass = 10.0", "mass = 0.0", 1);
        match RobotModel::from_toml_str(&text) {
            Err(ModelError::Invalid(msg)) => assert!(msg.contains("mass")),
            other => panic!("expected invalid-model error, got {other:?}"),
        }
    }
}
