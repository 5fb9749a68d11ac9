//! Planar floating-base rigid-body model.
//!
//! Coordinates live in the sagittal-like `(x, z)` plane with `z` up. A planar
//! rotation by `θ` maps `(0, 1)` to `(-sin θ, cos θ)`. The generalized velocity
//! of a floating-base model is `[v_x, v_z, ω, q̇_1 .. q̇_nj]` with the base
//! linear velocity expressed in the world frame, so it is the exact time
//! derivative of `[x, z, θ, q_1 .. q_nj]`.

mod dynamics;
mod kinematics;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math;

pub(crate) use dynamics::com_from;
pub use dynamics::{bias_forces, com, inverse_dynamics, kinetic_energy, mass_matrix, potential_energy, ComKinematics};
pub use kinematics::{forward_kinematics, FrameId, FrameKinematics, Kinematics};

/// Standard gravity along `-z`.
pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown frame {0}")]
    UnknownFrame(String),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("non-finite acceleration at index {0}")]
    NonFiniteAcceleration(usize),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    /// Unactuated planar base with three velocity coordinates.
    Floating,
    /// Base welded to the world at the state's base pose.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JointGroup {
    Leg,
    Arm,
    Other,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    /// [kg]
    pub mass: f64,
    /// Rotational inertia about the link COM [kg m²].
    pub inertia: f64,
    /// COM in link-local coordinates [m].
    pub com: [f64; 2],
}

impl LinkSpec {
    /// Uniform rod of the given length along local `axis` (unit vector), COM at mid-link.
    pub fn rod(name: &str, mass: f64, length: f64, axis: [f64; 2]) -> Self {
        LinkSpec {
            name: name.to_string(),
            mass,
            inertia: mass * length * length / 12.0,
            com: [axis[0] * length / 2.0, axis[1] * length / 2.0],
        }
    }
}

/// Revolute joint. `origin` is the joint position in the parent link frame;
/// the child link frame sits at the joint.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub origin: [f64; 2],
    /// [rad]
    pub position_limits: [f64; 2],
    /// [rad/s]
    pub velocity_limit: f64,
    /// [rad/s²]
    pub accel_limits: [f64; 2],
    /// [N m]
    pub torque_limits: [f64; 2],
    pub group: JointGroup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactPoint {
    pub name: String,
    pub link: usize,
    pub offset: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSpec {
    pub link: usize,
    pub offset: [f64; 2],
    pub angle: f64,
}

/// A configuration without velocity: base pose and joint angles.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub base_pose: [f64; 3],
    pub joint_pos: Vec<f64>,
}

/// Raw model description, validated by [`RobotModel::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub base: BaseKind,
    /// Link 0 is the base link.
    pub links: Vec<LinkSpec>,
    /// Joints in topological order: a joint's parent is the base or the child of an earlier joint.
    pub joints: Vec<JointSpec>,
    pub contacts: Vec<ContactPoint>,
    pub hand: FrameSpec,
    /// Left, right.
    pub feet: [FrameSpec; 2],
    pub friction_mu: f64,
    pub gravity: f64,
    pub nominal: Configuration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    spec: ModelSpec,
    /// Joint whose child is this link (`None` for the base link).
    link_joint: Vec<Option<usize>>,
    /// Joints from the base down to and including the link's own joint.
    link_chain: Vec<Vec<usize>>,
}

impl RobotModel {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        let invalid = |msg: String| Err(ModelError::Invalid(msg));
        if spec.links.is_empty() {
            return invalid("model has no links".into());
        }
        for l in &spec.links {
            if !(l.mass > 0.0) || !(l.inertia > 0.0) {
                return invalid(format!("link `{}` needs positive mass and inertia", l.name));
            }
        }
        let nl = spec.links.len();
        if spec.joints.len() != nl - 1 {
            return invalid(format!("tree with {nl} links needs {} joints, found {}", nl - 1, spec.joints.len()));
        }
        let mut link_joint = vec![None; nl];
        let mut link_chain: Vec<Vec<usize>> = vec![Vec::new(); nl];
        let mut reached = vec![false; nl];
        reached[0] = true;
        for (j, joint) in spec.joints.iter().enumerate() {
            if joint.parent >= nl || joint.child >= nl {
                return invalid(format!("joint `{}` references a missing link", joint.name));
            }
            if !reached[joint.parent] {
                return invalid(format!("joint `{}` precedes its parent link in the tree order", joint.name));
            }
            if reached[joint.child] {
                return invalid(format!("joint `{}` closes a cycle", joint.name));
            }
            reached[joint.child] = true;
            link_joint[joint.child] = Some(j);
            let mut chain = link_chain[joint.parent].clone();
            chain.push(j);
            link_chain[joint.child] = chain;
            let [plo, phi] = joint.position_limits;
            let [alo, ahi] = joint.accel_limits;
            let [tlo, thi] = joint.torque_limits;
            if !(plo < phi) || !(alo < ahi) || !(tlo < thi) || !(joint.velocity_limit > 0.0) {
                return invalid(format!("joint `{}` has inconsistent limits", joint.name));
            }
        }
        if !(spec.friction_mu > 0.0) {
            return invalid("friction coefficient must be positive".into());
        }
        let frame_ok = |f: &FrameSpec| f.link < nl;
        if !frame_ok(&spec.hand) || !spec.feet.iter().all(frame_ok) {
            return invalid("frame references a missing link".into());
        }
        if spec.contacts.iter().any(|c| c.link >= nl) {
            return invalid("contact references a missing link".into());
        }
        if spec.nominal.joint_pos.len() != spec.joints.len() {
            return invalid("nominal posture has the wrong number of joints".into());
        }
        Ok(RobotModel { spec, link_joint, link_chain })
    }

    #[inline]
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    #[inline]
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    #[inline]
    pub fn links(&self) -> &[LinkSpec] {
        &self.spec.links
    }

    #[inline]
    pub fn joints(&self) -> &[JointSpec] {
        &self.spec.joints
    }

    #[inline]
    pub fn contacts(&self) -> &[ContactPoint] {
        &self.spec.contacts
    }

    #[inline]
    pub fn base(&self) -> BaseKind {
        self.spec.base
    }

    #[inline]
    pub fn friction_mu(&self) -> f64 {
        self.spec.friction_mu
    }

    #[inline]
    pub fn gravity(&self) -> f64 {
        self.spec.gravity
    }

    /// Number of actuated joints.
    #[inline]
    pub fn n_joints(&self) -> usize {
        self.spec.joints.len()
    }

    /// Number of base velocity coordinates (3 floating, 0 fixed).
    #[inline]
    pub fn n_base(&self) -> usize {
        match self.spec.base {
            BaseKind::Floating => 3,
            BaseKind::Fixed => 0,
        }
    }

    /// Dimension of the generalized velocity.
    #[inline]
    pub fn n_v(&self) -> usize {
        self.n_base() + self.n_joints()
    }

    #[inline]
    pub fn n_contacts(&self) -> usize {
        self.spec.contacts.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.spec.links.iter().map(|l| l.mass).sum()
    }

    pub fn link_index(&self, name: &str) -> Result<usize, ModelError> {
        self.spec.links.iter().position(|l| l.name == name).ok_or_else(|| ModelError::UnknownLink(name.to_string()))
    }

    pub(crate) fn link_chain(&self, link: usize) -> &[usize] {
        &self.link_chain[link]
    }

    /// Joint whose child is `link` (`None` for the base link).
    pub fn link_joint(&self, link: usize) -> Option<usize> {
        self.link_joint[link]
    }

    /// Indices of joints not in the arm group (the posture metric set).
    pub fn non_arm_joints(&self) -> Vec<usize> {
        (0..self.n_joints()).filter(|&j| self.spec.joints[j].group != JointGroup::Arm).collect()
    }

    /// The nominal posture at rest.
    pub fn nominal_state(&self) -> RobotState {
        RobotState::new(self, self.spec.nominal.base_pose, self.spec.nominal.joint_pos.clone(), vec![0.0; self.n_v()])
            .expect("nominal posture validated at construction")
    }
}

/// Configuration and generalized velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotState {
    /// `(x [m], z [m], θ [rad])`.
    pub base_pose: [f64; 3],
    pub joint_pos: Vec<f64>,
    pub gen_vel: Vec<f64>,
}

impl RobotState {
    /// Builds a state, wrapping all angles to (-π, π].
    pub fn new(
        model: &RobotModel,
        base_pose: [f64; 3],
        joint_pos: Vec<f64>,
        gen_vel: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if joint_pos.len() != model.n_joints() {
            return Err(ModelError::Dimension { expected: model.n_joints(), actual: joint_pos.len() });
        }
        if gen_vel.len() != model.n_v() {
            return Err(ModelError::Dimension { expected: model.n_v(), actual: gen_vel.len() });
        }
        let [x, z, th] = base_pose;
        Ok(RobotState {
            base_pose: [x, z, math::wrap_angle(th)],
            joint_pos: joint_pos.into_iter().map(math::wrap_angle).collect(),
            gen_vel,
        })
    }

    /// Configuration coordinates `[x, z, θ, q..]` for floating models, `[q..]` for fixed ones.
    pub fn configuration_vector(&self, model: &RobotModel) -> Vec<f64> {
        let mut v = Vec::with_capacity(model.n_v());
        if model.base() == BaseKind::Floating {
            v.extend_from_slice(&self.base_pose);
        }
        v.extend_from_slice(&self.joint_pos);
        v
    }

    /// Applies a displacement in velocity coordinates (used by finite-difference checks).
    pub fn displaced(&self, model: &RobotModel, dq: &[f64]) -> RobotState {
        let mut s = self.clone();
        let nb = model.n_base();
        for i in 0..nb {
            s.base_pose[i] += dq[i];
        }
        s.base_pose[2] = math::wrap_angle(s.base_pose[2]);
        for (q, d) in s.joint_pos.iter_mut().zip(&dq[nb..]) {
            *q = math::wrap_angle(*q + d);
        }
        s
    }
}

/// Semi-implicit Euler step of the double integrator: velocity first, then
/// configuration with the updated velocity.
pub fn integrate(model: &RobotModel, state: &RobotState, qdd: &[f64], dt: f64) -> Result<RobotState, ModelError> {
    if !(dt > 0.0) {
        return Err(ModelError::BadTimeStep(dt));
    }
    if qdd.len() != model.n_v() {
        return Err(ModelError::Dimension { expected: model.n_v(), actual: qdd.len() });
    }
    if let Some(i) = qdd.iter().position(|a| !a.is_finite()) {
        return Err(ModelError::NonFiniteAcceleration(i));
    }
    let mut next = state.clone();
    for (v, a) in next.gen_vel.iter_mut().zip(qdd) {
        *v += a * dt;
    }
    let nb = model.n_base();
    if nb == 3 {
        next.base_pose[0] += next.gen_vel[0] * dt;
        next.base_pose[1] += next.gen_vel[1] * dt;
        next.base_pose[2] = math::wrap_angle(next.base_pose[2] + next.gen_vel[2] * dt);
    }
    for (q, v) in next.joint_pos.iter_mut().zip(&next.gen_vel[nb..]) {
        *q = math::wrap_angle(*q + v * dt);
    }
    Ok(next)
}

/// Half-angle of the knee bend in the PLANAR9 nominal stance.
const PLANAR9_LEG_BEND: f64 = 0.25;
/// Shoulder angle of the nominal arm posture.
const PLANAR9_SHOULDER: f64 = 0.3;

/// The default 9-joint planar biped with a single arm.
///
/// Legs are spread along `x` with hips at `±0.1 m`; feet are 0.2 m rods
/// centred on the ankles with heel/toe contacts at their ends. The nominal
/// arm posture is chosen so that the whole-body CoM lies exactly above the
/// midpoint between the feet.
pub fn planar9() -> RobotModel {
    let down = [0.0, -1.0];
    let links = vec![
        LinkSpec::rod("torso", 20.0, 0.6, [0.0, 1.0]),
        LinkSpec::rod("l_thigh", 5.0, 0.4, down),
        LinkSpec::rod("l_shank", 4.0, 0.4, down),
        LinkSpec { com: [0.0, 0.0], ..LinkSpec::rod("l_foot", 1.0, 0.2, [1.0, 0.0]) },
        LinkSpec::rod("r_thigh", 5.0, 0.4, down),
        LinkSpec::rod("r_shank", 4.0, 0.4, down),
        LinkSpec { com: [0.0, 0.0], ..LinkSpec::rod("r_foot", 1.0, 0.2, [1.0, 0.0]) },
        LinkSpec::rod("upper_arm", 2.0, 0.3, down),
        LinkSpec::rod("forearm", 1.5, 0.3, down),
        LinkSpec::rod("hand", 0.5, 0.1, down),
    ];
    let leg = |name: &str, parent, child, origin, pos: [f64; 2]| JointSpec {
        name: name.to_string(),
        parent,
        child,
        origin,
        position_limits: pos,
        velocity_limit: 10.0,
        accel_limits: [-50.0, 50.0],
        torque_limits: [-150.0, 150.0],
        group: JointGroup::Leg,
    };
    let arm = |name: &str, parent, child, origin, pos: [f64; 2]| JointSpec {
        torque_limits: [-50.0, 50.0],
        group: JointGroup::Arm,
        ..leg(name, parent, child, origin, pos)
    };
    let joints = vec![
        leg("l_hip", 0, 1, [-0.1, 0.0], [-1.5, 1.5]),
        leg("l_knee", 1, 2, [0.0, -0.4], [-2.5, 2.5]),
        leg("l_ankle", 2, 3, [0.0, -0.4], [-1.0, 1.0]),
        leg("r_hip", 0, 4, [0.1, 0.0], [-1.5, 1.5]),
        leg("r_knee", 4, 5, [0.0, -0.4], [-2.5, 2.5]),
        leg("r_ankle", 5, 6, [0.0, -0.4], [-1.0, 1.0]),
        arm("shoulder", 0, 7, [0.0, 0.6], [-3.0, 3.0]),
        arm("elbow", 7, 8, [0.0, -0.3], [-2.8, 2.8]),
        arm("wrist", 8, 9, [0.0, -0.3], [-1.5, 1.5]),
    ];
    let contact = |name: &str, link, x| ContactPoint { name: name.to_string(), link, offset: [x, 0.0] };
    let contacts = vec![
        contact("l_heel", 3, -0.1),
        contact("l_toe", 3, 0.1),
        contact("r_heel", 6, -0.1),
        contact("r_toe", 6, 0.1),
    ];
    let a = PLANAR9_LEG_BEND;
    // Arm COM x offset: 0.9 sin(shoulder) + 0.4 sin(forearm) = 0 with a straight wrist.
    let beta = PLANAR9_SHOULDER;
    let gamma = -libm::asin(0.9 * libm::sin(beta) / 0.4);
    let nominal = Configuration {
        base_pose: [0.0, 0.8 * libm::cos(a), 0.0],
        joint_pos: vec![-a, 2.0 * a, -a, a, -2.0 * a, a, beta, gamma - beta, 0.0],
    };
    let spec = ModelSpec {
        name: "PLANAR9".to_string(),
        base: BaseKind::Floating,
        links,
        joints,
        contacts,
        hand: FrameSpec { link: 9, offset: [0.0, -0.1], angle: 0.0 },
        feet: [
            FrameSpec { link: 3, offset: [0.0, 0.0], angle: 0.0 },
            FrameSpec { link: 6, offset: [0.0, 0.0], angle: 0.0 },
        ],
        friction_mu: 0.7,
        gravity: GRAVITY,
        nominal,
    };
    RobotModel::new(spec).expect("PLANAR9 is a valid model")
}
