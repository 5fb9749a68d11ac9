use alloc::format;
use alloc::vec::Vec;

use super::{BaseKind, FrameSpec, ModelError, RobotModel, RobotState};
use crate::linalg::Matrix;
use crate::math;

/// Frames that can be evaluated by [`forward_kinematics`].
#[derive(Clone, Debug, PartialEq)]
pub enum FrameId {
    Hand,
    LeftFoot,
    RightFoot,
    Contact(usize),
    /// Position of joint `j` (origin of its child link), oriented with the child link.
    JointCenter(usize),
    LinkCom(usize),
    /// Arbitrary point rigidly attached to a link.
    Point(FrameSpec),
}

/// Pose and first-order differential data of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameKinematics {
    pub position: [f64; 2],
    pub angle: f64,
    /// 3 × n_v, maps `q̇` to `(v_x, v_z, ω)`.
    pub jacobian: Matrix,
    /// `J̇ q̇`, the acceleration of the frame at `q̈ = 0`.
    pub jdot_qdot: [f64; 3],
}

#[derive(Clone, Copy, Debug)]
struct LinkState {
    origin: [f64; 2],
    angle: f64,
    omega: f64,
    /// Origin acceleration with `q̈ = 0`.
    bias_acc: [f64; 2],
}

#[inline]
pub(crate) fn rotate(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = math::sin_cos(angle);
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Forward pass over the tree for one state. Frame queries reuse it.
pub struct Kinematics<'a> {
    model: &'a RobotModel,
    links: Vec<LinkState>,
    base_origin: [f64; 2],
}

impl<'a> Kinematics<'a> {
    pub fn new(model: &'a RobotModel, state: &RobotState) -> Self {
        let nb = model.n_base();
        let omega0 = if model.base() == BaseKind::Floating { state.gen_vel[2] } else { 0.0 };
        let base_origin = [state.base_pose[0], state.base_pose[1]];
        let mut links = Vec::with_capacity(model.links().len());
        links.push(LinkState { origin: base_origin, angle: state.base_pose[2], omega: omega0, bias_acc: [0.0, 0.0] });
        links.resize(model.links().len(), links[0]);
        for (j, joint) in model.joints().iter().enumerate() {
            let p = links[joint.parent];
            let r = rotate(p.angle, joint.origin);
            let w2 = p.omega * p.omega;
            links[joint.child] = LinkState {
                origin: [p.origin[0] + r[0], p.origin[1] + r[1]],
                angle: p.angle + state.joint_pos[j],
                omega: p.omega + state.gen_vel[nb + j],
                bias_acc: [p.bias_acc[0] - w2 * r[0], p.bias_acc[1] - w2 * r[1]],
            };
        }
        Kinematics { model, links, base_origin }
    }

    fn resolve(&self, frame: &FrameId) -> Result<FrameSpec, ModelError> {
        let spec = self.model.spec();
        let nl = spec.links.len();
        let unknown = || ModelError::UnknownFrame(format!("{frame:?}"));
        Ok(match frame {
            FrameId::Hand => spec.hand.clone(),
            FrameId::LeftFoot => spec.feet[0].clone(),
            FrameId::RightFoot => spec.feet[1].clone(),
            FrameId::Contact(i) => {
                let c = spec.contacts.get(*i).ok_or_else(unknown)?;
                FrameSpec { link: c.link, offset: c.offset, angle: 0.0 }
            }
            FrameId::JointCenter(j) => {
                let joint = spec.joints.get(*j).ok_or_else(unknown)?;
                FrameSpec { link: joint.child, offset: [0.0, 0.0], angle: 0.0 }
            }
            FrameId::LinkCom(k) => {
                let l = spec.links.get(*k).ok_or_else(unknown)?;
                FrameSpec { link: *k, offset: l.com, angle: 0.0 }
            }
            FrameId::Point(f) => {
                if f.link >= nl {
                    return Err(unknown());
                }
                f.clone()
            }
        })
    }

    /// World position of a point on a link.
    pub fn point_position(&self, link: usize, offset: [f64; 2]) -> [f64; 2] {
        let ls = &self.links[link];
        let r = rotate(ls.angle, offset);
        [ls.origin[0] + r[0], ls.origin[1] + r[1]]
    }

    /// World position of joint `j`.
    pub fn joint_position(&self, j: usize) -> [f64; 2] {
        self.links[self.model.joints()[j].child].origin
    }

    pub fn link_angle(&self, link: usize) -> f64 {
        self.links[link].angle
    }

    pub fn link_omega(&self, link: usize) -> f64 {
        self.links[link].omega
    }

    /// Linear Jacobian rows (2 × n_v) of a world point rigidly attached to `link`,
    /// written into `out` starting at `row`. The angular row is returned separately
    /// by [`Self::frame`].
    pub(crate) fn point_jacobian_into(&self, link: usize, p: [f64; 2], out: &mut Matrix, row: usize) {
        let nb = self.model.n_base();
        for j in 0..out.cols() {
            out[(row, j)] = 0.0;
            out[(row + 1, j)] = 0.0;
        }
        if nb == 3 {
            out[(row, 0)] = 1.0;
            out[(row + 1, 1)] = 1.0;
            out[(row, 2)] = -(p[1] - self.base_origin[1]);
            out[(row + 1, 2)] = p[0] - self.base_origin[0];
        }
        for &j in self.model.link_chain(link) {
            let o = self.joint_position(j);
            out[(row, nb + j)] = -(p[1] - o[1]);
            out[(row + 1, nb + j)] = p[0] - o[0];
        }
    }

    /// Bias acceleration `J̇ q̇` of a world point rigidly attached to `link`.
    pub(crate) fn point_bias_acc(&self, link: usize, p: [f64; 2]) -> [f64; 2] {
        let ls = &self.links[link];
        let r = [p[0] - ls.origin[0], p[1] - ls.origin[1]];
        let w2 = ls.omega * ls.omega;
        [ls.bias_acc[0] - w2 * r[0], ls.bias_acc[1] - w2 * r[1]]
    }

    pub fn frame(&self, frame: &FrameId) -> Result<FrameKinematics, ModelError> {
        let f = self.resolve(frame)?;
        let nb = self.model.n_base();
        let nv = self.model.n_v();
        let p = self.point_position(f.link, f.offset);
        let mut jac = Matrix::zeros(3, nv);
        self.point_jacobian_into(f.link, p, &mut jac, 0);
        if nb == 3 {
            jac[(2, 2)] = 1.0;
        }
        for &j in self.model.link_chain(f.link) {
            jac[(2, nb + j)] = 1.0;
        }
        let acc = self.point_bias_acc(f.link, p);
        Ok(FrameKinematics {
            position: p,
            angle: math::wrap_angle(self.links[f.link].angle + f.angle),
            jacobian: jac,
            jdot_qdot: [acc[0], acc[1], 0.0],
        })
    }
}

/// Pose, Jacobian and `J̇ q̇` of a frame at the given state.
pub fn forward_kinematics(
    model: &RobotModel,
    state: &RobotState,
    frame: &FrameId,
) -> Result<FrameKinematics, ModelError> {
    Kinematics::new(model, state).frame(frame)
}
