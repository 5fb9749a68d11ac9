//! Planar composite-rigid-body and recursive Newton-Euler algorithms.
//!
//! Wrenches are carried as `(F, N⁰)` with the moment taken about the world
//! origin, which makes shifting them between joint axes a single cross product.

use alloc::vec;
use alloc::vec::Vec;

use super::kinematics::{rotate, Kinematics};
use super::{BaseKind, RobotModel, RobotState};
use crate::linalg::{dot, Matrix};

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Composite inertia of a subtree: mass, first moment and second moment
/// about the world origin.
#[derive(Clone, Copy, Default)]
struct Composite {
    mass: f64,
    moment: [f64; 2],
    inertia_origin: f64,
}

impl Composite {
    fn add(&mut self, other: &Composite) {
        self.mass += other.mass;
        self.moment[0] += other.moment[0];
        self.moment[1] += other.moment[1];
        self.inertia_origin += other.inertia_origin;
    }

    /// Wrench `(F, N⁰)` needed to give the subtree a unit angular acceleration about `o`.
    fn rotation_wrench(&self, o: [f64; 2]) -> ([f64; 2], f64) {
        let rel = [self.moment[0] - self.mass * o[0], self.moment[1] - self.mass * o[1]];
        let f = [-rel[1], rel[0]];
        let n_o = self.inertia_origin - 2.0 * (o[0] * self.moment[0] + o[1] * self.moment[1])
            + self.mass * (o[0] * o[0] + o[1] * o[1]);
        (f, n_o + cross(o, f))
    }

    /// Wrench for a unit linear acceleration along `e`.
    fn translation_wrench(&self, e: [f64; 2]) -> ([f64; 2], f64) {
        let f = [self.mass * e[0], self.mass * e[1]];
        (f, cross(self.moment, e))
    }
}

/// Motion of one velocity coordinate: translation along a world axis, or
/// rotation about a world point.
#[derive(Clone, Copy)]
enum DofMotion {
    Translation([f64; 2]),
    Rotation([f64; 2]),
}

impl DofMotion {
    /// Generalized force seen by this coordinate for a wrench `(F, N⁰)`.
    fn project(&self, (f, n0): ([f64; 2], f64)) -> f64 {
        match *self {
            DofMotion::Translation(e) => e[0] * f[0] + e[1] * f[1],
            DofMotion::Rotation(o) => n0 - cross(o, f),
        }
    }
}

fn link_composites(model: &RobotModel, kin: &Kinematics) -> Vec<Composite> {
    let mut comp: Vec<Composite> = model
        .links()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let c = kin.point_position(i, l.com);
            Composite {
                mass: l.mass,
                moment: [l.mass * c[0], l.mass * c[1]],
                inertia_origin: l.inertia + l.mass * (c[0] * c[0] + c[1] * c[1]),
            }
        })
        .collect();
    for joint in model.joints().iter().rev() {
        let child = comp[joint.child];
        comp[joint.parent].add(&child);
    }
    comp
}

fn dof_motions(model: &RobotModel, kin: &Kinematics, base_origin: [f64; 2]) -> Vec<DofMotion> {
    let mut dofs = Vec::with_capacity(model.n_v());
    if model.base() == BaseKind::Floating {
        dofs.push(DofMotion::Translation([1.0, 0.0]));
        dofs.push(DofMotion::Translation([0.0, 1.0]));
        dofs.push(DofMotion::Rotation(base_origin));
    }
    for j in 0..model.n_joints() {
        dofs.push(DofMotion::Rotation(kin.joint_position(j)));
    }
    dofs
}

/// Generalized inertia matrix via composite rigid bodies.
pub fn mass_matrix(model: &RobotModel, state: &RobotState) -> Matrix {
    let kin = Kinematics::new(model, state);
    let base_origin = [state.base_pose[0], state.base_pose[1]];
    let comp = link_composites(model, &kin);
    let dofs = dof_motions(model, &kin, base_origin);
    let nb = model.n_base();
    let nv = model.n_v();
    let mut m = Matrix::zeros(nv, nv);

    let mut fill = |k: usize, wrench: ([f64; 2], f64), ancestors: &mut dyn Iterator<Item = usize>| {
        for a in ancestors {
            let v = dofs[a].project(wrench);
            m[(a, k)] = v;
            m[(k, a)] = v;
        }
    };

    // The base coordinates move the whole tree.
    for k in 0..nb {
        let wrench = match dofs[k] {
            DofMotion::Translation(e) => comp[0].translation_wrench(e),
            DofMotion::Rotation(o) => comp[0].rotation_wrench(o),
        };
        fill(k, wrench, &mut (0..=k));
    }
    for (j, joint) in model.joints().iter().enumerate() {
        let k = nb + j;
        let DofMotion::Rotation(o) = dofs[k] else { unreachable!() };
        let wrench = comp[joint.child].rotation_wrench(o);
        let chain = model.link_chain(joint.child);
        fill(k, wrench, &mut (0..nb).chain(chain.iter().map(|&c| nb + c)));
    }
    m
}

/// Generalized forces `M q̈ + h` realizing `q̈` with no external contact,
/// gravity included.
pub fn inverse_dynamics(model: &RobotModel, state: &RobotState, qdd: &[f64]) -> Vec<f64> {
    assert_eq!(qdd.len(), model.n_v(), "acceleration dimension");
    let nb = model.n_base();
    let g = model.gravity();
    let links = model.links();
    let nl = links.len();

    // Forward pass: origin position, angle, angular velocity, angular and linear acceleration.
    let mut origin = vec![[0.0; 2]; nl];
    let mut angle = vec![0.0; nl];
    let mut omega = vec![0.0; nl];
    let mut alpha = vec![0.0; nl];
    let mut acc = vec![[0.0; 2]; nl];
    origin[0] = [state.base_pose[0], state.base_pose[1]];
    angle[0] = state.base_pose[2];
    if model.base() == BaseKind::Floating {
        omega[0] = state.gen_vel[2];
        alpha[0] = qdd[2];
        acc[0] = [qdd[0], qdd[1]];
    }
    for (j, joint) in model.joints().iter().enumerate() {
        let (p, c) = (joint.parent, joint.child);
        let r = rotate(angle[p], joint.origin);
        let w2 = omega[p] * omega[p];
        origin[c] = [origin[p][0] + r[0], origin[p][1] + r[1]];
        angle[c] = angle[p] + state.joint_pos[j];
        omega[c] = omega[p] + state.gen_vel[nb + j];
        alpha[c] = alpha[p] + qdd[nb + j];
        acc[c] = [acc[p][0] - alpha[p] * r[1] - w2 * r[0], acc[p][1] + alpha[p] * r[0] - w2 * r[1]];
    }

    // Per-link wrench (F, N⁰) required by Newton-Euler, gravity folded in.
    let mut force = vec![[0.0; 2]; nl];
    let mut moment = vec![0.0; nl];
    for i in 0..nl {
        let l = &links[i];
        let r = rotate(angle[i], l.com);
        let c = [origin[i][0] + r[0], origin[i][1] + r[1]];
        let w2 = omega[i] * omega[i];
        let a_com = [acc[i][0] - alpha[i] * r[1] - w2 * r[0], acc[i][1] + alpha[i] * r[0] - w2 * r[1]];
        let f = [l.mass * a_com[0], l.mass * (a_com[1] + g)];
        force[i] = f;
        moment[i] = l.inertia * alpha[i] + cross(c, f);
    }

    // Backward pass.
    let mut tau = vec![0.0; model.n_v()];
    for (j, joint) in model.joints().iter().enumerate().rev() {
        let c = joint.child;
        tau[nb + j] = moment[c] - cross(origin[c], force[c]);
        let (fc, nc) = (force[c], moment[c]);
        force[joint.parent][0] += fc[0];
        force[joint.parent][1] += fc[1];
        moment[joint.parent] += nc;
    }
    if nb == 3 {
        tau[0] = force[0][0];
        tau[1] = force[0][1];
        tau[2] = moment[0] - cross(origin[0], force[0]);
    }
    tau
}

/// Coriolis, centrifugal and gravity terms: `inverse_dynamics` at `q̈ = 0`.
pub fn bias_forces(model: &RobotModel, state: &RobotState) -> Vec<f64> {
    inverse_dynamics(model, state, &vec![0.0; model.n_v()])
}

/// Whole-body centre of mass with its Jacobian and `J̇ q̇`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComKinematics {
    pub position: [f64; 2],
    /// 2 × n_v.
    pub jacobian: Matrix,
    pub jdot_qdot: [f64; 2],
}

pub fn com(model: &RobotModel, state: &RobotState) -> ComKinematics {
    com_from(model, &Kinematics::new(model, state))
}

pub(crate) fn com_from(model: &RobotModel, kin: &Kinematics) -> ComKinematics {
    let nv = model.n_v();
    let total = model.total_mass();
    let mut pos = [0.0; 2];
    let mut jac = Matrix::zeros(2, nv);
    let mut bias = [0.0; 2];
    let mut tmp = Matrix::zeros(2, nv);
    for (i, l) in model.links().iter().enumerate() {
        let w = l.mass / total;
        let p = kin.point_position(i, l.com);
        kin.point_jacobian_into(i, p, &mut tmp, 0);
        let b = kin.point_bias_acc(i, p);
        for d in 0..2 {
            pos[d] += w * p[d];
            bias[d] += w * b[d];
            for k in 0..nv {
                jac[(d, k)] += w * tmp[(d, k)];
            }
        }
    }
    ComKinematics { position: pos, jacobian: jac, jdot_qdot: bias }
}

/// `½ q̇ᵀ M q̇`.
pub fn kinetic_energy(model: &RobotModel, state: &RobotState) -> f64 {
    let m = mass_matrix(model, state);
    0.5 * dot(&state.gen_vel, &m.mul_vec(&state.gen_vel))
}

/// Gravitational potential energy relative to `z = 0`.
pub fn potential_energy(model: &RobotModel, state: &RobotState) -> f64 {
    let kin = Kinematics::new(model, state);
    model.links().iter().enumerate().map(|(i, l)| l.mass * model.gravity() * kin.point_position(i, l.com)[1]).sum()
}
