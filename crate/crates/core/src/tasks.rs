//! Kinematic tasks regulated at the acceleration level.
//!
//! Every kinematic task has an error `e = g(q) ⊖ g*` and `ė = J q̇ - ġ*`. The
//! closed loop targets `ë = -(k e + 2√k ė)`, a critically damped second-order
//! response, which is linear in `q̈` through `ë = J q̈ + J̇ q̇ - g̈*`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math;
use crate::model::{self, BaseKind, FrameId, JointGroup, Kinematics, RobotModel, RobotState};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("square trajectory needs positive side and period (side {side}, period {period})")]
    BadTrajectory { side: f64, period: f64 },
    #[error("task target time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("invalid task {kind:?}: {reason}")]
    InvalidTask { kind: TaskKind, reason: &'static str },
    #[error("{0:?} has no kinematic error")]
    NotKinematic(TaskKind),
    #[error("velocity damper needs influence distance > safety distance ({influence} <= {safety})")]
    BadDamper { influence: f64, safety: f64 },
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("empty admissible acceleration interval for joint {joint}: [{lower}, {upper}]")]
    InfeasibleBounds { joint: usize, lower: f64, upper: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    HandPose,
    CoM,
    Posture,
    FootPose(Side),
    ForceReg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskMode {
    Objective,
    Equality,
}

/// Vertical square traversed at constant speed, starting from the bottom-left
/// corner and moving right first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareTrajectory {
    pub center: [f64; 2],
    pub side: f64,
    pub period: f64,
    /// Fixed hand orientation [rad].
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub position: [f64; 2],
    pub angle: f64,
    pub velocity: [f64; 2],
    pub acceleration: [f64; 2],
}

pub fn square_trajectory(traj: &SquareTrajectory, t: f64) -> Result<TrajectorySample, TaskError> {
    if !(traj.side > 0.0) || !(traj.period > 0.0) {
        return Err(TaskError::BadTrajectory { side: traj.side, period: traj.period });
    }
    if !(t >= 0.0) {
        return Err(TaskError::NegativeTime(t));
    }
    let h = traj.side / 2.0;
    let [cx, cz] = traj.center;
    let corners = [[cx - h, cz - h], [cx + h, cz - h], [cx + h, cz + h], [cx - h, cz + h]];
    let u = 4.0 * libm::fmod(t, traj.period) / traj.period;
    let edge = (libm::floor(u) as usize).min(3);
    let frac = u - edge as f64;
    let (a, b) = (corners[edge], corners[(edge + 1) % 4]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let rate = 4.0 / traj.period;
    Ok(TrajectorySample {
        position: [a[0] + frac * d[0], a[1] + frac * d[1]],
        angle: traj.angle,
        velocity: [d[0] * rate, d[1] * rate],
        acceleration: [0.0, 0.0],
    })
}

/// Square whose bottom-left corner is the hand pose in `state`.
pub fn square_from_state(model: &RobotModel, state: &RobotState, side: f64, period: f64) -> SquareTrajectory {
    let fk = model::forward_kinematics(model, state, &FrameId::Hand).expect("hand frame always exists");
    SquareTrajectory {
        center: [fk.position[0] + side / 2.0, fk.position[1] + side / 2.0],
        side,
        period,
        angle: fk.angle,
    }
}

/// Fixed target holding the hand at its pose in `state`.
pub fn hold_hand_target(model: &RobotModel, state: &RobotState) -> TaskTarget {
    let fk = model::forward_kinematics(model, state, &FrameId::Hand).expect("hand frame always exists");
    TaskTarget::Fixed(vec![fk.position[0], fk.position[1], fk.angle])
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskTarget {
    /// Constant target value in task coordinates (configuration coordinates for posture).
    Fixed(Vec<f64>),
    Square(SquareTrajectory),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub mode: TaskMode,
    /// PD gain [1/s²]; unused for `ForceReg`.
    pub gain: f64,
    pub row_weights: Vec<f64>,
    pub target: TaskTarget,
}

impl TaskSpec {
    pub fn dim(&self, model: &RobotModel) -> usize {
        task_dim(self.kind, model)
    }

    pub fn is_kinematic(&self) -> bool {
        self.kind != TaskKind::ForceReg
    }

    fn validate(&self, model: &RobotModel) -> Result<(), TaskError> {
        let invalid = |reason| Err(TaskError::InvalidTask { kind: self.kind, reason });
        let expected_mode = match self.kind {
            TaskKind::FootPose(_) => TaskMode::Equality,
            _ => TaskMode::Objective,
        };
        if self.mode != expected_mode {
            return invalid("foot tasks are equalities, all other tasks objectives");
        }
        if self.is_kinematic() && !(self.gain > 0.0) {
            return invalid("kinematic task gain must be positive");
        }
        let d = self.dim(model);
        if self.row_weights.len() != d {
            return invalid("row weight count differs from task dimension");
        }
        if self.row_weights.iter().any(|w| !(*w >= 0.0)) {
            return invalid("row weights must be non-negative");
        }
        match (&self.target, self.kind) {
            (TaskTarget::Square(_), TaskKind::HandPose) => {}
            (TaskTarget::Square(_), _) => return invalid("only the hand follows a trajectory"),
            (TaskTarget::Fixed(v), TaskKind::Posture) => {
                if v.len() != model.n_v() {
                    return invalid("posture target must be a full configuration");
                }
            }
            (TaskTarget::Fixed(v), _) => {
                if v.len() != d {
                    return invalid("target dimension differs from task dimension");
                }
            }
        }
        Ok(())
    }
}

fn task_dim(kind: TaskKind, model: &RobotModel) -> usize {
    match kind {
        TaskKind::HandPose | TaskKind::FootPose(_) => 3,
        TaskKind::CoM => 2,
        TaskKind::Posture => model.n_v(),
        TaskKind::ForceReg => 2 * model.n_contacts(),
    }
}

/// Rows of the stacked least-squares problem over `x = [q̈, f_c]`: residual `A x - b`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBlock {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub row_weights: Vec<f64>,
}

/// Validated ordered collection of tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSet {
    tasks: Vec<TaskSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskGains {
    pub hand: f64,
    pub com: f64,
    pub posture: f64,
    pub feet: f64,
}

impl Default for TaskGains {
    fn default() -> Self {
        TaskGains { hand: 2500.0, com: 100.0, posture: 100.0, feet: 100.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskWeights {
    pub hand: f64,
    pub com: f64,
    pub posture_arm: f64,
    pub posture_other: f64,
    pub force: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights { hand: 2000.0, com: 2000.0, posture_arm: 1.0, posture_other: 1000.0, force: 0.01 }
    }
}

impl TaskSet {
    pub fn new(model: &RobotModel, tasks: Vec<TaskSpec>) -> Result<Self, TaskError> {
        for t in &tasks {
            t.validate(model)?;
        }
        Ok(TaskSet { tasks })
    }

    /// The standing scenario: hand target, CoM and posture held at `initial`,
    /// both feet held in place, contact forces regularized towards an equal
    /// share of the weight.
    pub fn standard(
        model: &RobotModel,
        initial: &RobotState,
        hand_target: TaskTarget,
        gains: &TaskGains,
        weights: &TaskWeights,
    ) -> Result<Self, TaskError> {
        let kin = Kinematics::new(model, initial);
        let com0 = model::com_from(model, &kin).position;
        let foot = |f: FrameId| -> Vec<f64> {
            let fk = kin.frame(&f).expect("foot frames always exist");
            vec![fk.position[0], fk.position[1], fk.angle]
        };
        let nb = model.n_base();
        let mut posture_w = vec![weights.posture_other; model.n_v()];
        for (j, joint) in model.joints().iter().enumerate() {
            if joint.group == JointGroup::Arm {
                posture_w[nb + j] = weights.posture_arm;
            }
        }
        let nc = model.n_contacts();
        let mut tasks = vec![
            TaskSpec {
                kind: TaskKind::HandPose,
                mode: TaskMode::Objective,
                gain: gains.hand,
                row_weights: vec![weights.hand; 3],
                target: hand_target,
            },
            TaskSpec {
                kind: TaskKind::CoM,
                mode: TaskMode::Objective,
                gain: gains.com,
                row_weights: vec![weights.com; 2],
                target: TaskTarget::Fixed(com0.to_vec()),
            },
            TaskSpec {
                kind: TaskKind::Posture,
                mode: TaskMode::Objective,
                gain: gains.posture,
                row_weights: posture_w,
                target: TaskTarget::Fixed(initial.configuration_vector(model)),
            },
        ];
        if nc > 0 {
            tasks.push(TaskSpec {
                kind: TaskKind::ForceReg,
                mode: TaskMode::Objective,
                gain: 0.0,
                row_weights: vec![weights.force; 2 * nc],
                target: TaskTarget::Fixed(desired_contact_forces(model)),
            });
        }
        if model.base() == BaseKind::Floating {
            for (side, frame) in [(Side::Left, FrameId::LeftFoot), (Side::Right, FrameId::RightFoot)] {
                tasks.push(TaskSpec {
                    kind: TaskKind::FootPose(side),
                    mode: TaskMode::Equality,
                    gain: gains.feet,
                    row_weights: vec![1.0; 3],
                    target: TaskTarget::Fixed(foot(frame)),
                });
            }
        }
        TaskSet::new(model, tasks)
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn find(&self, kind: TaskKind) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.kind == kind)
    }

    pub fn find_mut(&mut self, kind: TaskKind) -> Option<&mut TaskSpec> {
        self.tasks.iter_mut().find(|t| t.kind == kind)
    }

    pub fn objectives(&self) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.iter().filter(|t| t.mode == TaskMode::Objective)
    }
}

/// Equal vertical share of the total weight at each contact, no tangential force.
pub fn desired_contact_forces(model: &RobotModel) -> Vec<f64> {
    let nc = model.n_contacts();
    let fz = model.total_mass() * model.gravity() / nc as f64;
    (0..nc).flat_map(|_| [0.0, fz]).collect()
}

/// Task error, its rate, Jacobian (d × n_v), `J̇ q̇` and the target acceleration.
pub(crate) struct TaskEval {
    pub e: Vec<f64>,
    pub edot: Vec<f64>,
    pub jacobian: Matrix,
    pub jdot_qdot: Vec<f64>,
    pub target_acc: Vec<f64>,
}

type TargetSample = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Target `(value, rate, acceleration)` at time `t`.
fn target_at(spec: &TaskSpec, t: f64, d: usize) -> Result<TargetSample, TaskError> {
    match &spec.target {
        TaskTarget::Fixed(v) => {
            let n = if spec.kind == TaskKind::Posture { d } else { v.len() };
            Ok((v.clone(), vec![0.0; n], vec![0.0; n]))
        }
        TaskTarget::Square(traj) => {
            let s = square_trajectory(traj, t)?;
            Ok((
                vec![s.position[0], s.position[1], s.angle],
                vec![s.velocity[0], s.velocity[1], 0.0],
                vec![s.acceleration[0], s.acceleration[1], 0.0],
            ))
        }
    }
}

pub(crate) fn evaluate(
    model: &RobotModel,
    kin: &Kinematics,
    state: &RobotState,
    spec: &TaskSpec,
    t: f64,
) -> Result<TaskEval, TaskError> {
    let d = spec.dim(model);
    let nv = model.n_v();
    let (g_star, gdot_star, gddot_star) = target_at(spec, t, d)?;
    let (value, angle_rows, jacobian, jdot_qdot): (Vec<f64>, &[usize], Matrix, Vec<f64>) = match spec.kind {
        TaskKind::HandPose | TaskKind::FootPose(_) => {
            let frame = match spec.kind {
                TaskKind::HandPose => FrameId::Hand,
                TaskKind::FootPose(Side::Left) => FrameId::LeftFoot,
                _ => FrameId::RightFoot,
            };
            let fk = kin.frame(&frame).expect("model frames always exist");
            (vec![fk.position[0], fk.position[1], fk.angle], &[2], fk.jacobian, fk.jdot_qdot.to_vec())
        }
        TaskKind::CoM => {
            let c = model::com_from(model, kin);
            (c.position.to_vec(), &[], c.jacobian, c.jdot_qdot.to_vec())
        }
        TaskKind::Posture => {
            let value = state.configuration_vector(model);
            (value, &[], Matrix::identity(nv), vec![0.0; nv])
        }
        TaskKind::ForceReg => return Err(TaskError::NotKinematic(spec.kind)),
    };
    let mut e: Vec<f64> = value.iter().zip(&g_star).map(|(g, s)| g - s).collect();
    if spec.kind == TaskKind::Posture {
        let nb = model.n_base();
        if nb == 3 {
            e[2] = math::wrap_angle(e[2]);
        }
        for v in &mut e[nb..] {
            *v = math::wrap_angle(*v);
        }
    } else {
        for &r in angle_rows {
            e[r] = math::wrap_angle(e[r]);
        }
    }
    let jq = jacobian.mul_vec(&state.gen_vel);
    let edot = jq.iter().zip(&gdot_star).map(|(a, b)| a - b).collect();
    Ok(TaskEval { e, edot, jacobian, jdot_qdot, target_acc: gddot_star })
}

/// `(e, ė)` of a kinematic task.
pub fn task_error(
    model: &RobotModel,
    state: &RobotState,
    spec: &TaskSpec,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>), TaskError> {
    let kin = Kinematics::new(model, state);
    let ev = evaluate(model, &kin, state, spec, t)?;
    Ok((ev.e, ev.edot))
}

/// `k e + 2√k ė`, element-wise.
pub fn pd_target(e: &[f64], edot: &[f64], k: f64) -> Vec<f64> {
    let damping = 2.0 * math::sqrt(k);
    e.iter().zip(edot).map(|(e, de)| k * e + damping * de).collect()
}

pub(crate) fn block_rhs(ev: &TaskEval, gain: f64) -> Vec<f64> {
    let target = pd_target(&ev.e, &ev.edot, gain);
    target.iter().zip(&ev.jdot_qdot).zip(&ev.target_acc).map(|((t, jd), ga)| -t - jd + ga).collect()
}

/// Linear form `A x = b` of the task target `ë = -ë*` over `x = [q̈, f_c]`.
pub fn linearize_task(model: &RobotModel, state: &RobotState, spec: &TaskSpec, t: f64) -> Result<TaskBlock, TaskError> {
    let nv = model.n_v();
    let n = nv + 2 * model.n_contacts();
    let d = spec.dim(model);
    let mut a = Matrix::zeros(d, n);
    if spec.kind == TaskKind::ForceReg {
        for i in 0..d {
            a[(i, nv + i)] = 1.0;
        }
        let TaskTarget::Fixed(f) = &spec.target else {
            return Err(TaskError::InvalidTask { kind: spec.kind, reason: "force target must be fixed" });
        };
        return Ok(TaskBlock { a, b: f.clone(), row_weights: spec.row_weights.clone() });
    }
    let kin = Kinematics::new(model, state);
    let ev = evaluate(model, &kin, state, spec, t)?;
    for i in 0..d {
        a.row_mut(i)[..nv].copy_from_slice(ev.jacobian.row(i));
    }
    Ok(TaskBlock { a, b: block_rhs(&ev, spec.gain), row_weights: spec.row_weights.clone() })
}

/// Velocity damper parameters: gain `ξ` [rad/s], influence distance `δ_i` and
/// safety distance `δ_s` [rad].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DamperParams {
    pub xi: f64,
    pub influence: f64,
    pub safety: f64,
}

impl Default for DamperParams {
    fn default() -> Self {
        DamperParams { xi: 1.0, influence: 0.2, safety: 0.02 }
    }
}

/// Effective acceleration bounds of the actuated joints over one step `dt`,
/// combining acceleration, velocity and damped position limits.
pub fn velocity_damper_bounds(
    model: &RobotModel,
    state: &RobotState,
    dt: f64,
    params: &DamperParams,
) -> Result<(Vec<f64>, Vec<f64>), TaskError> {
    if !(params.influence > params.safety) {
        return Err(TaskError::BadDamper { influence: params.influence, safety: params.safety });
    }
    if !(dt > 0.0) {
        return Err(TaskError::BadTimeStep(dt));
    }
    let nb = model.n_base();
    let span = params.influence - params.safety;
    let mut lower = Vec::with_capacity(model.n_joints());
    let mut upper = Vec::with_capacity(model.n_joints());
    for (j, joint) in model.joints().iter().enumerate() {
        let q = state.joint_pos[j];
        let v = state.gen_vel[nb + j];
        let [mut lo, mut hi] = joint.accel_limits;
        hi = hi.min((joint.velocity_limit - v) / dt);
        lo = lo.max((-joint.velocity_limit - v) / dt);
        let to_upper = joint.position_limits[1] - q;
        if to_upper < params.influence {
            let cap = params.xi * (to_upper - params.safety) / span;
            hi = hi.min((cap - v) / dt);
        }
        let to_lower = q - joint.position_limits[0];
        if to_lower < params.influence {
            let cap = params.xi * (to_lower - params.safety) / span;
            lo = lo.max((-cap - v) / dt);
        }
        if lo > hi {
            return Err(TaskError::InfeasibleBounds { joint: j, lower: lo, upper: hi });
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::planar9;

    fn square() -> SquareTrajectory {
        SquareTrajectory { center: [0.1, 0.5], side: 0.3, period: 4.0, angle: -0.7 }
    }

    #[test]
    fn square_anchors() {
        let tr = square();
        let s0 = square_trajectory(&tr, 0.0).unwrap();
        assert!((s0.position[0] + 0.05).abs() < 1e-15 && (s0.position[1] - 0.35).abs() < 1e-15);
        assert_eq!(s0.angle, -0.7);
        let half = square_trajectory(&tr, 2.0).unwrap();
        assert!((half.position[0] - 0.25).abs() < 1e-15 && (half.position[1] - 0.65).abs() < 1e-15);
        let full = square_trajectory(&tr, 4.0).unwrap();
        assert!((full.position[0] - s0.position[0]).abs() < 1e-12);
        assert!((full.position[1] - s0.position[1]).abs() < 1e-12);
        let mid_edge = square_trajectory(&tr, 0.5).unwrap();
        assert!((mid_edge.velocity[0] - 0.3).abs() < 1e-15);
        assert_eq!(mid_edge.acceleration, [0.0, 0.0]);
    }

    #[test]
    fn square_errors() {
        let mut tr = square();
        tr.side = 0.0;
        assert!(square_trajectory(&tr, 0.0).is_err());
        tr.side = 0.3;
        tr.period = -1.0;
        assert!(square_trajectory(&tr, 0.0).is_err());
        assert!(square_trajectory(&square(), -0.1).is_err());
    }

    #[test]
    fn pd_target_values() {
        assert_eq!(pd_target(&[0.0], &[0.0], 100.0), vec![0.0]);
        assert_eq!(pd_target(&[1.0], &[0.0], 100.0), vec![100.0]);
        assert_eq!(pd_target(&[0.0], &[1.0], 100.0), vec![20.0]);
    }

    #[test]
    fn posture_error_single_joint_offset() {
        let m = planar9();
        let s = m.nominal_state();
        let mut target = s.configuration_vector(&m);
        target[3 + 4] -= 0.1;
        let spec = TaskSpec {
            kind: TaskKind::Posture,
            mode: TaskMode::Objective,
            gain: 100.0,
            row_weights: vec![1.0; 12],
            target: TaskTarget::Fixed(target),
        };
        let (e, de) = task_error(&m, &s, &spec, 0.0).unwrap();
        for (i, v) in e.iter().enumerate() {
            let expected = if i == 7 { 0.1 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "row {i}: {v}");
        }
        assert!(de.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_angle_error_wraps() {
        let m = planar9();
        let mut s = m.nominal_state();
        // hand absolute angle = shoulder + elbow + wrist
        let current: f64 = s.joint_pos[6..].iter().sum();
        s.joint_pos[8] += 3.1 - current;
        let kin = Kinematics::new(&m, &s);
        let fk = kin.frame(&FrameId::Hand).unwrap();
        assert!((fk.angle - 3.1).abs() < 1e-12);
        let spec = TaskSpec {
            kind: TaskKind::HandPose,
            mode: TaskMode::Objective,
            gain: 100.0,
            row_weights: vec![1.0; 3],
            target: TaskTarget::Fixed(vec![fk.position[0], fk.position[1], -3.1]),
        };
        let (e, _) = task_error(&m, &s, &spec, 0.0).unwrap();
        let expected = 6.2 - 2.0 * core::f64::consts::PI;
        assert!((e[2] - expected).abs() < 1e-12, "{}", e[2]);
        assert!((e[2] + 0.083).abs() < 1e-3);
    }

    #[test]
    fn force_reg_block() {
        let m = planar9();
        let spec = TaskSpec {
            kind: TaskKind::ForceReg,
            mode: TaskMode::Objective,
            gain: 0.0,
            row_weights: vec![0.01; 8],
            target: TaskTarget::Fixed(vec![0.0; 8]),
        };
        let blk = linearize_task(&m, &m.nominal_state(), &spec, 0.0).unwrap();
        for i in 0..8 {
            for j in 0..20 {
                let expected = if j == 12 + i { 1.0 } else { 0.0 };
                assert_eq!(blk.a[(i, j)], expected);
            }
        }
        assert!(blk.b.iter().all(|v| *v == 0.0));
        assert!(task_error(&m, &m.nominal_state(), &spec, 0.0).is_err());
    }

    #[test]
    fn at_target_rhs_is_minus_jdot_qdot() {
        let m = planar9();
        let mut s = m.nominal_state();
        let gains = TaskGains::default();
        let tasks =
            TaskSet::standard(&m, &s, TaskTarget::Fixed(vec![0.0; 3]), &gains, &TaskWeights::default()).unwrap();
        let com_task = tasks.find(TaskKind::CoM).unwrap().clone();
        // zero velocity: at target, b = 0 = -J̇q̇
        let blk = linearize_task(&m, &s, &com_task, 0.0).unwrap();
        assert!(blk.b.iter().all(|v| v.abs() < 1e-12));
        // moving posture task at its own current value with velocity: e = 0,
        // b = -(2√k ė) - 0 for posture; check CoM with ė only through J̇q̇
        s.gen_vel = vec![0.0; 12];
        let (e, de) = task_error(&m, &s, &com_task, 0.0).unwrap();
        assert!(e.iter().chain(&de).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn task_validation() {
        let m = planar9();
        let bad_mode = TaskSpec {
            kind: TaskKind::FootPose(Side::Left),
            mode: TaskMode::Objective,
            gain: 100.0,
            row_weights: vec![1.0; 3],
            target: TaskTarget::Fixed(vec![0.0; 3]),
        };
        assert!(TaskSet::new(&m, vec![bad_mode]).is_err());
        let bad_gain = TaskSpec {
            kind: TaskKind::CoM,
            mode: TaskMode::Objective,
            gain: 0.0,
            row_weights: vec![1.0; 2],
            target: TaskTarget::Fixed(vec![0.0; 2]),
        };
        assert!(TaskSet::new(&m, vec![bad_gain]).is_err());
    }

    #[test]
    fn damper_far_and_at_margin() {
        let m = planar9();
        let mut s = m.nominal_state();
        let p = DamperParams::default();
        s.gen_vel[3] = 0.01;
        let (lo, hi) = velocity_damper_bounds(&m, &s, 0.01, &p).unwrap();
        assert_eq!(lo[0], -50.0);
        assert_eq!(hi[0], 50.0);
        // l_hip at the safety margin below its upper limit
        s.joint_pos[0] = 1.5 - p.safety;
        s.gen_vel[3] = 0.3;
        let (_, hi) = velocity_damper_bounds(&m, &s, 0.01, &p).unwrap();
        let expected = (0.0 - 0.3) / 0.01;
        assert!((hi[0] - expected).abs() < 1e-9, "{}", hi[0]);
    }

    #[test]
    fn damper_rejects_bad_params() {
        let m = planar9();
        let p = DamperParams { xi: 1.0, influence: 0.02, safety: 0.02 };
        assert!(matches!(velocity_damper_bounds(&m, &m.nominal_state(), 0.01, &p), Err(TaskError::BadDamper { .. })));
    }
}
