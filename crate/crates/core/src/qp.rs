//! Canonical QP over `x = [q̈, f_c]`.
//!
//! Torques are eliminated with the equations of motion `M q̈ + h = Sᵀ τ + J_cᵀ f_c`:
//! the unactuated rows become equalities on `x`, the actuated rows give `τ`
//! explicitly so torque limits turn into bounds on a linear form of `x`.
//!
//! Constraint rows, in order: floating-base equations of motion, foot task
//! equalities, friction cones (two per contact), torque limits, acceleration
//! bounds. Objective rows follow the order of the objective tasks.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;
use core::ops::Range;

use crate::gisolver::QpProblem;
use crate::linalg::{dot, norm_inf, Matrix};
use crate::model::{self, Kinematics, RobotModel, RobotState};
use crate::tasks::{self, DamperParams, TaskError, TaskKind, TaskMode, TaskSet, TaskSpec};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("a force regularization task is required when the model has contacts")]
    MissingForceReg,
    #[error("task set does not match the snapshot layout")]
    LayoutMismatch,
    #[error("dimension mismatch: {what} is {actual}, expected {expected}")]
    Dimension { what: &'static str, expected: usize, actual: usize },
}

/// Constraint row blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintLayout {
    pub eom: Range<usize>,
    pub feet: Range<usize>,
    pub cones: Range<usize>,
    pub torque: Range<usize>,
    pub accel: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskRows {
    pub kind: TaskKind,
    pub rows: Range<usize>,
}

/// Variable and row maps of an assembled QP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QpLayout {
    pub n_v: usize,
    pub n_f: usize,
    pub constraints: ConstraintLayout,
    /// Rows of the stacked objective `R`, `s`.
    pub objective: Vec<TaskRows>,
    /// Rows of `C` holding equality tasks.
    pub equality_tasks: Vec<TaskRows>,
    signature: Vec<(TaskKind, TaskMode, usize)>,
}

impl QpLayout {
    fn new(model: &RobotModel, tasks: &TaskSet) -> Self {
        let n_v = model.n_v();
        let nb = model.n_base();
        let nj = model.n_joints();
        let nc = model.n_contacts();
        let mut objective = Vec::new();
        let mut row = 0;
        for t in tasks.tasks().iter().filter(|t| t.mode == TaskMode::Objective) {
            let d = t.dim(model);
            objective.push(TaskRows { kind: t.kind, rows: row..row + d });
            row += d;
        }
        let eom = 0..nb;
        let mut equality_tasks = Vec::new();
        let mut row = nb;
        for t in tasks.tasks().iter().filter(|t| t.mode == TaskMode::Equality) {
            let d = t.dim(model);
            equality_tasks.push(TaskRows { kind: t.kind, rows: row..row + d });
            row += d;
        }
        let feet = nb..row;
        let cones = row..row + 2 * nc;
        let torque = cones.end..cones.end + nj;
        let accel = torque.end..torque.end + nj;
        QpLayout {
            n_v,
            n_f: 2 * nc,
            constraints: ConstraintLayout { eom, feet, cones, torque, accel },
            objective,
            equality_tasks,
            signature: signature(model, tasks),
        }
    }

    pub fn n(&self) -> usize {
        self.n_v + self.n_f
    }

    pub fn m(&self) -> usize {
        self.constraints.accel.end
    }

    /// Number of stacked objective rows.
    pub fn n_objective_rows(&self) -> usize {
        self.objective.last().map_or(0, |t| t.rows.end)
    }

    /// Equality rows come first.
    pub fn equality_rows(&self) -> Range<usize> {
        0..self.constraints.feet.end
    }

    pub fn objective_rows(&self, kind: TaskKind) -> Option<Range<usize>> {
        self.objective.iter().find(|t| t.kind == kind).map(|t| t.rows.clone())
    }

    pub fn qdd<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[..self.n_v]
    }

    pub fn forces<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[self.n_v..]
    }
}

fn signature(model: &RobotModel, tasks: &TaskSet) -> Vec<(TaskKind, TaskMode, usize)> {
    tasks.tasks().iter().map(|t| (t.kind, t.mode, t.dim(model))).collect()
}

/// `min ½ xᵀ G x + aᵀ x  s.t.  l ≤ C x ≤ u` with `G = Rᵀ W R`, `a = -Rᵀ W s`.
/// Matrices are shared between a snapshot and its refreshed copies.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalQp {
    g: Arc<Matrix>,
    a: Vec<f64>,
    c: Arc<Matrix>,
    l: Vec<f64>,
    u: Vec<f64>,
    r: Arc<Matrix>,
    s: Vec<f64>,
    w: Arc<Vec<f64>>,
    layout: Arc<QpLayout>,
}

impl CanonicalQp {
    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    pub fn upper(&self) -> &[f64] {
        &self.u
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn layout(&self) -> &QpLayout {
        &self.layout
    }

    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn m(&self) -> usize {
        self.c.rows()
    }

    /// True when both values hold the very same `G` and `C` allocations.
    pub fn shares_matrices(&self, other: &CanonicalQp) -> bool {
        Arc::ptr_eq(&self.g, &other.g) && Arc::ptr_eq(&self.c, &other.c) && Arc::ptr_eq(&self.r, &other.r)
    }

    pub fn problem(&self) -> QpProblem<'_> {
        QpProblem { g: &self.g, a: &self.a, c: &self.c, lower: &self.l, upper: &self.u }
    }

    pub fn equality_rows(&self) -> Vec<usize> {
        self.layout.equality_rows().collect()
    }

    /// Plain-text dump: a header with `n`, `m` and the layout, then `G`, `a`,
    /// `C`, `l`, `u` row-major, one matrix row per line. Values use the
    /// shortest representation that parses back exactly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let lay = &self.layout;
        let cl = &lay.constraints;
        let _ = writeln!(out, "canonical-qp n {} m {}", self.n(), self.m());
        let _ = writeln!(out, "variables qdd 0 {} forces {} {}", lay.n_v, lay.n_v, lay.n());
        let _ = writeln!(
            out,
            "rows eom {} {} feet {} {} cones {} {} torque {} {} accel {} {}",
            cl.eom.start,
            cl.eom.end,
            cl.feet.start,
            cl.feet.end,
            cl.cones.start,
            cl.cones.end,
            cl.torque.start,
            cl.torque.end,
            cl.accel.start,
            cl.accel.end
        );
        let line = |out: &mut String, v: &[f64]| {
            let mut first = true;
            for x in v {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{x:?}");
            }
            out.push('\n');
        };
        out.push_str("G\n");
        for i in 0..self.n() {
            line(&mut out, self.g.row(i));
        }
        out.push_str("a\n");
        line(&mut out, &self.a);
        out.push_str("C\n");
        for i in 0..self.m() {
            line(&mut out, self.c.row(i));
        }
        out.push_str("l\n");
        line(&mut out, &self.l);
        out.push_str("u\n");
        line(&mut out, &self.u);
        out
    }
}

/// State-dependent matrices frozen at assembly time.
#[derive(Clone, Debug, PartialEq)]
pub struct AssemblySnapshot {
    pub step: usize,
    pub mass_matrix: Arc<Matrix>,
    pub contact_jacobian: Arc<Matrix>,
    /// Jacobians of the kinematic tasks, in task-set order.
    pub task_jacobians: Arc<Vec<(TaskKind, Matrix)>>,
    layout: Arc<QpLayout>,
}

impl AssemblySnapshot {
    pub fn layout(&self) -> &QpLayout {
        &self.layout
    }
}

/// Outputs `G`, `C` and the per-task objective rows written during assembly.
type MatrixSinks<'a> = (&'a mut Matrix, &'a mut Matrix, &'a mut Vec<(TaskKind, Matrix)>);

/// Per-step inputs of the assembly besides state and tasks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepContext {
    pub t: f64,
    pub dt: f64,
    pub step: usize,
    pub damper: DamperParams,
}

/// Linear Jacobians of the contact points stacked as `2 n_c × n_v`.
pub fn contact_jacobian(model: &RobotModel, kin: &Kinematics) -> Matrix {
    let mut jc = Matrix::zeros(2 * model.n_contacts(), model.n_v());
    for (i, c) in model.contacts().iter().enumerate() {
        let p = kin.point_position(c.link, c.offset);
        kin.point_jacobian_into(c.link, p, &mut jc, 2 * i);
    }
    jc
}

/// Everything that changes between refreshes.
struct Vectors {
    s: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
}

fn check_tasks(model: &RobotModel, tasks: &TaskSet) -> Result<(), QpError> {
    if model.n_contacts() > 0 && tasks.find(TaskKind::ForceReg).is_none() {
        return Err(QpError::MissingForceReg);
    }
    Ok(())
}

fn check_state(model: &RobotModel, state: &RobotState) -> Result<(), QpError> {
    let dims = [
        ("joint positions", model.n_joints(), state.joint_pos.len()),
        ("generalized velocity", model.n_v(), state.gen_vel.len()),
    ];
    for (what, expected, actual) in dims {
        if expected != actual {
            return Err(QpError::Dimension { what, expected, actual });
        }
    }
    Ok(())
}

/// Right-hand sides at the current state. When `matrices` is given, the
/// state-dependent matrix rows are written into it as well.
fn evaluate_rows(
    model: &RobotModel,
    state: &RobotState,
    tasks: &TaskSet,
    layout: &QpLayout,
    ctx: &StepContext,
    mut matrices: Option<MatrixSinks<'_>>,
) -> Result<Vectors, QpError> {
    let nv = layout.n_v;
    let nb = model.n_base();
    let kin = Kinematics::new(model, state);
    let h = model::bias_forces(model, state);
    let mut s = vec![0.0; layout.n_objective_rows()];
    let mut l = vec![0.0; layout.m()];
    let mut u = vec![0.0; layout.m()];

    let mut obj = layout.objective.iter();
    let mut eq = layout.equality_tasks.iter();
    for spec in tasks.tasks() {
        let rows = match spec.mode {
            TaskMode::Objective => obj.next(),
            TaskMode::Equality => eq.next(),
        }
        .ok_or(QpError::LayoutMismatch)?
        .rows
        .clone();
        let (rhs, jac) = task_rows(model, &kin, state, spec, ctx.t)?;
        match spec.mode {
            TaskMode::Objective => s[rows.clone()].copy_from_slice(&rhs),
            TaskMode::Equality => {
                l[rows.clone()].copy_from_slice(&rhs);
                u[rows.clone()].copy_from_slice(&rhs);
            }
        }
        if let (Some((r, c, jacs)), Some(jac)) = (matrices.as_mut(), jac) {
            let target: &mut Matrix = match spec.mode {
                TaskMode::Objective => r,
                TaskMode::Equality => c,
            };
            for (k, row) in rows.clone().enumerate() {
                target.row_mut(row)[..nv].copy_from_slice(jac.row(k));
            }
            jacs.push((spec.kind, jac));
        }
    }

    let cl = &layout.constraints;
    for (k, row) in cl.eom.clone().enumerate() {
        l[row] = -h[k];
        u[row] = -h[k];
    }
    for row in cl.cones.clone() {
        l[row] = f64::NEG_INFINITY;
        u[row] = 0.0;
    }
    for (j, (row, joint)) in cl.torque.clone().zip(model.joints()).enumerate() {
        l[row] = joint.torque_limits[0] - h[nb + j];
        u[row] = joint.torque_limits[1] - h[nb + j];
    }
    let (lo, hi) = tasks::velocity_damper_bounds(model, state, ctx.dt, &ctx.damper)?;
    for (j, row) in cl.accel.clone().enumerate() {
        l[row] = lo[j];
        u[row] = hi[j];
    }
    Ok(Vectors { s, l, u })
}

/// Right-hand side and, for kinematic tasks, the `d × n_v` Jacobian.
fn task_rows(
    model: &RobotModel,
    kin: &Kinematics,
    state: &RobotState,
    spec: &TaskSpec,
    t: f64,
) -> Result<(Vec<f64>, Option<Matrix>), QpError> {
    if spec.kind == TaskKind::ForceReg {
        let tasks::TaskTarget::Fixed(f) = &spec.target else {
            return Err(TaskError::InvalidTask { kind: spec.kind, reason: "force target must be fixed" }.into());
        };
        return Ok((f.clone(), None));
    }
    let ev = tasks::evaluate(model, kin, state, spec, t)?;
    let rhs = tasks::block_rhs(&ev, spec.gain);
    Ok((rhs, Some(ev.jacobian)))
}

fn weighted_linear_term(r: &Matrix, w: &[f64], s: &[f64]) -> Vec<f64> {
    let ws: Vec<f64> = w.iter().zip(s).map(|(w, s)| -w * s).collect();
    r.tr_mul_vec(&ws)
}

/// Builds the QP at `state` and the snapshot of its matrices.
pub fn assemble(
    model: &RobotModel,
    state: &RobotState,
    tasks: &TaskSet,
    ctx: &StepContext,
) -> Result<(CanonicalQp, AssemblySnapshot), QpError> {
    check_tasks(model, tasks)?;
    check_state(model, state)?;
    let layout = QpLayout::new(model, tasks);
    let (n, m, nv) = (layout.n(), layout.m(), layout.n_v);
    let nb = model.n_base();
    let mu = model.friction_mu();

    let mut r = Matrix::zeros(layout.n_objective_rows(), n);
    let mut c = Matrix::zeros(m, n);
    let mut jacs = Vec::new();
    let vectors = evaluate_rows(model, state, tasks, &layout, ctx, Some((&mut r, &mut c, &mut jacs)))?;

    let mut w = vec![0.0; layout.n_objective_rows()];
    let mut obj = layout.objective.iter();
    for spec in tasks.objectives() {
        let rows = obj.next().ok_or(QpError::LayoutMismatch)?.rows.clone();
        w[rows.clone()].copy_from_slice(&spec.row_weights);
        if spec.kind == TaskKind::ForceReg {
            for (k, row) in rows.enumerate() {
                r[(row, nv + k)] = 1.0;
            }
        }
    }

    let mm = model::mass_matrix(model, state);
    let kin = Kinematics::new(model, state);
    let jc = contact_jacobian(model, &kin);
    let cl = &layout.constraints;
    // [M | -J_cᵀ] rows: unactuated ones as equalities, actuated ones as torque bounds.
    let dyn_rows = cl.eom.clone().map(|row| (row, row)).chain(cl.torque.clone().zip(nb..nv));
    for (row, k) in dyn_rows {
        let dst = c.row_mut(row);
        dst[..nv].copy_from_slice(mm.row(k));
        for f in 0..layout.n_f {
            dst[nv + f] = -jc[(f, k)];
        }
    }
    for (i, row) in cl.cones.clone().step_by(2).enumerate() {
        let (fx, fz) = (nv + 2 * i, nv + 2 * i + 1);
        c[(row, fx)] = 1.0;
        c[(row, fz)] = -mu;
        c[(row + 1, fx)] = -1.0;
        c[(row + 1, fz)] = -mu;
    }
    for (j, row) in cl.accel.clone().enumerate() {
        c[(row, nb + j)] = 1.0;
    }

    let g = r.weighted_gram(&w);
    let a = weighted_linear_term(&r, &w, &vectors.s);
    let layout = Arc::new(layout);
    let qp = CanonicalQp {
        g: Arc::new(g),
        a,
        c: Arc::new(c),
        l: vectors.l,
        u: vectors.u,
        r: Arc::new(r),
        s: vectors.s,
        w: Arc::new(w),
        layout: layout.clone(),
    };
    let snapshot = AssemblySnapshot {
        step: ctx.step,
        mass_matrix: Arc::new(mm),
        contact_jacobian: Arc::new(jc),
        task_jacobians: Arc::new(jacs),
        layout,
    };
    Ok((qp, snapshot))
}

/// New QP with the frozen `G`, `C`, `R`, `W` of `qp` and vectors `s`, `a`,
/// `l`, `u` recomputed at `state`.
pub fn refresh_vectors(
    qp: &CanonicalQp,
    snapshot: &AssemblySnapshot,
    model: &RobotModel,
    state: &RobotState,
    tasks: &TaskSet,
    ctx: &StepContext,
) -> Result<CanonicalQp, QpError> {
    if !Arc::ptr_eq(&qp.layout, &snapshot.layout) && *qp.layout != *snapshot.layout {
        return Err(QpError::LayoutMismatch);
    }
    if snapshot.layout.signature != signature(model, tasks) {
        return Err(QpError::LayoutMismatch);
    }
    check_state(model, state)?;
    let vectors = evaluate_rows(model, state, tasks, &qp.layout, ctx, None)?;
    Ok(CanonicalQp {
        g: qp.g.clone(),
        a: weighted_linear_term(&qp.r, &qp.w, &vectors.s),
        c: qp.c.clone(),
        l: vectors.l,
        u: vectors.u,
        r: qp.r.clone(),
        s: vectors.s,
        w: qp.w.clone(),
        layout: qp.layout.clone(),
    })
}

/// `τ = S_a (M q̈ + h - J_cᵀ f_c)` at `state`.
pub fn recover_torques(model: &RobotModel, state: &RobotState, qdd: &[f64], forces: &[f64]) -> Vec<f64> {
    assert_eq!(qdd.len(), model.n_v(), "acceleration dimension");
    assert_eq!(forces.len(), 2 * model.n_contacts(), "contact force dimension");
    let kin = Kinematics::new(model, state);
    let jc = contact_jacobian(model, &kin);
    let mut tau = model::inverse_dynamics(model, state, qdd);
    let jtf = jc.tr_mul_vec(forces);
    for (t, j) in tau.iter_mut().zip(&jtf) {
        *t -= j;
    }
    tau.split_off(model.n_base())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktReport {
    /// `‖G x + a - Cᵀ λ‖_∞`.
    pub stationarity: f64,
    /// Largest bound violation of `C x`.
    pub primal: f64,
    /// Largest `|λ_i| · slack_i` on the side `λ_i` acts on.
    pub complementarity: f64,
    /// Largest multiplier of the wrong sign (positive multipliers act on the
    /// lower side, negative ones on the upper side).
    pub dual: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity).max(self.dual)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// KKT residuals of a primal/dual pair for `min ½ xᵀ G x + aᵀ x, l ≤ C x ≤ u`.
pub fn kkt_check(qp: &QpProblem, x: &[f64], lambda: &[f64]) -> KktReport {
    let mut grad: Vec<f64> = qp.g.mul_vec(x);
    for (gi, ai) in grad.iter_mut().zip(qp.a) {
        *gi += ai;
    }
    let ctl = qp.c.tr_mul_vec(lambda);
    for (gi, ci) in grad.iter_mut().zip(&ctl) {
        *gi -= ci;
    }
    let mut report = KktReport { stationarity: norm_inf(&grad), ..KktReport::default() };
    for i in 0..qp.m() {
        let v = dot(qp.c.row(i), x);
        let (lo, hi) = (qp.lower[i], qp.upper[i]);
        report.primal = report.primal.max(lo - v).max(v - hi);
        let li = lambda[i];
        let equality = lo == hi;
        if li > 0.0 && !equality {
            if lo.is_finite() {
                report.complementarity = report.complementarity.max(li * (v - lo).abs());
            } else {
                report.dual = report.dual.max(li);
            }
        } else if li < 0.0 && !equality {
            if hi.is_finite() {
                report.complementarity = report.complementarity.max(-li * (hi - v).abs());
            } else {
                report.dual = report.dual.max(-li);
            }
        }
    }
    report
}
