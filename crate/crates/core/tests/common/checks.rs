//! Measurements shared by the unit-level tests and the acceptance suite.
//! Each returns the worst observed error so callers pick the tolerance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbc_core::model::{
    self, bias_forces, com, forward_kinematics, inverse_dynamics, kinetic_energy, mass_matrix, potential_energy,
    FrameId, RobotModel, RobotState,
};
use wbc_core::qp::kkt_check;
use wbc_core::{gisolver, Matrix, SolveStatus, SolverConfig};

use super::oracle::{brute_force, make_infeasible, random_feasible_qp};
use super::{random_state, rod_chain};

pub const FD_STEP: f64 = 1e-6;

pub fn frames(model: &RobotModel) -> Vec<FrameId> {
    let mut f = vec![FrameId::Hand, FrameId::LeftFoot, FrameId::RightFoot];
    f.extend((0..model.n_contacts()).map(FrameId::Contact));
    f.extend((0..model.n_joints()).map(FrameId::JointCenter));
    f.extend((0..model.links().len()).map(FrameId::LinkCom));
    f
}

fn pose(model: &RobotModel, s: &RobotState, f: &FrameId) -> [f64; 3] {
    let k = forward_kinematics(model, s, f).unwrap();
    [k.position[0], k.position[1], k.angle]
}

pub fn unit(n: usize, k: usize, h: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = h;
    e
}

/// Max abs difference relative to the largest entry of `a` (at least 1).
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.max_abs_diff(b) / scale
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - (2.0 * std::f64::consts::PI) * (d / (2.0 * std::f64::consts::PI)).round()
}

pub fn fd_jacobian(model: &RobotModel, s: &RobotState, f: &FrameId) -> Matrix {
    let nv = model.n_v();
    let mut j = Matrix::zeros(3, nv);
    for k in 0..nv {
        let p = pose(model, &s.displaced(model, &unit(nv, k, FD_STEP)), f);
        let m = pose(model, &s.displaced(model, &unit(nv, k, -FD_STEP)), f);
        j[(0, k)] = (p[0] - m[0]) / (2.0 * FD_STEP);
        j[(1, k)] = (p[1] - m[1]) / (2.0 * FD_STEP);
        j[(2, k)] = angle_diff(p[2], m[2]) / (2.0 * FD_STEP);
    }
    j
}

fn states(model: &RobotModel, n: usize, seed: u64, spread: f64, speed: f64) -> Vec<RobotState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_state(model, &mut rng, spread, speed)).collect()
}

/// Worst relative error of every frame Jacobian against central differences.
pub fn frame_jacobian_error(model: &RobotModel, n: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for s in states(model, n, seed, 0.5, 1.0) {
        for f in frames(model) {
            let analytic = forward_kinematics(model, &s, &f).unwrap().jacobian;
            worst = worst.max(rel_err(&analytic, &fd_jacobian(model, &s, &f)));
        }
    }
    worst
}

pub fn com_jacobian_error(model: &RobotModel, n: usize, seed: u64) -> f64 {
    let nv = model.n_v();
    let mut worst = 0.0f64;
    for s in states(model, n, seed, 0.5, 1.0) {
        let c = com(model, &s);
        let mut fd = Matrix::zeros(2, nv);
        for k in 0..nv {
            let p = com(model, &s.displaced(model, &unit(nv, k, FD_STEP))).position;
            let q = com(model, &s.displaced(model, &unit(nv, k, -FD_STEP))).position;
            for d in 0..2 {
                fd[(d, k)] = (p[d] - q[d]) / (2.0 * FD_STEP);
            }
        }
        worst = worst.max(rel_err(&c.jacobian, &fd));
    }
    worst
}

/// Worst relative error of `J̇ q̇`, taken as the directional derivative of
/// `J q̇` along `q̇`, over all frames and the CoM.
pub fn bias_acceleration_error(model: &RobotModel, n: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for s in states(model, n, seed, 0.5, 1.0) {
        let step: Vec<f64> = s.gen_vel.iter().map(|v| v * FD_STEP).collect();
        let back: Vec<f64> = step.iter().map(|v| -v).collect();
        let fwd = s.displaced(model, &step);
        let bwd = s.displaced(model, &back);
        for f in frames(model) {
            let k = forward_kinematics(model, &s, &f).unwrap();
            let vp = forward_kinematics(model, &fwd, &f).unwrap().jacobian.mul_vec(&s.gen_vel);
            let vm = forward_kinematics(model, &bwd, &f).unwrap().jacobian.mul_vec(&s.gen_vel);
            let scale = k.jdot_qdot.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for d in 0..3 {
                let fd = (vp[d] - vm[d]) / (2.0 * FD_STEP);
                worst = worst.max((fd - k.jdot_qdot[d]).abs() / scale);
            }
        }
        let c = com(model, &s);
        let vp = com(model, &fwd).jacobian.mul_vec(&s.gen_vel);
        let vm = com(model, &bwd).jacobian.mul_vec(&s.gen_vel);
        for d in 0..2 {
            let fd = (vp[d] - vm[d]) / (2.0 * FD_STEP);
            worst = worst.max((fd - c.jdot_qdot[d]).abs() / c.jdot_qdot[d].abs().max(1.0));
        }
    }
    worst
}

/// Largest asymmetry and smallest eigenvalue of the mass matrix.
pub fn mass_matrix_spd(model: &RobotModel, n: usize, seed: u64) -> (f64, f64) {
    let mut asym = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for s in states(model, n, seed, 1.0, 1.0) {
        let mm = mass_matrix(model, &s);
        let k = mm.rows();
        let dm = DMatrix::from_row_slice(k, k, mm.as_slice());
        asym = asym.max((&dm - dm.transpose()).amax());
        min_eig = min_eig.min(SymmetricEigen::new(dm).eigenvalues.min());
    }
    (asym, min_eig)
}

/// Worst relative mismatch between inverse dynamics and `M q̈ + h`.
pub fn inverse_dynamics_error(model: &RobotModel, n: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for s in states(model, n, seed, 0.5, 2.0) {
        let qdd: Vec<f64> = (0..model.n_v()).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let tau = inverse_dynamics(model, &s, &qdd);
        let h = bias_forces(model, &s);
        let mq = mass_matrix(model, &s).mul_vec(&qdd);
        let scale = tau.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..model.n_v() {
            worst = worst.max((tau[i] - mq[i] - h[i]).abs() / scale);
        }
    }
    worst
}

pub fn forward_dynamics(m: &RobotModel, s: &RobotState) -> Vec<f64> {
    let mm = mass_matrix(m, s);
    let n = mm.rows();
    let dm = DMatrix::from_row_slice(n, n, mm.as_slice());
    let h = DVector::from_vec(bias_forces(m, s));
    dm.cholesky().unwrap().solve(&(-h)).iter().copied().collect()
}

/// Max relative energy drift of a passive double pendulum released from
/// rest, integrated for `duration` seconds. Energy is measured above the
/// hanging rest configuration, the minimum of the potential.
pub fn double_pendulum_energy_drift(duration: f64, dt: f64) -> f64 {
    let p = rod_chain(&[1.0, 1.0], &[0.5, 0.5], 9.81);
    let mut s = RobotState::new(&p, [0.0; 3], vec![0.3, -0.4], vec![0.0, 0.0]).unwrap();
    let rest = RobotState::new(&p, [0.0; 3], vec![-std::f64::consts::FRAC_PI_2, 0.0], vec![0.0, 0.0]).unwrap();
    let floor = potential_energy(&p, &rest);
    let energy = |s: &RobotState| kinetic_energy(&p, s) + potential_energy(&p, s) - floor;
    let e0 = energy(&s);
    let steps = (duration / dt).round() as usize;
    let mut max_rel = 0.0f64;
    for k in 0..steps {
        let qdd = forward_dynamics(&p, &s);
        s = model::integrate(&p, &s, &qdd, dt).unwrap();
        if k % 100 == 99 || k + 1 == steps {
            max_rel = max_rel.max(((energy(&s) - e0) / e0).abs());
        }
    }
    max_rel
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OracleStats {
    pub problems: usize,
    pub worst_dx: f64,
    pub worst_kkt: f64,
    /// Feasible problems the solver did not solve to optimality.
    pub false_infeasible: usize,
    /// Infeasible problems the solver did not flag.
    pub missed_infeasible: usize,
}

/// Solves `n` random feasible QPs plus `n_infeasible` infeasible ones and
/// compares against the active-set enumeration oracle.
pub fn oracle_comparison(n: usize, n_infeasible: usize, seed: u64) -> OracleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    let mut st = OracleStats { problems: n, ..Default::default() };
    for _ in 0..n {
        let qp = random_feasible_qp(&mut rng, 10, 15);
        let p = qp.problem();
        let mut cache = gisolver::factorize(&qp.g, &qp.c, &p.equality_rows()).unwrap();
        let sol = gisolver::solve(&p, &mut cache, &cfg).unwrap();
        if sol.status != SolveStatus::Optimal {
            st.false_infeasible += 1;
            st.worst_dx = f64::INFINITY;
            continue;
        }
        let x = brute_force(&qp).expect("feasible by construction");
        let d = sol.x.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        st.worst_dx = st.worst_dx.max(d);
        st.worst_kkt = st.worst_kkt.max(kkt_check(&p, &sol.x, &sol.multipliers(qp.m())).max());
    }
    for _ in 0..n_infeasible {
        let mut qp = random_feasible_qp(&mut rng, 6, 8);
        make_infeasible(&mut qp, &mut rng);
        assert!(brute_force(&qp).is_none());
        let p = qp.problem();
        let mut cache = gisolver::factorize(&qp.g, &qp.c, &p.equality_rows()).unwrap();
        match gisolver::solve(&p, &mut cache, &cfg) {
            Ok(sol) if sol.status == SolveStatus::Infeasible => {}
            _ => st.missed_infeasible += 1,
        }
    }
    st
}

/// Worst `‖x_stale − x_fresh‖∞` when re-solving from the cache with the
/// vectors it was built for.
pub fn stale_fixpoint_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..n {
        let qp = random_feasible_qp(&mut rng, 10, 15);
        let p = qp.problem();
        let mut cache = gisolver::factorize(&qp.g, &qp.c, &p.equality_rows()).unwrap();
        let fresh = gisolver::solve(&p, &mut cache, &cfg).unwrap();
        let stale = gisolver::solve_stale(&p, &mut cache, &cfg).unwrap();
        assert_eq!(cache.age(), 1);
        let d = fresh.x.iter().zip(&stale.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    worst
}
