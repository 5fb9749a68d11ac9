//! Closed loop of a kinematically controlled robot: solve the QP, perturb the
//! acceleration, integrate twice, log tracking metrics and solver time.
//!
//! Matrices are refactorized on steps `k ≡ 0 (mod r)`; in between only the
//! QP vectors are refreshed and the cached factors are reused.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gisolver::{self, FactorCache, SolveStatus, SolverConfig, SolverError};
use crate::math;
use crate::model::{self, FrameId, Kinematics, ModelError, RobotModel, RobotState};
use crate::qp::{self, CanonicalQp, QpError, StepContext};
use crate::tasks::{self, DamperParams, Side, TaskError, TaskGains, TaskKind, TaskSet, TaskTarget, TaskWeights};

/// Steps excluded from timing at the start of a run.
pub const TIMING_WARMUP_STEPS: usize = 10;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid controller configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("QP assembly failed at step {step}: {source}")]
    Assembly { step: usize, source: QpError },
    #[error("solver error at step {step}: {source}")]
    Solver { step: usize, source: SolverError },
    #[error("QP not solved at step {step}: {status:?}")]
    Unsolved { step: usize, status: SolveStatus, qp: Box<CanonicalQp> },
    #[error("integration failed at step {step}: {source}")]
    Integration { step: usize, source: ModelError },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("timing needs at least 1 s of simulated motion, got {0} s")]
    TooShort(f64),
    #[error("no steps left after excluding the warm-up window")]
    EmptyTimingWindow,
}

impl SimError {
    /// Step index at which the run aborted, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            SimError::Assembly { step, .. }
            | SimError::Solver { step, .. }
            | SimError::Unsolved { step, .. }
            | SimError::Integration { step, .. }
            | SimError::NonFinite { step } => Some(*step),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    /// Control frequency `f` [Hz].
    pub frequency: f64,
    /// Steps between refactorizations `r`.
    pub update_ratio: usize,
    /// Half-width `I_σ` of the uniform acceleration noise.
    pub noise: f64,
    /// Hand gain `k` [1/s²].
    pub hand_gain: f64,
    pub com_gain: f64,
    pub posture_gain: f64,
    pub feet_gain: f64,
    pub weights: TaskWeights,
    pub damper: DamperParams,
    /// Side [m] and period [s] of the hand square.
    pub square_side: f64,
    pub square_period: f64,
    /// Simulated duration [s].
    pub duration: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let gains = TaskGains::default();
        ControllerConfig {
            frequency: 100.0,
            update_ratio: 1,
            noise: 0.0,
            hand_gain: gains.hand,
            com_gain: gains.com,
            posture_gain: gains.posture,
            feet_gain: gains.feet,
            weights: TaskWeights::default(),
            damper: DamperParams::default(),
            square_side: 0.05,
            square_period: 4.0,
            duration: 4.0,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.frequency
    }

    /// `f_u = f / r`.
    pub fn update_frequency(&self) -> f64 {
        self.frequency / self.update_ratio as f64
    }

    pub fn n_steps(&self) -> usize {
        libm::round(self.duration * self.frequency) as usize
    }

    pub fn gains(&self) -> TaskGains {
        TaskGains { hand: self.hand_gain, com: self.com_gain, posture: self.posture_gain, feet: self.feet_gain }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(SimError::Config("frequency must be positive"));
        }
        if self.update_ratio < 1 {
            return Err(SimError::Config("update ratio must be at least 1"));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(SimError::Config("noise amplitude must be finite and non-negative"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(SimError::Config("duration must be positive"));
        }
        if self.n_steps() == 0 {
            return Err(SimError::Config("duration shorter than one control step"));
        }
        if self.solver.validate().is_err() {
            return Err(SimError::Config("invalid solver configuration"));
        }
        Ok(())
    }
}

/// The standing scenario: square hand trajectory starting at the initial
/// hand pose, everything else held at `initial`.
pub fn standard_tasks(model: &RobotModel, initial: &RobotState, cfg: &ControllerConfig) -> Result<TaskSet, SimError> {
    let square = tasks::square_from_state(model, initial, cfg.square_side, cfg.square_period);
    Ok(TaskSet::standard(model, initial, TaskTarget::Square(square), &cfg.gains(), &cfg.weights)?)
}

/// Monotonic time source around solver calls.
pub trait Clock {
    /// Seconds since an arbitrary origin.
    fn now(&mut self) -> f64;
}

/// Clock that never advances: timing columns come out as zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&mut self) -> f64 {
        0.0
    }
}

/// Adds i.i.d. uniform noise on `[-amplitude, amplitude]` to the first
/// `n_qdd` components. One draw is consumed per component whatever the
/// amplitude so runs with a common seed see the same stream.
pub fn inject_noise<R: Rng + ?Sized>(x: &[f64], n_qdd: usize, amplitude: f64, rng: &mut R) -> Vec<f64> {
    let mut out = x.to_vec();
    for v in &mut out[..n_qdd] {
        let unit: f64 = rng.gen();
        *v += amplitude * (2.0 * unit - 1.0);
    }
    out
}

/// Reference values the metrics are measured against.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTargets {
    pub hand: TaskTarget,
    pub com: [f64; 2],
    /// Joint indices of the posture metric set and their target centres.
    pub joint_centers: Vec<(usize, [f64; 2])>,
    pub feet: [[f64; 3]; 2],
}

impl MetricTargets {
    /// Targets implied by the task set, joint centres taken at the posture
    /// target configuration.
    pub fn from_tasks(model: &RobotModel, tasks: &TaskSet, initial: &RobotState) -> Self {
        let fixed = |kind| match tasks.find(kind).map(|t| &t.target) {
            Some(TaskTarget::Fixed(v)) => Some(v.clone()),
            _ => None,
        };
        let hand = tasks
            .find(TaskKind::HandPose)
            .map(|t| t.target.clone())
            .unwrap_or_else(|| tasks::hold_hand_target(model, initial));
        let com = fixed(TaskKind::CoM).map_or_else(|| model::com(model, initial).position, |v| [v[0], v[1]]);
        let posture_state = match fixed(TaskKind::Posture) {
            Some(q) => {
                let nb = model.n_base();
                let mut s = initial.clone();
                if nb == 3 {
                    s.base_pose.copy_from_slice(&q[..3]);
                }
                s.joint_pos.copy_from_slice(&q[nb..]);
                s
            }
            None => initial.clone(),
        };
        let kin = Kinematics::new(model, &posture_state);
        let joint_centers = model.non_arm_joints().into_iter().map(|j| (j, kin.joint_position(j))).collect();
        let ikin = Kinematics::new(model, initial);
        let foot = |side, frame: FrameId| match fixed(TaskKind::FootPose(side)) {
            Some(v) => [v[0], v[1], v[2]],
            None => {
                let fk = ikin.frame(&frame).expect("foot frames always exist");
                [fk.position[0], fk.position[1], fk.angle]
            }
        };
        MetricTargets {
            hand,
            com,
            joint_centers,
            feet: [foot(Side::Left, FrameId::LeftFoot), foot(Side::Right, FrameId::RightFoot)],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    /// Hand position error [m].
    pub e_x: f64,
    /// Hand orientation error [rad].
    pub e_r: f64,
    /// CoM error [m].
    pub e_com: f64,
    /// Mean non-arm joint centre error [m].
    pub e_post: f64,
    /// Largest foot pose error component.
    pub e_feet: f64,
}

pub fn compute_metrics(
    model: &RobotModel,
    state: &RobotState,
    targets: &MetricTargets,
    t: f64,
) -> Result<Metrics, SimError> {
    let kin = Kinematics::new(model, state);
    let hand = kin.frame(&FrameId::Hand).expect("hand frame always exists");
    let (hp, ha) = match &targets.hand {
        TaskTarget::Fixed(v) => ([v[0], v[1]], v[2]),
        TaskTarget::Square(sq) => {
            let s = tasks::square_trajectory(sq, t)?;
            (s.position, s.angle)
        }
    };
    let e_x = math::hypot(hand.position[0] - hp[0], hand.position[1] - hp[1]);
    let e_r = math::wrap_angle(hand.angle - ha).abs();
    let c = model::com_from(model, &kin).position;
    let e_com = math::hypot(c[0] - targets.com[0], c[1] - targets.com[1]);
    let e_post = if targets.joint_centers.is_empty() {
        0.0
    } else {
        let sum: f64 = targets
            .joint_centers
            .iter()
            .map(|(j, p)| {
                let x = kin.joint_position(*j);
                math::hypot(x[0] - p[0], x[1] - p[1])
            })
            .sum();
        sum / targets.joint_centers.len() as f64
    };
    let mut e_feet: f64 = 0.0;
    if model.base() == model::BaseKind::Floating {
        for (frame, target) in [FrameId::LeftFoot, FrameId::RightFoot].iter().zip(&targets.feet) {
            let fk = kin.frame(frame).expect("foot frames always exist");
            e_feet = e_feet
                .max((fk.position[0] - target[0]).abs())
                .max((fk.position[1] - target[1]).abs())
                .max(math::wrap_angle(fk.angle - target[2]).abs());
        }
    }
    Ok(Metrics { e_x, e_r, e_com, e_post, e_feet })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// Time after the step [s].
    pub t: f64,
    pub metrics: Metrics,
    /// Wall time of the factorization on refactorization steps [s].
    pub factor_time: f64,
    /// Wall time of the dual iteration [s].
    pub solve_time: f64,
    pub iterations: usize,
    /// Steps since the last factorization.
    pub cache_age: usize,
    /// Largest excursion of the recovered torques outside their limits [N m].
    pub torque_excess: f64,
}

impl StepRecord {
    pub fn solver_time(&self) -> f64 {
        self.factor_time + self.solve_time
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    HandPosition,
    HandOrientation,
    Com,
    Posture,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::HandPosition, Metric::HandOrientation, Metric::Com, Metric::Posture];

    pub fn name(self) -> &'static str {
        match self {
            Metric::HandPosition => "e_x",
            Metric::HandOrientation => "e_r",
            Metric::Com => "e_com",
            Metric::Posture => "e_post",
        }
    }

    /// Required accuracy of the standing scenario.
    pub fn threshold(self) -> f64 {
        match self {
            Metric::HandPosition | Metric::HandOrientation => 1e-3,
            Metric::Com | Metric::Posture => 1e-2,
        }
    }

    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Metric::HandPosition => m.e_x,
            Metric::HandOrientation => m.e_r,
            Metric::Com => m.e_com,
            Metric::Posture => m.e_post,
        }
    }
}

/// One record per control step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub dt: f64,
    pub records: Vec<StepRecord>,
}

impl MetricsLog {
    pub fn max(&self, metric: Metric) -> f64 {
        self.records.iter().map(|r| metric.of(&r.metrics)).fold(0.0, f64::max)
    }

    pub fn rms(&self, metric: Metric) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .records
            .iter()
            .map(|r| {
                let v = metric.of(&r.metrics);
                v * v
            })
            .sum();
        math::sqrt(sum / self.records.len() as f64)
    }

    pub fn max_feet_error(&self) -> f64 {
        self.records.iter().map(|r| r.metrics.e_feet).fold(0.0, f64::max)
    }

    pub fn max_torque_excess(&self) -> f64 {
        self.records.iter().map(|r| r.torque_excess).fold(0.0, f64::max)
    }

    pub fn duration(&self) -> f64 {
        self.records.len() as f64 * self.dt
    }

    /// Total solver time per simulated second over the whole run [s/s].
    pub fn solver_time_per_second(&self) -> f64 {
        let d = self.duration();
        if d == 0.0 {
            return 0.0;
        }
        self.records.iter().map(StepRecord::solver_time).sum::<f64>() / d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub log: MetricsLog,
    pub final_state: RobotState,
}

/// Snapshot state carried between refactorizations.
struct Frozen {
    qp: CanonicalQp,
    snapshot: qp::AssemblySnapshot,
    cache: FactorCache,
}

fn torque_excess(model: &RobotModel, tau: &[f64]) -> f64 {
    tau.iter()
        .zip(model.joints())
        .map(|(t, j)| (j.torque_limits[0] - t).max(t - j.torque_limits[1]).max(0.0))
        .fold(0.0, f64::max)
}

fn state_is_finite(s: &RobotState) -> bool {
    s.base_pose.iter().chain(&s.joint_pos).chain(&s.gen_vel).all(|v| v.is_finite())
}

/// Runs the closed loop from `initial` for `cfg.duration`.
pub fn run_closed_loop(
    model: &RobotModel,
    cfg: &ControllerConfig,
    tasks: &TaskSet,
    initial: &RobotState,
    clock: &mut dyn Clock,
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let dt = cfg.dt();
    let nv = model.n_v();
    let targets = MetricTargets::from_tasks(model, tasks, initial);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = initial.clone();
    let mut frozen: Option<Frozen> = None;
    let n_steps = cfg.n_steps();
    let mut records = Vec::with_capacity(n_steps);

    for step in 0..n_steps {
        let ctx = StepContext { t: step as f64 * dt, dt, step, damper: cfg.damper };
        let refactor = step % cfg.update_ratio == 0;
        let (sol, factor_time, solve_time, cache_age, qp_now) = if refactor {
            let (qp, snapshot) =
                qp::assemble(model, &state, tasks, &ctx).map_err(|source| SimError::Assembly { step, source })?;
            let t0 = clock.now();
            let mut cache = gisolver::factorize(qp.g(), qp.c(), &qp.equality_rows())
                .map_err(|source| SimError::Solver { step, source })?;
            let t1 = clock.now();
            let sol = gisolver::solve(&qp.problem(), &mut cache, &cfg.solver)
                .map_err(|source| SimError::Solver { step, source })?;
            let t2 = clock.now();
            let age = cache.age();
            let f = frozen.insert(Frozen { qp, snapshot, cache });
            (sol, t1 - t0, t2 - t1, age, &f.qp)
        } else {
            let f = frozen.as_mut().expect("step 0 always refactorizes");
            let fresh = qp::refresh_vectors(&f.qp, &f.snapshot, model, &state, tasks, &ctx)
                .map_err(|source| SimError::Assembly { step, source })?;
            let t0 = clock.now();
            let sol = gisolver::solve_stale(&fresh.problem(), &mut f.cache, &cfg.solver)
                .map_err(|source| SimError::Solver { step, source })?;
            let t1 = clock.now();
            f.qp = fresh;
            (sol, 0.0, t1 - t0, f.cache.age(), &f.qp)
        };
        if sol.status != SolveStatus::Optimal || sol.x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Unsolved { step, status: sol.status, qp: Box::new(qp_now.clone()) });
        }
        let forces = &sol.x[nv..];
        let tau = qp::recover_torques(model, &state, &sol.x[..nv], forces);
        let applied = inject_noise(&sol.x, nv, cfg.noise, &mut rng);
        let next = model::integrate(model, &state, &applied[..nv], dt)
            .map_err(|source| SimError::Integration { step, source })?;
        if !state_is_finite(&next) {
            return Err(SimError::NonFinite { step });
        }
        state = next;
        let t = (step + 1) as f64 * dt;
        records.push(StepRecord {
            t,
            metrics: compute_metrics(model, &state, &targets, t)?,
            factor_time,
            solve_time,
            iterations: sol.iterations,
            cache_age,
            torque_excess: torque_excess(model, &tau),
        });
    }
    Ok(SimResult { log: MetricsLog { dt, records }, final_state: state })
}

/// The standing scenario from the nominal posture.
pub fn run_standard(model: &RobotModel, cfg: &ControllerConfig, clock: &mut dyn Clock) -> Result<SimResult, SimError> {
    let initial = model.nominal_state();
    let tasks = standard_tasks(model, &initial, cfg)?;
    run_closed_loop(model, cfg, &tasks, &initial, clock)
}

/// Solver time per simulated second, warm-up excluded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverTiming {
    /// Factorization plus dual iterations [ms per simulated s].
    pub total_ms_per_second: f64,
    pub factor_ms_per_second: f64,
    pub solve_ms_per_second: f64,
}

pub fn measure_solver_time(log: &MetricsLog) -> Result<SolverTiming, SimError> {
    let duration = log.duration();
    if duration < 1.0 - 1e-9 {
        return Err(SimError::TooShort(duration));
    }
    let window = log.records.get(TIMING_WARMUP_STEPS..).unwrap_or(&[]);
    if window.is_empty() {
        return Err(SimError::EmptyTimingWindow);
    }
    let seconds = window.len() as f64 * log.dt;
    let factor: f64 = window.iter().map(|r| r.factor_time).sum();
    let solve: f64 = window.iter().map(|r| r.solve_time).sum();
    Ok(SolverTiming {
        total_ms_per_second: 1e3 * (factor + solve) / seconds,
        factor_ms_per_second: 1e3 * factor / seconds,
        solve_ms_per_second: 1e3 * solve / seconds,
    })
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
