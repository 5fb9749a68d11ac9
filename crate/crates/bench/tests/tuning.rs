use wbc_bench::experiments::{self, ExperimentKind, ExperimentPlan, FreqStatus};
use wbc_bench::tuning::{self, Scenario, StandardScenario};
use wbc_bench::BenchError;
use wbc_core::model::{planar9, RobotModel};
use wbc_core::sim::{self, Clock, Metric, MetricsLog, SimError};
use wbc_core::tasks::{hold_hand_target, TaskSet};
use wbc_core::ControllerConfig;

/// Weightless robot holding its nominal posture: the state never moves, so
/// the QP matrices are the same at every step.
struct Frozen {
    model: RobotModel,
}

impl Frozen {
    fn new() -> Self {
        let mut spec = planar9().spec().clone();
        spec.gravity = 0.0;
        Frozen { model: RobotModel::new(spec).unwrap() }
    }
}

impl Scenario for Frozen {
    fn run(&self, cfg: &ControllerConfig, clock: &mut dyn Clock) -> Result<MetricsLog, SimError> {
        let initial = self.model.nominal_state();
        let tasks = TaskSet::standard(
            &self.model,
            &initial,
            hold_hand_target(&self.model, &initial),
            &cfg.gains(),
            &cfg.weights,
        )?;
        sim::run_closed_loop(&self.model, cfg, &tasks, &initial, clock).map(|r| r.log)
    }
}

/// Aborts on every run, or only below a frequency.
struct FailingBelow<'a> {
    inner: StandardScenario<'a>,
    f_min: f64,
}

impl Scenario for FailingBelow<'_> {
    fn run(&self, cfg: &ControllerConfig, clock: &mut dyn Clock) -> Result<MetricsLog, SimError> {
        if cfg.frequency < self.f_min {
            return Err(SimError::NonFinite { step: 0 });
        }
        self.inner.run(cfg, clock)
    }
}

#[test]
fn frozen_workload_selects_r_max() {
    let frozen = Frozen::new();
    let cfg = ControllerConfig { frequency: 40.0, duration: 1.0, ..Default::default() };
    let sel = tuning::select_ratio(&frozen, &cfg, 20).unwrap();
    assert_eq!(sel.r, 20);
    assert_eq!(sel.curve.len(), 20);
    assert!(sel.curve.iter().all(|p| p.errors.is_some()));
}

#[test]
fn tuned_gain_beats_bracket_endpoints() {
    let model = planar9();
    let scenario = StandardScenario(&model);
    let base = ControllerConfig { duration: 2.0, ..Default::default() };
    let range = tuning::gain_range(50.0);
    let t = tuning::tune_gain(&scenario, &base, 50.0, range).unwrap();
    assert!(range.0 <= t.gain && t.gain <= range.1);
    let e_x = |k: f64| {
        let c = ControllerConfig { frequency: 50.0, hand_gain: k, ..base.clone() };
        scenario.run(&c, &mut sim::NullClock).map(|l| l.max(Metric::HandPosition)).unwrap_or(f64::INFINITY)
    };
    assert!(t.e_x <= e_x(range.0) && t.e_x <= e_x(range.1));
    assert_eq!(t.e_x, e_x(t.gain));
    assert_eq!(t.evaluations.len(), tuning::GOLDEN_ITERATIONS + 4);

    let again = tuning::tune_gain(&scenario, &base, 50.0, range).unwrap();
    assert_eq!(again, t);
}

#[test]
fn tuner_fails_when_every_trial_aborts() {
    let model = planar9();
    let s = FailingBelow { inner: StandardScenario(&model), f_min: 1e9 };
    let err = tuning::tune_gain(&s, &ControllerConfig::default(), 100.0, (10.0, 100.0)).unwrap_err();
    assert!(matches!(err, BenchError::TunerFailed { f } if f == 100.0));
    assert_eq!(err.exit_code(), 3);
    assert!(matches!(tuning::tune_gain(&s, &ControllerConfig::default(), 100.0, (5.0, 1.0)), Err(BenchError::Plan(_))));
}

#[test]
fn selection_fails_when_baseline_aborts() {
    let model = planar9();
    let s = FailingBelow { inner: StandardScenario(&model), f_min: 1e9 };
    assert!(matches!(tuning::select_ratio(&s, &ControllerConfig::default(), 5), Err(BenchError::Sim(_))));
}

#[test]
fn freq_sweep_marks_untuned_rows_and_continues() {
    let model = planar9();
    let s = FailingBelow { inner: StandardScenario(&model), f_min: 40.0 };
    let mut plan = ExperimentPlan::new(
        ExperimentKind::FreqSweep,
        ControllerConfig { duration: 1.0, ..Default::default() },
        "unused",
    );
    plan.grid = vec![50.0, 25.0];
    plan.clock = wbc_bench::ClockKind::None;
    let res = experiments::run_freq_sweep_on(&s, &plan).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.rows[0].frequency, 25.0);
    assert_eq!(res.rows[0].status, FreqStatus::Untuned);
    assert_eq!(res.rows[1].status, FreqStatus::Tuned);
    let standard = res.standard.as_ref().unwrap();
    assert_eq!(standard.frequency, 50.0);
    let csv = experiments::emit_freq_sweep(&res).unwrap();
    let table = &csv.iter().find(|f| f.0 == "freq_sweep.csv").unwrap().1;
    assert!(table.lines().nth(1).unwrap().ends_with(",false,untuned"), "{table}");
    assert!(table.lines().last().unwrap().ends_with(",standard"));
}

#[test]
fn selected_ratio_satisfies_rule_on_both_errors() {
    let model = planar9();
    let cfg = ControllerConfig { frequency: 50.0, hand_gain: 650.0, duration: 2.0, ..Default::default() };
    let sel = tuning::select_ratio(&StandardScenario(&model), &cfg, 25).unwrap();
    let (bx, br) = sel.curve[0].errors.unwrap();
    assert_eq!(bx, sel.baseline.max(Metric::HandPosition));
    let sx = sel.selected.max(Metric::HandPosition);
    let sr = sel.selected.max(Metric::HandOrientation);
    assert!(sx <= 1.05 * bx && sr <= 1.05 * br);
    for p in &sel.curve {
        if p.r > sel.r {
            let (x, r) = p.errors.unwrap();
            assert!(x > 1.05 * bx || r > 1.05 * br, "r = {} qualifies but {} was chosen", p.r, sel.r);
        }
    }
}
