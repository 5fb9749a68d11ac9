//! The baseline run and the noise, update-ratio and frequency sweeps.
//!
//! Each experiment runs into an in-memory result, which `emit_*` turns into
//! named CSV and SVG files. Accuracy runs use a null clock and may run in
//! parallel; timing runs are sequential on the calling thread.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use wbc_core::sim::{self, Metric, MetricsLog, NullClock, SimError, SolverTiming};
use wbc_core::{ControllerConfig, RobotModel};

use crate::output::{num, Table};
use crate::svg::{Plot, Series};
use crate::tuning::{self, GainTuning, RatioSelection, Scenario, StandardScenario};
use crate::{config, manifest::Manifest, output, BenchError, ClockKind};

pub const ACCURACY_REPEATS: usize = 3;
pub const TIMING_REPEATS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Baseline,
    NoiseSweep,
    RatioSweep,
    FreqSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Baseline => "baseline",
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::RatioSweep => "ratio-sweep",
            ExperimentKind::FreqSweep => "freq-sweep",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            ExperimentKind::Baseline => vec![],
            ExperimentKind::NoiseSweep => vec![0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0],
            ExperimentKind::RatioSweep => vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 11.0, 15.0, 20.0, 30.0, 40.0, 50.0],
            ExperimentKind::FreqSweep => vec![200.0, 150.0, 100.0, 50.0, 25.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    /// Noise amplitudes, update ratios or control frequencies.
    pub grid: Vec<f64>,
    /// Runs per accuracy point, each with its own seed.
    pub repeats: usize,
    /// Wall-clock runs per timing point; the median is reported.
    pub timing_repeats: usize,
    pub base: ControllerConfig,
    pub out_dir: PathBuf,
    pub clock: ClockKind,
}

impl ExperimentPlan {
    pub fn new(kind: ExperimentKind, base: ControllerConfig, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            kind,
            grid: kind.default_grid(),
            repeats: ACCURACY_REPEATS,
            timing_repeats: TIMING_REPEATS,
            base,
            out_dir: out_dir.into(),
            clock: ClockKind::Wall,
        }
    }

    /// Checks the plan and returns the grid sorted ascending without
    /// duplicates, so outputs do not depend on the order values were given.
    pub fn validate(&self) -> Result<Vec<f64>, BenchError> {
        config::validate(&self.base)?;
        let plan = |m: String| Err(BenchError::Plan(m));
        if self.repeats == 0 || self.timing_repeats == 0 {
            return plan("repeats must be at least 1".into());
        }
        let mut grid = self.grid.clone();
        if self.kind != ExperimentKind::Baseline && grid.is_empty() {
            return plan(format!("{} needs a non-empty grid", self.kind.name()));
        }
        if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
            return plan(format!("grid value {v} is not finite"));
        }
        let timed = matches!(self.kind, ExperimentKind::RatioSweep | ExperimentKind::FreqSweep);
        if timed && self.base.duration < 1.0 {
            return plan("timing needs a duration of at least 1 s".into());
        }
        match self.kind {
            ExperimentKind::Baseline => {}
            ExperimentKind::NoiseSweep => {
                if self.base.update_ratio != 1 {
                    return plan("the noise sweep runs with update_ratio = 1".into());
                }
                if let Some(v) = grid.iter().find(|v| **v < 0.0) {
                    return plan(format!("noise amplitude {v} is negative"));
                }
            }
            ExperimentKind::RatioSweep => {
                if self.base.noise != 0.0 {
                    return plan("the ratio sweep runs without noise".into());
                }
                if let Some(v) = grid.iter().find(|v| **v < 1.0 || v.fract() != 0.0) {
                    return plan(format!("update ratio {v} is not a positive integer"));
                }
                if !grid.contains(&1.0) {
                    return plan("the ratio grid must include r = 1".into());
                }
            }
            ExperimentKind::FreqSweep => {
                if self.base.noise != 0.0 {
                    return plan("the frequency sweep runs without noise".into());
                }
                for &f in &grid {
                    let mut c = self.base.clone();
                    c.frequency = f;
                    if f < 2.0 || config::validate(&c).is_err() {
                        return plan(format!("control frequency {f} is not usable"));
                    }
                }
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid)
    }
}

/// Median solver time per simulated second for each config. Wall-clock
/// runs are sequential and interleaved, one pass over all configs per
/// repeat after an untimed warm-up pass, so slow periods of the machine
/// spread over the grid instead of biasing single points. Without a clock
/// every timing is zero.
pub fn measure_timings(
    scenario: &dyn Scenario,
    cfgs: &[ControllerConfig],
    clock: ClockKind,
    repeats: usize,
) -> Result<Vec<SolverTiming>, BenchError> {
    if clock == ClockKind::None {
        return cfgs.iter().map(|c| Ok(sim::measure_solver_time(&scenario.run(c, &mut NullClock)?)?)).collect();
    }
    let mut samples: Vec<Vec<SolverTiming>> = vec![Vec::with_capacity(repeats); cfgs.len()];
    for pass in 0..=repeats {
        for (i, c) in cfgs.iter().enumerate() {
            let mut wall = clock.make();
            let t = sim::measure_solver_time(&scenario.run(c, wall.as_mut())?)?;
            if pass > 0 {
                samples[i].push(t);
            }
        }
    }
    Ok(samples
        .iter()
        .map(|s| {
            let pick = |f: fn(&SolverTiming) -> f64| sim::median(&s.iter().map(f).collect::<Vec<_>>());
            SolverTiming {
                total_ms_per_second: pick(|t| t.total_ms_per_second),
                factor_ms_per_second: pick(|t| t.factor_ms_per_second),
                solve_ms_per_second: pick(|t| t.solve_ms_per_second),
            }
        })
        .collect())
}

pub fn measure_timing(
    scenario: &dyn Scenario,
    cfg: &ControllerConfig,
    clock: ClockKind,
    repeats: usize,
) -> Result<SolverTiming, BenchError> {
    Ok(measure_timings(scenario, std::slice::from_ref(cfg), clock, repeats)?[0])
}

fn status_of(e: &SimError) -> String {
    match e.step() {
        Some(s) => format!("aborted:step={s}"),
        None => "aborted".into(),
    }
}

fn writes(name: &str, text: String) -> (String, String) {
    (name.to_string(), text)
}

fn csv(name: &str, table: &Table) -> Result<(String, String), BenchError> {
    let text = table.to_csv().map_err(|source| BenchError::Csv { path: PathBuf::from(name), source })?;
    Ok(writes(name, text))
}

fn metric_thresholds() -> Vec<(f64, String)> {
    vec![(1e-3, "1e-3".into()), (1e-2, "1e-2".into())]
}

// ---------------------------------------------------------------- baseline

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub log: MetricsLog,
    /// `None` when the run is shorter than the timing window.
    pub timing: Option<SolverTiming>,
}

pub fn run_baseline(model: &RobotModel, plan: &ExperimentPlan) -> Result<BaselineResult, BenchError> {
    plan.validate()?;
    let scenario = StandardScenario(model);
    let log = scenario.run(&plan.base, &mut NullClock)?;
    let timing = if plan.base.duration >= 1.0 {
        Some(measure_timing(&scenario, &plan.base, plan.clock, plan.timing_repeats)?)
    } else {
        None
    };
    Ok(BaselineResult { log, timing })
}

pub fn emit_baseline(res: &BaselineResult) -> Result<Vec<(String, String)>, BenchError> {
    let mut steps = Table::new(&[
        "step",
        "t",
        "e_x",
        "e_r",
        "e_com",
        "e_post",
        "e_feet",
        "factor_ms",
        "solve_ms",
        "iterations",
        "cache_age",
        "torque_excess",
    ]);
    for (i, r) in res.log.records.iter().enumerate() {
        let m = &r.metrics;
        steps.push(vec![
            i.to_string(),
            num(Some(r.t)),
            num(Some(m.e_x)),
            num(Some(m.e_r)),
            num(Some(m.e_com)),
            num(Some(m.e_post)),
            num(Some(m.e_feet)),
            num(Some(1e3 * r.factor_time)),
            num(Some(1e3 * r.solve_time)),
            r.iterations.to_string(),
            r.cache_age.to_string(),
            num(Some(r.torque_excess)),
        ]);
    }
    let mut summary = Table::new(&["metric", "max", "rms", "threshold", "below_threshold"]);
    for m in Metric::ALL {
        let max = res.log.max(m);
        summary.push(vec![
            m.name().into(),
            num(Some(max)),
            num(Some(res.log.rms(m))),
            num(Some(m.threshold())),
            (max < m.threshold()).to_string(),
        ]);
    }
    let mut timing = Table::new(&["total_ms_per_s", "factor_ms_per_s", "solve_ms_per_s"]);
    if let Some(t) = res.timing {
        timing.push(vec![
            num(Some(t.total_ms_per_second)),
            num(Some(t.factor_ms_per_second)),
            num(Some(t.solve_ms_per_second)),
        ]);
    }
    let plot = Plot {
        title: "Tracking errors over time".into(),
        x_label: "t [s]".into(),
        y_label: "error [m, rad]".into(),
        log_y: true,
        series: Metric::ALL
            .iter()
            .map(|&m| Series::line(m.name(), res.log.records.iter().map(|r| (r.t, m.of(&r.metrics))).collect()))
            .collect(),
        reference_lines: metric_thresholds(),
        ..Plot::default()
    };
    Ok(vec![
        csv("baseline.csv", &steps)?,
        csv("baseline_summary.csv", &summary)?,
        csv("baseline_timing.csv", &timing)?,
        writes("baseline.svg", plot.render()),
    ])
}

// ------------------------------------------------------------- noise sweep

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRun {
    pub noise: f64,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: Result<MetricsLog, SimError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSweepResult {
    /// Ordered by noise amplitude, then repeat.
    pub runs: Vec<NoiseRun>,
}

impl NoiseSweepResult {
    /// Median over successful repeats of the per-run max and RMS.
    pub fn aggregate(&self, noise: f64, metric: Metric) -> Option<(f64, f64)> {
        let ok: Vec<&MetricsLog> =
            self.runs.iter().filter(|r| r.noise == noise).filter_map(|r| r.outcome.as_ref().ok()).collect();
        if ok.is_empty() {
            return None;
        }
        let max: Vec<f64> = ok.iter().map(|l| l.max(metric)).collect();
        let rms: Vec<f64> = ok.iter().map(|l| l.rms(metric)).collect();
        Some((sim::median(&max), sim::median(&rms)))
    }

    pub fn noise_levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.runs.iter().map(|r| r.noise).collect();
        v.dedup();
        v
    }
}

pub fn run_noise_sweep(model: &RobotModel, plan: &ExperimentPlan) -> Result<NoiseSweepResult, BenchError> {
    if plan.kind != ExperimentKind::NoiseSweep {
        return Err(BenchError::Plan("not a noise sweep plan".into()));
    }
    let grid = plan.validate()?;
    let scenario = StandardScenario(model);
    let jobs: Vec<(f64, usize)> = grid.iter().flat_map(|&s| (0..plan.repeats).map(move |j| (s, j))).collect();
    let runs = jobs
        .into_par_iter()
        .map(|(noise, repeat)| {
            let mut c = plan.base.clone();
            c.noise = noise;
            c.seed = plan.base.seed.wrapping_add(repeat as u64);
            NoiseRun { noise, repeat, seed: c.seed, outcome: scenario.run(&c, &mut NullClock) }
        })
        .collect();
    Ok(NoiseSweepResult { runs })
}

pub fn emit_noise_sweep(res: &NoiseSweepResult) -> Result<Vec<(String, String)>, BenchError> {
    let mut raw = Table::new(&["I_sigma", "metric", "max", "rms", "repeat", "status"]);
    for run in &res.runs {
        for m in Metric::ALL {
            let (max, rms, status) = match &run.outcome {
                Ok(log) => (Some(log.max(m)), Some(log.rms(m)), "ok".to_string()),
                Err(e) => (None, None, status_of(e)),
            };
            raw.push(vec![num(Some(run.noise)), m.name().into(), num(max), num(rms), run.repeat.to_string(), status]);
        }
    }
    let levels = res.noise_levels();
    let mut summary = Table::new(&["I_sigma", "metric", "median_max", "median_rms", "runs_ok", "runs_aborted"]);
    for &s in &levels {
        let total = res.runs.iter().filter(|r| r.noise == s).count();
        let ok = res.runs.iter().filter(|r| r.noise == s && r.outcome.is_ok()).count();
        for m in Metric::ALL {
            let agg = res.aggregate(s, m);
            summary.push(vec![
                num(Some(s)),
                m.name().into(),
                num(agg.map(|a| a.0)),
                num(agg.map(|a| a.1)),
                ok.to_string(),
                (total - ok).to_string(),
            ]);
        }
    }
    let mut files = vec![csv("noise_sweep.csv", &raw)?, csv("noise_sweep_summary.csv", &summary)?];
    // Zero noise is drawn one decade below the smallest positive level.
    let min_pos = levels.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let zero_at = if min_pos.is_finite() { min_pos / 10.0 } else { 1e-3 };
    let x_of = |s: f64| if s == 0.0 { zero_at } else { s };
    for m in Metric::ALL {
        let points = |pick: fn((f64, f64)) -> f64| -> Vec<(f64, f64)> {
            levels.iter().filter_map(|&s| res.aggregate(s, m).map(|a| (x_of(s), pick(a)))).collect()
        };
        let plot = Plot {
            title: format!("{} as a function of noise level", m.name()),
            x_label: "I_sigma".into(),
            y_label: m.name().into(),
            log_x: true,
            log_y: true,
            series: vec![Series::line("max", points(|a| a.0)), Series::line("rms", points(|a| a.1))],
            reference_lines: vec![(m.threshold(), format!("threshold {}", m.threshold()))],
            x_tick_override: levels.contains(&0.0).then(|| (zero_at, "0".to_string())),
            ..Plot::default()
        };
        files.push(writes(&format!("noise_{}.svg", m.name()), plot.render()));
    }
    Ok(files)
}

// ------------------------------------------------------------- ratio sweep

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub r: usize,
    pub f_u: f64,
    pub outcome: Result<MetricsLog, SimError>,
    /// Median solver ms per simulated second; zero without a clock.
    pub solve_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioSweepResult {
    pub frequency: f64,
    pub rows: Vec<RatioRow>,
}

pub fn run_ratio_sweep(model: &RobotModel, plan: &ExperimentPlan) -> Result<RatioSweepResult, BenchError> {
    if plan.kind != ExperimentKind::RatioSweep {
        return Err(BenchError::Plan("not a ratio sweep plan".into()));
    }
    let grid = plan.validate()?;
    let scenario = StandardScenario(model);
    let f = plan.base.frequency;
    let cfg_for = |r: usize| {
        let mut c = plan.base.clone();
        c.update_ratio = r;
        c
    };
    let ratios: Vec<usize> = grid.iter().map(|&v| v as usize).collect();
    let accuracy: Vec<(usize, Result<MetricsLog, SimError>)> =
        ratios.par_iter().map(|&r| (r, scenario.run(&cfg_for(r), &mut NullClock))).collect();
    let timed: Vec<ControllerConfig> = accuracy.iter().filter(|(_, o)| o.is_ok()).map(|(r, _)| cfg_for(*r)).collect();
    let mut timings = measure_timings(&scenario, &timed, plan.clock, plan.timing_repeats)?.into_iter();
    let rows = accuracy
        .into_iter()
        .map(|(r, outcome)| {
            let solve_ms = outcome.is_ok().then(|| timings.next().expect("one timing per run").total_ms_per_second);
            RatioRow { r, f_u: f / r as f64, outcome, solve_ms }
        })
        .collect();
    Ok(RatioSweepResult { frequency: f, rows })
}

pub fn emit_ratio_sweep(res: &RatioSweepResult) -> Result<Vec<(String, String)>, BenchError> {
    let mut t = Table::new(&["r", "f_u", "e_x_max", "e_r_max", "solve_ms", "status"]);
    for row in &res.rows {
        let (ex, er, status) = match &row.outcome {
            Ok(l) => (Some(l.max(Metric::HandPosition)), Some(l.max(Metric::HandOrientation)), "ok".into()),
            Err(e) => (None, None, status_of(e)),
        };
        t.push(vec![row.r.to_string(), num(Some(row.f_u)), num(ex), num(er), num(row.solve_ms), status]);
    }
    let errs = |m: Metric| -> Vec<(f64, f64)> {
        res.rows.iter().filter_map(|row| row.outcome.as_ref().ok().map(|l| (row.r as f64, l.max(m)))).collect()
    };
    let times: Vec<(f64, f64)> = res.rows.iter().filter_map(|r| r.solve_ms.map(|t| (r.r as f64, t))).collect();
    let plot = Plot {
        title: format!("Errors and solver time vs update ratio at f = {} Hz", res.frequency),
        x_label: "update ratio r".into(),
        y_label: "max error [m, rad]".into(),
        y2_label: Some("solver time [ms per s]".into()),
        log_y: true,
        series: vec![
            Series::line("e_x", errs(Metric::HandPosition)),
            Series::line("e_r", errs(Metric::HandOrientation)),
            Series::line("solver ms", times).on_right(),
        ],
        ..Plot::default()
    };
    Ok(vec![csv("ratio_sweep.csv", &t)?, writes("ratio_sweep.svg", plot.render())])
}

// -------------------------------------------------------------- freq sweep

#[derive(Clone, Debug, PartialEq)]
pub enum FreqStatus {
    Tuned,
    /// Every tuner trial aborted.
    Untuned,
    /// The `r = 1` run at the tuned gain aborted.
    Aborted(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreqRow {
    pub frequency: f64,
    pub tuning: Option<GainTuning>,
    pub selection: Option<RatioSelection>,
    pub solve_ms: Option<f64>,
    pub status: FreqStatus,
}

impl FreqRow {
    pub fn gain(&self) -> Option<f64> {
        self.tuning.as_ref().map(|t| t.gain)
    }

    pub fn ratio(&self) -> Option<usize> {
        self.selection.as_ref().map(|s| s.r)
    }

    pub fn update_frequency(&self) -> Option<f64> {
        self.ratio().map(|r| self.frequency / r as f64)
    }

    /// All four metrics of the selected run below their thresholds.
    pub fn compliant(&self) -> bool {
        self.selection.as_ref().is_some_and(|s| Metric::ALL.iter().all(|&m| s.selected.max(m) < m.threshold()))
    }
}

/// The standard comparison point: highest grid frequency, `r = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardPoint {
    pub frequency: f64,
    pub gain: f64,
    pub log: MetricsLog,
    pub solve_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreqSweepResult {
    /// Ascending in frequency.
    pub rows: Vec<FreqRow>,
    pub standard: Option<StandardPoint>,
}

impl FreqSweepResult {
    /// Compliant tuned row with the smallest solver time.
    pub fn cheapest_compliant(&self) -> Option<&FreqRow> {
        self.rows
            .iter()
            .filter(|r| r.status == FreqStatus::Tuned && r.compliant())
            .min_by(|a, b| a.solve_ms.unwrap_or(f64::INFINITY).total_cmp(&b.solve_ms.unwrap_or(f64::INFINITY)))
    }
}

fn freq_config(base: &ControllerConfig, f: f64, k: f64, r: usize) -> ControllerConfig {
    let mut c = base.clone();
    c.frequency = f;
    c.hand_gain = k;
    c.update_ratio = r;
    c
}

/// Tunes and selects on `scenario` at every grid frequency. Accuracy work
/// runs in parallel across frequencies; timing follows sequentially.
pub fn run_freq_sweep_on(scenario: &dyn Scenario, plan: &ExperimentPlan) -> Result<FreqSweepResult, BenchError> {
    if plan.kind != ExperimentKind::FreqSweep {
        return Err(BenchError::Plan("not a frequency sweep plan".into()));
    }
    let grid = plan.validate()?;
    let mut rows: Vec<FreqRow> = grid
        .par_iter()
        .map(|&f| {
            let tuning = match tuning::tune_gain(scenario, &plan.base, f, tuning::gain_range(f)) {
                Ok(t) => t,
                Err(_) => {
                    return FreqRow {
                        frequency: f,
                        tuning: None,
                        selection: None,
                        solve_ms: None,
                        status: FreqStatus::Untuned,
                    }
                }
            };
            let cfg = freq_config(&plan.base, f, tuning.gain, 1);
            let r_max = ((f / 2.0).floor() as usize).max(1);
            match tuning::select_ratio(scenario, &cfg, r_max) {
                Ok(sel) => FreqRow {
                    frequency: f,
                    tuning: Some(tuning),
                    selection: Some(sel),
                    solve_ms: None,
                    status: FreqStatus::Tuned,
                },
                Err(e) => {
                    let status = match &e {
                        BenchError::Sim(s) => status_of(s),
                        other => other.to_string(),
                    };
                    FreqRow {
                        frequency: f,
                        tuning: Some(tuning),
                        selection: None,
                        solve_ms: None,
                        status: FreqStatus::Aborted(status),
                    }
                }
            }
        })
        .collect();
    // Selected points first, then the standard point, timed together.
    let mut cfgs: Vec<ControllerConfig> =
        rows.iter().filter_map(|row| Some(freq_config(&plan.base, row.frequency, row.gain()?, row.ratio()?))).collect();
    let standard_cfg = match rows.last() {
        Some(FreqRow { frequency, tuning: Some(t), selection: Some(_), .. }) => {
            Some(freq_config(&plan.base, *frequency, t.gain, 1))
        }
        _ => None,
    };
    cfgs.extend(standard_cfg.clone());
    let mut timings = measure_timings(scenario, &cfgs, plan.clock, plan.timing_repeats)?.into_iter();
    for row in &mut rows {
        if row.ratio().is_some() {
            row.solve_ms = Some(timings.next().expect("one timing per run").total_ms_per_second);
        }
    }
    let standard = standard_cfg.map(|cfg| {
        let row = rows.last().expect("standard point comes from the last row");
        StandardPoint {
            frequency: cfg.frequency,
            gain: cfg.hand_gain,
            log: row.selection.as_ref().expect("selected").baseline.clone(),
            solve_ms: timings.next().expect("standard timing").total_ms_per_second,
        }
    });
    Ok(FreqSweepResult { rows, standard })
}

pub fn run_freq_sweep(model: &RobotModel, plan: &ExperimentPlan) -> Result<FreqSweepResult, BenchError> {
    run_freq_sweep_on(&StandardScenario(model), plan)
}

fn four(log: Option<&MetricsLog>) -> Vec<String> {
    Metric::ALL.iter().map(|&m| num(log.map(|l| l.max(m)))).collect()
}

pub fn emit_freq_sweep(res: &FreqSweepResult) -> Result<Vec<(String, String)>, BenchError> {
    let mut table = Table::new(&[
        "f",
        "k",
        "r",
        "f_u",
        "e_x_base",
        "e_r_base",
        "e_com_base",
        "e_post_base",
        "e_x",
        "e_r",
        "e_com",
        "e_post",
        "solve_ms",
        "compliant",
        "status",
    ]);
    let mut trials = Table::new(&["f", "k", "e_x_max"]);
    let mut curves = Table::new(&["f", "r", "f_u", "e_x_max", "e_r_max", "within_5pct", "status"]);
    for row in &res.rows {
        let sel = row.selection.as_ref();
        let status = match &row.status {
            FreqStatus::Tuned => "tuned".to_string(),
            FreqStatus::Untuned => "untuned".to_string(),
            FreqStatus::Aborted(s) => s.clone(),
        };
        let mut cells = vec![
            num(Some(row.frequency)),
            num(row.gain()),
            row.ratio().map(|r| r.to_string()).unwrap_or_default(),
            num(row.update_frequency()),
        ];
        cells.extend(four(sel.map(|s| &s.baseline)));
        cells.extend(four(sel.map(|s| &s.selected)));
        cells.extend([num(row.solve_ms), row.compliant().to_string(), status]);
        table.push(cells);
        if let Some(t) = &row.tuning {
            for e in &t.evaluations {
                let v = e.value.is_finite().then_some(e.value);
                trials.push(vec![num(Some(row.frequency)), num(Some(e.x)), num(v)]);
            }
        }
        if let Some(s) = sel {
            let (bx, br) = s.curve[0].errors.expect("r = 1 succeeded");
            for p in &s.curve {
                let (ex, er) = p.errors.unzip();
                let ok = p
                    .errors
                    .is_some_and(|(x, r)| x <= tuning::RATIO_TOLERANCE * bx && r <= tuning::RATIO_TOLERANCE * br);
                curves.push(vec![
                    num(Some(row.frequency)),
                    p.r.to_string(),
                    num(Some(row.frequency / p.r as f64)),
                    num(ex),
                    num(er),
                    ok.to_string(),
                    if p.errors.is_some() { "ok" } else { "aborted" }.into(),
                ]);
            }
        }
    }
    if let Some(s) = &res.standard {
        let mut cells = vec![num(Some(s.frequency)), num(Some(s.gain)), "1".into(), num(Some(s.frequency))];
        cells.extend(four(Some(&s.log)));
        cells.extend(four(Some(&s.log)));
        let ok = Metric::ALL.iter().all(|&m| s.log.max(m) < m.threshold());
        cells.extend([num(Some(s.solve_ms)), ok.to_string(), "standard".into()]);
        table.push(cells);
    }
    let mut files = vec![
        csv("freq_sweep.csv", &table)?,
        csv("freq_sweep_tuning.csv", &trials)?,
        csv("freq_sweep_ratios.csv", &curves)?,
    ];
    let all_times: Vec<f64> =
        res.rows.iter().filter_map(|r| r.solve_ms).chain(res.standard.as_ref().map(|s| s.solve_ms)).collect();
    let log_x = !all_times.is_empty() && all_times.iter().all(|t| *t > 0.0);
    for m in [Metric::HandPosition, Metric::HandOrientation] {
        let mut series: Vec<Series> = res
            .rows
            .iter()
            .filter_map(|r| {
                let s = r.selection.as_ref()?;
                Some(Series::points(
                    format!("f = {} Hz, r = {}", r.frequency, s.r),
                    vec![(r.solve_ms?, s.selected.max(m))],
                ))
            })
            .collect();
        if let Some(s) = &res.standard {
            series.push(Series::points(
                format!("standard f = {} Hz, r = 1", s.frequency),
                vec![(s.solve_ms, s.log.max(m))],
            ));
        }
        let plot = Plot {
            title: format!("{} vs solver time for varying control frequencies", m.name()),
            x_label: "solver time [ms per s]".into(),
            y_label: format!("max {}", m.name()),
            log_x,
            log_y: true,
            series,
            reference_lines: vec![(m.threshold(), format!("threshold {}", m.threshold()))],
            ..Plot::default()
        };
        files.push(writes(&format!("freq_sweep_{}.svg", m.name()), plot.render()));
    }
    Ok(files)
}

// ---------------------------------------------------------------- driver

/// Runs `plan`, writes its outputs, the effective config and a manifest into
/// the output directory and returns the written paths. A QP that could not
/// be solved in the baseline run is dumped to `abort_qp.txt`.
pub fn execute(model: &RobotModel, plan: &ExperimentPlan) -> Result<Vec<PathBuf>, BenchError> {
    let grid = plan.validate()?;
    let files = match plan.kind {
        ExperimentKind::Baseline => match run_baseline(model, plan) {
            Ok(r) => emit_baseline(&r)?,
            Err(BenchError::Sim(e)) => {
                dump_abort(&plan.out_dir, &e)?;
                return Err(BenchError::Sim(e));
            }
            Err(e) => return Err(e),
        },
        ExperimentKind::NoiseSweep => emit_noise_sweep(&run_noise_sweep(model, plan)?)?,
        ExperimentKind::RatioSweep => emit_ratio_sweep(&run_ratio_sweep(model, plan)?)?,
        ExperimentKind::FreqSweep => emit_freq_sweep(&run_freq_sweep(model, plan)?)?,
    };
    let mut all = files;
    all.push(writes("config.toml", config::to_toml(&plan.base)));
    let names: Vec<String> = all.iter().map(|f| f.0.clone()).collect();
    let manifest = Manifest::new(
        plan.kind.name(),
        &plan.base,
        model,
        plan.clock.name(),
        &grid,
        plan.repeats,
        plan.timing_repeats,
        names,
    );
    all.push(writes("manifest.toml", manifest.to_toml()));
    output::write_all(&plan.out_dir, &all)
}

fn dump_abort(dir: &Path, e: &SimError) -> Result<(), BenchError> {
    if let SimError::Unsolved { qp, .. } = e {
        output::ensure_dir(dir)?;
        output::write_file(&dir.join("abort_qp.txt"), &format!("{e}\n{}", qp.dump()))?;
    }
    Ok(())
}
