//! Empirical hand-gain tuning and update-ratio selection.

use rayon::prelude::*;
use wbc_core::sim::{self, Clock, Metric, MetricsLog, NullClock, SimError};
use wbc_core::{ControllerConfig, RobotModel};

use crate::BenchError;

/// Relative error increase tolerated when choosing the update ratio.
pub const RATIO_TOLERANCE: f64 = 1.05;
pub const GOLDEN_ITERATIONS: usize = 15;
/// Default gain search range as multiples of `f²`.
pub const GAIN_RANGE_F2: (f64, f64) = (0.01, 0.5);

/// A closed-loop workload parameterized by the controller config.
pub trait Scenario: Sync {
    fn run(&self, cfg: &ControllerConfig, clock: &mut dyn Clock) -> Result<MetricsLog, SimError>;
}

/// The standing square-tracking scenario from the model's nominal posture.
#[derive(Clone, Copy, Debug)]
pub struct StandardScenario<'a>(pub &'a RobotModel);

impl Scenario for StandardScenario<'_> {
    fn run(&self, cfg: &ControllerConfig, clock: &mut dyn Clock) -> Result<MetricsLog, SimError> {
        sim::run_standard(self.0, cfg, clock).map(|r| r.log)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub x: f64,
    pub value: f64,
}

/// Golden-section minimization of `objective` over `log x` on `[lo, hi]`.
/// Both endpoints are evaluated too and the best evaluation overall is
/// returned, so the result is never worse than either endpoint.
pub fn golden_section_log(
    mut objective: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> (Evaluation, Vec<Evaluation>) {
    assert!(0.0 < lo && lo < hi, "need 0 < lo < hi");
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut evals = Vec::new();
    let mut eval = |u: f64, evals: &mut Vec<Evaluation>| {
        let x = u.exp();
        let v = objective(x);
        let value = if v.is_nan() { f64::INFINITY } else { v };
        evals.push(Evaluation { x, value });
        value
    };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    eval(a, &mut evals);
    eval(b, &mut evals);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, &mut evals);
    let mut fd = eval(d, &mut evals);
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, &mut evals);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, &mut evals);
        }
    }
    let best = evals.iter().copied().fold(evals[0], |best, e| if e.value < best.value { e } else { best });
    (best, evals)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainTuning {
    pub frequency: f64,
    pub gain: f64,
    /// Max hand position error at the tuned gain.
    pub e_x: f64,
    pub evaluations: Vec<Evaluation>,
}

/// Default search range for `f`.
pub fn gain_range(f: f64) -> (f64, f64) {
    (GAIN_RANGE_F2.0 * f * f, GAIN_RANGE_F2.1 * f * f)
}

/// Tunes the hand gain at frequency `f` for the smallest max hand position
/// error, with `r = 1` and no noise. Aborted trials score `+inf`.
pub fn tune_gain(
    scenario: &dyn Scenario,
    base: &ControllerConfig,
    f: f64,
    range: (f64, f64),
) -> Result<GainTuning, BenchError> {
    if !(range.0 > 0.0 && range.0 < range.1) {
        return Err(BenchError::Plan(format!("gain range {range:?} needs 0 < lo < hi")));
    }
    let mut cfg = base.clone();
    cfg.frequency = f;
    cfg.update_ratio = 1;
    cfg.noise = 0.0;
    let (best, evaluations) = golden_section_log(
        |k| {
            let mut c = cfg.clone();
            c.hand_gain = k;
            match scenario.run(&c, &mut NullClock) {
                Ok(log) => log.max(Metric::HandPosition),
                Err(_) => f64::INFINITY,
            }
        },
        range.0,
        range.1,
        GOLDEN_ITERATIONS,
    );
    if !best.value.is_finite() {
        return Err(BenchError::TunerFailed { f });
    }
    Ok(GainTuning { frequency: f, gain: best.x, e_x: best.value, evaluations })
}

/// Accuracy of one update ratio; `None` errors mark an aborted run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioPoint {
    pub r: usize,
    pub errors: Option<(f64, f64)>,
}

/// Largest `r` whose hand position and orientation errors are both within
/// 5% of the `r = 1` values. Scans every candidate rather than stopping at
/// the first failure. Returns 1 when no larger ratio qualifies.
pub fn select_ratio_from_curve(curve: &[RatioPoint]) -> Result<usize, BenchError> {
    let (bx, br) = curve
        .iter()
        .find(|p| p.r == 1)
        .and_then(|p| p.errors)
        .ok_or_else(|| BenchError::Plan("ratio curve needs a successful r = 1 point".into()))?;
    Ok(curve
        .iter()
        .filter(|p| match p.errors {
            Some((ex, er)) => ex <= RATIO_TOLERANCE * bx && er <= RATIO_TOLERANCE * br,
            None => false,
        })
        .map(|p| p.r)
        .max()
        .unwrap_or(1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioSelection {
    pub r: usize,
    /// Ascending in `r`, starting at 1.
    pub curve: Vec<RatioPoint>,
    pub baseline: MetricsLog,
    pub selected: MetricsLog,
}

/// Runs `r = 1..=r_max` without noise and applies the 5% rule.
pub fn select_ratio(
    scenario: &dyn Scenario,
    cfg: &ControllerConfig,
    r_max: usize,
) -> Result<RatioSelection, BenchError> {
    let mut cfg = cfg.clone();
    cfg.noise = 0.0;
    let run = |r: usize| {
        let mut c = cfg.clone();
        c.update_ratio = r;
        scenario.run(&c, &mut NullClock)
    };
    let baseline = run(1)?;
    let others: Vec<(usize, Option<MetricsLog>)> =
        (2..=r_max.max(1)).into_par_iter().map(|r| (r, run(r).ok())).collect();
    let point = |r: usize, log: &MetricsLog| RatioPoint {
        r,
        errors: Some((log.max(Metric::HandPosition), log.max(Metric::HandOrientation))),
    };
    let mut curve = vec![point(1, &baseline)];
    curve.extend(others.iter().map(|(r, log)| match log {
        Some(l) => point(*r, l),
        None => RatioPoint { r: *r, errors: None },
    }));
    let r = select_ratio_from_curve(&curve)?;
    let selected = if r == 1 {
        baseline.clone()
    } else {
        others.into_iter().find(|(q, _)| *q == r).and_then(|(_, l)| l).expect("selected ratio ran")
    };
    Ok(RatioSelection { r, curve, baseline, selected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(values: &[(f64, f64)]) -> Vec<RatioPoint> {
        values.iter().enumerate().map(|(i, &e)| RatioPoint { r: i + 1, errors: Some(e) }).collect()
    }

    #[test]
    fn golden_section_finds_log_minimum() {
        let (best, evals) = golden_section_log(|x| (x.ln() - 3f64.ln()).powi(2), 0.1, 100.0, 40);
        assert!((best.x - 3.0).abs() < 1e-6, "{best:?}");
        assert_eq!(evals.len(), 44);
    }

    #[test]
    fn golden_section_keeps_endpoint_when_monotone() {
        let (best, _) = golden_section_log(|x| x, 2.0, 50.0, GOLDEN_ITERATIONS);
        assert_eq!(best.x, 2.0f64.ln().exp());
        let (best, _) = golden_section_log(|x| if x > 10.0 { f64::NAN } else { -x }, 1.0, 100.0, 15);
        assert!(best.value.is_finite() && best.x <= 10.0);
    }

    #[test]
    fn ratio_one_always_qualifies() {
        assert_eq!(select_ratio_from_curve(&curve(&[(1.0, 1.0), (2.0, 1.0)])).unwrap(), 1);
        assert_eq!(select_ratio_from_curve(&curve(&[(0.0, 0.0)])).unwrap(), 1);
    }

    #[test]
    fn monotone_degradation_stops_before_crossing() {
        let c: Vec<(f64, f64)> = (0..20).map(|i| (1.0 + 0.01 * i as f64, 2.0)).collect();
        assert_eq!(select_ratio_from_curve(&curve(&c)).unwrap(), 6);
    }

    #[test]
    fn both_errors_must_qualify() {
        let c: Vec<(f64, f64)> = (0..20).map(|i| (1.0, 1.0 + 0.02 * i as f64)).collect();
        assert_eq!(select_ratio_from_curve(&curve(&c)).unwrap(), 3);
        let c: Vec<(f64, f64)> = (0..20).map(|i| (1.0 + 0.02 * i as f64, 1.0)).collect();
        assert_eq!(select_ratio_from_curve(&curve(&c)).unwrap(), 3);
    }

    #[test]
    fn non_monotone_curve_keeps_largest() {
        let c = curve(&[(1.0, 1.0), (1.1, 1.0), (1.0, 1.0), (1.2, 1.0)]);
        assert_eq!(select_ratio_from_curve(&c).unwrap(), 3);
    }

    #[test]
    fn aborted_points_never_qualify() {
        let mut c = curve(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        c[2].errors = None;
        assert_eq!(select_ratio_from_curve(&c).unwrap(), 2);
        c[0].errors = None;
        assert!(select_ratio_from_curve(&c).is_err());
    }
}
