//! TOML controller configuration. Keys mirror `ControllerConfig` field
//! names; nested `[weights]`, `[damper]` and `[solver]` tables mirror the
//! corresponding structs. Missing keys keep their defaults.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wbc_core::tasks::{DamperParams, TaskWeights};
use wbc_core::{ControllerConfig, SolverConfig};

use crate::BenchError;

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    hand: Option<f64>,
    com: Option<f64>,
    posture_arm: Option<f64>,
    posture_other: Option<f64>,
    force: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DamperFile {
    xi: Option<f64>,
    influence: Option<f64>,
    safety: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    tol_c: Option<f64>,
    tol_d: Option<f64>,
    max_iter: Option<usize>,
    warm_start: Option<bool>,
    /// Absent means never refactorize on age.
    refactor_threshold: Option<usize>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    frequency: Option<f64>,
    update_ratio: Option<usize>,
    noise: Option<f64>,
    hand_gain: Option<f64>,
    com_gain: Option<f64>,
    posture_gain: Option<f64>,
    feet_gain: Option<f64>,
    square_side: Option<f64>,
    square_period: Option<f64>,
    duration: Option<f64>,
    seed: Option<u64>,
    weights: Option<WeightsFile>,
    damper: Option<DamperFile>,
    solver: Option<SolverFile>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses a config and validates the result.
pub fn parse_config(text: &str) -> Result<ControllerConfig, BenchError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
    let mut c = ControllerConfig::default();
    set(&mut c.frequency, file.frequency);
    set(&mut c.update_ratio, file.update_ratio);
    set(&mut c.noise, file.noise);
    set(&mut c.hand_gain, file.hand_gain);
    set(&mut c.com_gain, file.com_gain);
    set(&mut c.posture_gain, file.posture_gain);
    set(&mut c.feet_gain, file.feet_gain);
    set(&mut c.square_side, file.square_side);
    set(&mut c.square_period, file.square_period);
    set(&mut c.duration, file.duration);
    set(&mut c.seed, file.seed);
    if let Some(w) = file.weights {
        set(&mut c.weights.hand, w.hand);
        set(&mut c.weights.com, w.com);
        set(&mut c.weights.posture_arm, w.posture_arm);
        set(&mut c.weights.posture_other, w.posture_other);
        set(&mut c.weights.force, w.force);
    }
    if let Some(d) = file.damper {
        set(&mut c.damper.xi, d.xi);
        set(&mut c.damper.influence, d.influence);
        set(&mut c.damper.safety, d.safety);
    }
    if let Some(s) = file.solver {
        set(&mut c.solver.tol_c, s.tol_c);
        set(&mut c.solver.tol_d, s.tol_d);
        set(&mut c.solver.max_iter, s.max_iter);
        set(&mut c.solver.warm_start, s.warm_start);
        set(&mut c.solver.refactor_threshold, s.refactor_threshold);
    }
    validate(&c)?;
    Ok(c)
}

/// Rejects NaN alongside out-of-range values.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(c: &ControllerConfig) -> Result<(), BenchError> {
    c.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let gains = [c.hand_gain, c.com_gain, c.posture_gain, c.feet_gain];
    if gains.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(BenchError::Config("task gains must be positive".into()));
    }
    if !(c.square_side > 0.0) || !(c.square_period > 0.0) {
        return Err(BenchError::Config("square side and period must be positive".into()));
    }
    if !(c.damper.influence > c.damper.safety) || !(c.damper.safety >= 0.0) || !(c.damper.xi > 0.0) {
        return Err(BenchError::Config("damper needs xi > 0 and influence > safety >= 0".into()));
    }
    let w = &c.weights;
    if [w.hand, w.com, w.posture_arm, w.posture_other, w.force].iter().any(|v| !(*v >= 0.0)) {
        return Err(BenchError::Config("weights must be non-negative".into()));
    }
    if !(w.force > 0.0) {
        return Err(BenchError::Config("the force regularization weight must be positive".into()));
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<ControllerConfig, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text).map_err(|e| match e {
        BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Complete TOML rendering of `c`; parses back to `c`.
pub fn to_toml(c: &ControllerConfig) -> String {
    let TaskWeights { hand, com, posture_arm, posture_other, force } = c.weights;
    let DamperParams { xi, influence, safety } = c.damper;
    let SolverConfig { tol_c, tol_d, max_iter, warm_start, refactor_threshold } = c.solver;
    let file = ConfigFile {
        frequency: Some(c.frequency),
        update_ratio: Some(c.update_ratio),
        noise: Some(c.noise),
        hand_gain: Some(c.hand_gain),
        com_gain: Some(c.com_gain),
        posture_gain: Some(c.posture_gain),
        feet_gain: Some(c.feet_gain),
        square_side: Some(c.square_side),
        square_period: Some(c.square_period),
        duration: Some(c.duration),
        seed: Some(c.seed),
        weights: Some(WeightsFile {
            hand: Some(hand),
            com: Some(com),
            posture_arm: Some(posture_arm),
            posture_other: Some(posture_other),
            force: Some(force),
        }),
        damper: Some(DamperFile { xi: Some(xi), influence: Some(influence), safety: Some(safety) }),
        solver: Some(SolverFile {
            tol_c: Some(tol_c),
            tol_d: Some(tol_d),
            max_iter: Some(max_iter),
            warm_start: Some(warm_start),
            refactor_threshold: (refactor_threshold != usize::MAX).then_some(refactor_threshold),
        }),
    };
    toml::to_string(&file).expect("config serializes")
}

/// One `name=value` line per field, floats in round-trip form.
fn canonical(c: &ControllerConfig) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "frequency={:?}\nupdate_ratio={}\nnoise={:?}\nhand_gain={:?}\ncom_gain={:?}\nposture_gain={:?}\nfeet_gain={:?}\n\
         square_side={:?}\nsquare_period={:?}\nduration={:?}\nseed={}\n",
        c.frequency,
        c.update_ratio,
        c.noise,
        c.hand_gain,
        c.com_gain,
        c.posture_gain,
        c.feet_gain,
        c.square_side,
        c.square_period,
        c.duration,
        c.seed
    );
    let w = &c.weights;
    let _ = write!(
        s,
        "weights.hand={:?}\nweights.com={:?}\nweights.posture_arm={:?}\nweights.posture_other={:?}\nweights.force={:?}\n",
        w.hand, w.com, w.posture_arm, w.posture_other, w.force
    );
    let d = &c.damper;
    let _ = write!(s, "damper.xi={:?}\ndamper.influence={:?}\ndamper.safety={:?}\n", d.xi, d.influence, d.safety);
    let v = &c.solver;
    let _ = write!(
        s,
        "solver.tol_c={:?}\nsolver.tol_d={:?}\nsolver.max_iter={}\nsolver.warm_start={}\nsolver.refactor_threshold={}\n",
        v.tol_c, v.tol_d, v.max_iter, v.warm_start, v.refactor_threshold
    );
    s
}

/// SHA-256 over every field of `c`.
pub fn config_hash(c: &ControllerConfig) -> String {
    hex::encode(Sha256::digest(canonical(c).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(parse_config("").unwrap(), ControllerConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ControllerConfig { frequency: 50.0, hand_gain: 612.5, ..Default::default() };
        c.weights.posture_arm = 2.0;
        c.solver.refactor_threshold = 40;
        c.seed = 99;
        assert_eq!(parse_config(&to_toml(&c)).unwrap(), c);
        assert_eq!(parse_config(&to_toml(&ControllerConfig::default())).unwrap(), ControllerConfig::default());
    }

    #[test]
    fn partial_file_overrides_only_given_keys() {
        let c = parse_config("frequency = 25.0\n[damper]\nxi = 2.0\n").unwrap();
        assert_eq!(c.frequency, 25.0);
        assert_eq!(c.damper.xi, 2.0);
        assert_eq!(c.damper.safety, DamperParams::default().safety);
        assert_eq!(c.update_ratio, 1);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(parse_config("frequncy = 10.0"), Err(BenchError::Config(_))));
        assert!(matches!(parse_config("update_ratio = 0"), Err(BenchError::Config(_))));
        assert!(matches!(parse_config("noise = -1.0"), Err(BenchError::Config(_))));
        assert!(matches!(parse_config("[weights]\nforce = 0.0"), Err(BenchError::Config(_))));
        assert!(matches!(parse_config("[damper]\ninfluence = 0.01"), Err(BenchError::Config(_))));
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = ControllerConfig::default();
        let h0 = config_hash(&base);
        assert_eq!(h0, config_hash(&base.clone()));
        type Mutation = Box<dyn Fn(&mut ControllerConfig)>;
        let variants: Vec<Mutation> = vec![
            Box::new(|c| c.frequency = 101.0),
            Box::new(|c| c.update_ratio = 2),
            Box::new(|c| c.noise = 1e-300),
            Box::new(|c| c.hand_gain += 1e-9),
            Box::new(|c| c.com_gain = 99.0),
            Box::new(|c| c.posture_gain = 99.0),
            Box::new(|c| c.feet_gain = 99.0),
            Box::new(|c| c.square_side = 0.2),
            Box::new(|c| c.square_period = 3.0),
            Box::new(|c| c.duration = 5.0),
            Box::new(|c| c.seed = 1),
            Box::new(|c| c.weights.hand = 1.0),
            Box::new(|c| c.weights.com = 1.0),
            Box::new(|c| c.weights.posture_arm = 2.0),
            Box::new(|c| c.weights.posture_other = 2.0),
            Box::new(|c| c.weights.force = 2.0),
            Box::new(|c| c.damper.xi = 2.0),
            Box::new(|c| c.damper.influence = 0.3),
            Box::new(|c| c.damper.safety = 0.03),
            Box::new(|c| c.solver.tol_c = 1e-9),
            Box::new(|c| c.solver.tol_d = 1e-11),
            Box::new(|c| c.solver.max_iter = 10),
            Box::new(|c| c.solver.warm_start = true),
            Box::new(|c| c.solver.refactor_threshold = 3),
        ];
        let mut seen = std::collections::HashSet::new();
        seen.insert(h0.clone());
        for v in &variants {
            let mut c = base.clone();
            v(&mut c);
            assert!(seen.insert(config_hash(&c)), "{c:?}");
        }
    }
}
