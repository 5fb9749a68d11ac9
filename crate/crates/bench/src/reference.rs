//! Reported HRP-4 values, kept for documentation and comparison only. They
//! are not defaults for the planar model, whose gains come from the tuner.

/// A row of the HRP-4 tuning table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hrp4TuningRow {
    pub frequency: f64,
    pub hand_gain: f64,
    pub update_ratio: usize,
    pub update_frequency: f64,
}

pub const HRP4_TUNING: [Hrp4TuningRow; 5] = [
    Hrp4TuningRow { frequency: 200.0, hand_gain: 18000.0, update_ratio: 20, update_frequency: 10.0 },
    Hrp4TuningRow { frequency: 150.0, hand_gain: 10000.0, update_ratio: 15, update_frequency: 10.0 },
    Hrp4TuningRow { frequency: 100.0, hand_gain: 4000.0, update_ratio: 11, update_frequency: 9.1 },
    Hrp4TuningRow { frequency: 50.0, hand_gain: 1150.0, update_ratio: 5, update_frequency: 10.0 },
    Hrp4TuningRow { frequency: 25.0, hand_gain: 280.0, update_ratio: 3, update_frequency: 8.3 },
];

/// HRP-4 solver time per simulated second [ms]: standard setting and the
/// cheapest retuned setting.
pub const HRP4_SOLVER_MS_STANDARD: f64 = 62.5;
pub const HRP4_SOLVER_MS_RETUNED: f64 = 2.8;

/// Accuracy thresholds shared with the planar metrics.
pub const THRESHOLD_HAND_POSITION: f64 = 1e-3;
pub const THRESHOLD_HAND_ORIENTATION: f64 = 1e-3;
pub const THRESHOLD_COM: f64 = 1e-2;
pub const THRESHOLD_POSTURE: f64 = 1e-2;
