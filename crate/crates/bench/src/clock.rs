use std::time::Instant;

use wbc_core::sim::{Clock, NullClock};

/// Monotonic wall clock starting at construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock {
    origin: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        WallClock { origin: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Timing source selected on the command line. `None` zeroes every timing
/// column so outputs are reproducible byte for byte.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum ClockKind {
    #[default]
    Wall,
    None,
}

impl ClockKind {
    pub fn make(self) -> Box<dyn Clock> {
        match self {
            ClockKind::Wall => Box::new(WallClock::default()),
            ClockKind::None => Box::new(NullClock),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClockKind::Wall => "wall",
            ClockKind::None => "none",
        }
    }
}
