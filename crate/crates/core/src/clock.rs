//! Virtual/wall clock abstraction.
//!
//! Deterministic mode runs every component on a shared virtual clock that
//! only moves when the scenario driver advances it. Live mode reads the wall
//! clock. Millisecond timestamps are f64 so live-mode stage timings keep
//! sub-millisecond resolution.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone)]
pub enum Clock {
    /// Simulation time in milliseconds, advanced explicitly.
    Virtual(Arc<AtomicU64>),
    /// Wall time, measured from creation.
    Wall(Instant),
}

impl Clock {
    pub fn virtual_clock() -> Clock {
        Clock::Virtual(Arc::new(AtomicU64::new(0)))
    }

    pub fn wall_clock() -> Clock {
        Clock::Wall(Instant::now())
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Clock::Virtual(_))
    }

    /// Current time in milliseconds.
    pub fn now_ms(&self) -> f64 {
        match self {
            Clock::Virtual(t) => t.load(Ordering::Acquire) as f64,
            Clock::Wall(start) => start.elapsed().as_secs_f64() * 1e3,
        }
    }

    /// Advance a virtual clock; panics on a wall clock.
    pub fn advance_ms(&self, ms: u64) {
        match self {
            Clock::Virtual(t) => {
                t.fetch_add(ms, Ordering::AcqRel);
            }
            Clock::Wall(_) => panic!("cannot advance a wall clock"),
        }
    }
}
