//! Time source for cooperative time limits.
//!
//! The core has no access to a system clock. Drivers take a `&dyn Clock`
//! and compare [`Clock::elapsed`] against their time limit at iteration
//! boundaries.

/// Seconds elapsed since the start of a run.
pub trait Clock {
    fn elapsed(&self) -> f64;
}

/// A clock that never advances. Runs driven by it are fully reproducible,
/// including the timing columns of their telemetry.
#[derive(Debug, Default, Clone, Copy)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn elapsed(&self) -> f64 {
        0.0
    }
}

impl<F: Fn() -> f64> Clock for F {
    fn elapsed(&self) -> f64 {
        self()
    }
}
