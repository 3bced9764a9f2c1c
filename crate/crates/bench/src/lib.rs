//! Shared fixtures for the benchmarks.

use lofamo::{Dims, FaultEvent, FaultKind, NodeCoord, Scenario};

/// Fault-free scenario on an `n`-cube.
pub fn quiet_cube(n: u32, duration: u64, seed: u64) -> Scenario {
    Scenario::new(Dims::new(n, n, n), duration, seed)
}

/// Host breakdown at the centre of an `n`-cube, 100 ticks in.
pub fn host_breakdown_cube(n: u32, duration: u64, seed: u64) -> Scenario {
    let sc = quiet_cube(n, duration, seed);
    let center = sc.center();
    sc.with_fault(FaultEvent::new(100, center, FaultKind::HostBreakdown))
}

pub fn origin() -> NodeCoord {
    NodeCoord::new(0, 0, 0)
}
