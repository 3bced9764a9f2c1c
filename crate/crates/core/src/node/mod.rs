//! Per-tile agents: the DNP fault manager and the host fault manager.

mod dnp;
mod host;
mod link;
mod sensor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registers::{Axis, Direction, RegisterError};

pub use dnp::{DnpFaultManager, HostCheckOutcome, MAXHOPS_EXCEPTION_BIT};
pub use host::{DnpCheckOutcome, HostFaultManager};
pub use link::{LinkMonitor, DEFAULT_ERROR_THRESHOLD, DEFAULT_WINDOW};
pub use sensor::{classify_sensor, Quantity, SensorBlock, SensorLimits, SensorThresholds};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NodeError {
    #[error("no live links to relay on")]
    NoLiveLinks,
    #[error("diagnostic packet with {hops} hops exceeds maxhops {maxhops}")]
    HopLimitExceeded { hops: u32, maxhops: u32 },
    #[error("sensor thresholds {0:?} are not sorted")]
    InvalidThresholds([i32; 4]),
    #[error(transparent)]
    Register(#[from] RegisterError),
}

/// Torus extent along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct Dims {
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl From<[u32; 3]> for Dims {
    fn from([nx, ny, nz]: [u32; 3]) -> Self {
        Dims { nx, ny, nz }
    }
}

impl From<Dims> for [u32; 3] {
    fn from(d: Dims) -> Self {
        [d.nx, d.ny, d.nz]
    }
}

impl Dims {
    pub const fn new(nx: u32, ny: u32, nz: u32) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn node_count(&self) -> usize {
        self.nx as usize * self.ny as usize * self.nz as usize
    }

    pub fn contains(&self, c: NodeCoord) -> bool {
        c.x < self.nx && c.y < self.ny && c.z < self.nz
    }

    /// Dense index, x fastest.
    pub fn index(&self, c: NodeCoord) -> usize {
        debug_assert!(self.contains(c));
        (c.x + self.nx * (c.y + self.ny * c.z)) as usize
    }

    pub fn coord(&self, index: usize) -> NodeCoord {
        let i = index as u32;
        NodeCoord {
            x: i % self.nx,
            y: (i / self.nx) % self.ny,
            z: i / (self.nx * self.ny),
        }
    }

    pub fn coords(&self) -> impl Iterator<Item = NodeCoord> + '_ {
        (0..self.node_count()).map(|i| self.coord(i))
    }

    fn extent(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct NodeCoord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl From<[u32; 3]> for NodeCoord {
    fn from([x, y, z]: [u32; 3]) -> Self {
        NodeCoord { x, y, z }
    }
}

impl From<NodeCoord> for [u32; 3] {
    fn from(c: NodeCoord) -> Self {
        [c.x, c.y, c.z]
    }
}

impl NodeCoord {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        NodeCoord { x, y, z }
    }

    /// Neighbour one hop away along `dir`, wrapping around the torus.
    pub fn neighbor(self, dims: Dims, dir: Direction) -> NodeCoord {
        let n = dims.extent(dir.axis());
        let step = |v: u32| {
            if dir.is_positive() {
                (v + 1) % n
            } else {
                (v + n - 1) % n
            }
        };
        let mut c = self;
        match dir.axis() {
            Axis::X => c.x = step(c.x),
            Axis::Y => c.y = step(c.y),
            Axis::Z => c.z = step(c.z),
        }
        c
    }

    pub fn neighbors(self, dims: Dims) -> [NodeCoord; 6] {
        Direction::ALL.map(|d| self.neighbor(dims, d))
    }
}

impl fmt::Display for NodeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

impl FromStr for NodeCoord {
    type Err = String;

    /// Accepts `(x,y,z)` or `x,y,z`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected x,y,z, got {s:?}"));
        }
        let parse = |p: &str| p.parse::<u32>().map_err(|e| format!("{s:?}: {e}"));
        Ok(NodeCoord::new(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
    }
}

/// Periods and tolerance of one watchdog pair, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatchdogTiming {
    pub write_period: u64,
    pub read_period: u64,
    pub miss_tolerance: u32,
}

impl Default for WatchdogTiming {
    fn default() -> Self {
        WatchdogTiming {
            write_period: 5,
            read_period: 12,
            miss_tolerance: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_wraps() {
        let dims = Dims::new(3, 3, 3);
        let origin = NodeCoord::new(0, 0, 0);
        assert_eq!(origin.neighbor(dims, Direction::XMinus), NodeCoord::new(2, 0, 0));
        assert_eq!(origin.neighbor(dims, Direction::ZPlus), NodeCoord::new(0, 0, 1));
        let corner = NodeCoord::new(2, 2, 2);
        assert_eq!(corner.neighbor(dims, Direction::YPlus), NodeCoord::new(2, 0, 2));
    }

    #[test]
    fn neighbor_symmetric_under_reversal() {
        for dims in [Dims::new(1, 2, 3), Dims::new(4, 4, 4), Dims::new(5, 1, 2)] {
            for c in dims.coords() {
                for d in Direction::ALL {
                    let n = c.neighbor(dims, d);
                    assert!(dims.contains(n));
                    assert_eq!(n.neighbor(dims, d.opposite()), c);
                }
            }
        }
    }

    #[test]
    fn index_roundtrip() {
        let dims = Dims::new(3, 4, 5);
        for i in 0..dims.node_count() {
            assert_eq!(dims.index(dims.coord(i)), i);
        }
    }

    #[test]
    fn coord_parse() {
        assert_eq!("(1,2,3)".parse::<NodeCoord>().unwrap(), NodeCoord::new(1, 2, 3));
        assert_eq!("1, 2, 3".parse::<NodeCoord>().unwrap(), NodeCoord::new(1, 2, 3));
        assert!("1,2".parse::<NodeCoord>().is_err());
    }
}
