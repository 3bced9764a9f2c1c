//! LO|FA|MO fault-awareness simulator.
//!
//! Every tile of a 3D torus pairs a host with a DNP; each side keeps a
//! watchdog register the other side polls and invalidates. Local detections
//! travel to a central supervisor over a service network, or over the mesh
//! through a neighbour when the local host cannot speak for itself.

pub mod network;
pub mod node;
pub mod registers;
pub mod sim;
pub mod supervisor;

pub use network::{DiagnosticPacket, FaultEvent, FaultKind, NetworkError, OriginKind};
pub use node::{Dims, NodeCoord, Quantity};
pub use registers::{
    AlertState, CoreStatus, Direction, DnpWatchdogRegister, HostComponent, HostRemoteFaultDescriptor,
    HostWatchdogRegister, RegisterError, TriState,
};
pub use sim::{run, Scenario, SimError};
pub use supervisor::{Component, DiagnosticPath, HealthMap, HealthStatus, Inference, Report, SystemHealthReport};
