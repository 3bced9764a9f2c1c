//! The two fabrics: the 3D torus mesh between DNPs and the star-shaped
//! service network from hosts to the fault supervisor.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{Dims, NodeCoord, Quantity};
use crate::registers::{Direction, HostComponent, RemoteHostFault, TriState};
use crate::supervisor::Report;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("fault target {0} is outside the torus")]
    UnknownTarget(NodeCoord),
    #[error("host at {0} is down and cannot send")]
    SenderDown(NodeCoord),
    #[error("fault event at t={time} is in the past (now {now})")]
    EventInPast { time: u64, now: u64 },
    #[error("invalid fault parameter: {0}")]
    InvalidParameter(String),
}

/// What a diagnostic packet says about its source node's host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OriginKind {
    HostTotalBreakdown,
    HostComponentFault(RemoteHostFault),
    AllClear,
}

impl fmt::Display for OriginKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OriginKind::HostTotalBreakdown => f.write_str("host-breakdown"),
            OriginKind::HostComponentFault(d) => write!(f, "host-component:{:x}", d.nibble()),
            OriginKind::AllClear => f.write_str("all-clear"),
        }
    }
}

/// Host fault report carried over the mesh from a DNP to its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagnosticPacket {
    pub src: NodeCoord,
    pub origin: OriginKind,
    pub hops: u32,
    pub timestamp: u64,
}

impl DiagnosticPacket {
    pub fn new(src: NodeCoord, origin: OriginKind, timestamp: u64) -> Self {
        DiagnosticPacket {
            src,
            origin,
            hops: 0,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum LinkState {
    #[default]
    Normal,
    Sick {
        error_rate: f64,
    },
    Broken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    Delivered { at: u64 },
    Corrupted,
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeshStats {
    pub sent: u64,
    pub delivered: u64,
    pub corrupted: u64,
    pub dropped: u64,
}

/// 3D torus of DNPs.
///
/// Each directed edge `(node, dir)` is a separate failable entity. A cable
/// cut breaks both directions; a one-sided link logic failure kills one
/// port, which only the far end can notice.
#[derive(Debug, Clone)]
pub struct TorusTopology {
    dims: Dims,
    latency: u64,
    edges: Vec<LinkState>,
    port_dead: Vec<bool>,
    silent: Vec<bool>,
    stats: MeshStats,
}

impl TorusTopology {
    pub fn new(dims: Dims, latency: u64) -> Self {
        let ports = dims.node_count() * 6;
        TorusTopology {
            dims,
            latency,
            edges: vec![LinkState::Normal; ports],
            port_dead: vec![false; ports],
            silent: vec![false; dims.node_count()],
            stats: MeshStats::default(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn latency(&self) -> u64 {
        self.latency
    }

    pub fn stats(&self) -> MeshStats {
        self.stats
    }

    fn port(&self, at: NodeCoord, dir: Direction) -> usize {
        self.dims.index(at) * 6 + dir.index()
    }

    fn check(&self, at: NodeCoord) -> Result<(), NetworkError> {
        if self.dims.contains(at) {
            Ok(())
        } else {
            Err(NetworkError::UnknownTarget(at))
        }
    }

    pub fn set_sick(&mut self, from: NodeCoord, dir: Direction, error_rate: f64) -> Result<(), NetworkError> {
        self.check(from)?;
        if !(0.0..=1.0).contains(&error_rate) {
            return Err(NetworkError::InvalidParameter(format!("error rate {error_rate}")));
        }
        let p = self.port(from, dir);
        self.edges[p] = LinkState::Sick { error_rate };
        Ok(())
    }

    pub fn cut_cable(&mut self, at: NodeCoord, dir: Direction) -> Result<(), NetworkError> {
        self.check(at)?;
        let peer = at.neighbor(self.dims, dir);
        let (a, b) = (self.port(at, dir), self.port(peer, dir.opposite()));
        self.edges[a] = LinkState::Broken;
        self.edges[b] = LinkState::Broken;
        Ok(())
    }

    pub fn fail_port_logic(&mut self, at: NodeCoord, dir: Direction) -> Result<(), NetworkError> {
        self.check(at)?;
        let p = self.port(at, dir);
        self.port_dead[p] = true;
        Ok(())
    }

    /// The DNP at `at` stops all link activity.
    pub fn silence(&mut self, at: NodeCoord) -> Result<(), NetworkError> {
        self.check(at)?;
        let i = self.dims.index(at);
        self.silent[i] = true;
        Ok(())
    }

    pub fn is_silent(&self, at: NodeCoord) -> bool {
        self.silent[self.dims.index(at)]
    }

    pub fn port_functional(&self, at: NodeCoord, dir: Direction) -> bool {
        !self.port_dead[self.port(at, dir)]
    }

    /// Effective state of the directed edge leaving `from` along `dir`.
    pub fn link_state(&self, from: NodeCoord, dir: Direction) -> LinkState {
        let peer = from.neighbor(self.dims, dir);
        let dead = self.port_dead[self.port(from, dir)]
            || self.port_dead[self.port(peer, dir.opposite())]
            || self.is_silent(from)
            || self.is_silent(peer);
        if dead {
            LinkState::Broken
        } else {
            self.edges[self.port(from, dir)]
        }
    }

    /// State of the traffic arriving at `at` through port `dir`.
    pub fn incoming_state(&self, at: NodeCoord, dir: Direction) -> LinkState {
        self.link_state(at.neighbor(self.dims, dir), dir.opposite())
    }

    /// Whether the RX/TX handshake on port `dir` of `at` still completes.
    pub fn handshake_alive(&self, at: NodeCoord, dir: Direction) -> bool {
        let peer = at.neighbor(self.dims, dir);
        let cut = self.edges[self.port(at, dir)] == LinkState::Broken
            || self.edges[self.port(peer, dir.opposite())] == LinkState::Broken;
        !cut && !self.port_dead[self.port(peer, dir.opposite())] && !self.is_silent(peer)
    }

    /// Sends one packet across a single hop. Every call resolves to exactly
    /// one outcome; delivered and corrupted packets have traversed the link.
    pub fn mesh_send<R: Rng + ?Sized>(
        &mut self,
        from: NodeCoord,
        dir: Direction,
        pkt: &mut DiagnosticPacket,
        now: u64,
        rng: &mut R,
    ) -> DeliveryOutcome {
        self.stats.sent += 1;
        let outcome = match self.link_state(from, dir) {
            LinkState::Broken => DeliveryOutcome::Dropped,
            LinkState::Sick { error_rate } if rng.random_bool(error_rate) => DeliveryOutcome::Corrupted,
            LinkState::Sick { .. } | LinkState::Normal => DeliveryOutcome::Delivered { at: now + self.latency },
        };
        match outcome {
            DeliveryOutcome::Dropped => self.stats.dropped += 1,
            DeliveryOutcome::Corrupted => {
                pkt.hops += 1;
                self.stats.corrupted += 1;
            }
            DeliveryOutcome::Delivered { .. } => {
                pkt.hops += 1;
                self.stats.delivered += 1;
            }
        }
        outcome
    }
}

/// Star network from every host to the supervisor, one cut switch per node.
#[derive(Debug, Clone)]
pub struct ServiceNetwork {
    dims: Dims,
    latency: u64,
    link_up: Vec<bool>,
    host_alive: Vec<bool>,
    log: Vec<Report>,
}

impl ServiceNetwork {
    pub fn new(dims: Dims, latency: u64) -> Self {
        ServiceNetwork {
            dims,
            latency,
            link_up: vec![true; dims.node_count()],
            host_alive: vec![true; dims.node_count()],
            log: Vec::new(),
        }
    }

    pub fn latency(&self) -> u64 {
        self.latency
    }

    pub fn cut(&mut self, at: NodeCoord) -> Result<(), NetworkError> {
        if !self.dims.contains(at) {
            return Err(NetworkError::UnknownTarget(at));
        }
        self.link_up[self.dims.index(at)] = false;
        Ok(())
    }

    pub fn host_down(&mut self, at: NodeCoord) -> Result<(), NetworkError> {
        if !self.dims.contains(at) {
            return Err(NetworkError::UnknownTarget(at));
        }
        self.host_alive[self.dims.index(at)] = false;
        Ok(())
    }

    pub fn is_up(&self, at: NodeCoord) -> bool {
        self.link_up[self.dims.index(at)]
    }

    /// Reports accepted for delivery, in send order.
    pub fn log(&self) -> &[Report] {
        &self.log
    }

    pub fn service_send(&mut self, from: NodeCoord, report: Report, now: u64) -> Result<DeliveryOutcome, NetworkError> {
        if !self.dims.contains(from) {
            return Err(NetworkError::UnknownTarget(from));
        }
        let i = self.dims.index(from);
        if !self.host_alive[i] {
            return Err(NetworkError::SenderDown(from));
        }
        if !self.link_up[i] {
            return Ok(DeliveryOutcome::Dropped);
        }
        self.log.push(report);
        Ok(DeliveryOutcome::Delivered { at: now + self.latency })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreException {
    Router,
    #[default]
    Rdma,
    Engine,
}

impl CoreException {
    pub fn address(self) -> u32 {
        use crate::registers::{ENGINE_EXCEPTIONS_ADDR, RDMA_EXCEPTIONS_ADDR, ROUTER_EXCEPTIONS_ADDR};
        match self {
            CoreException::Router => ROUTER_EXCEPTIONS_ADDR,
            CoreException::Rdma => RDMA_EXCEPTIONS_ADDR,
            CoreException::Engine => ENGINE_EXCEPTIONS_ADDR,
        }
    }
}

/// Injectable faults. Downstream behaviour emerges from the agents; an
/// injection only flips the targeted element's state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultKind {
    /// Traffic leaving the node along `dir` is corrupted at `error_rate`.
    LinkSick {
        dir: Direction,
        error_rate: f64,
    },
    /// Both directions of the cable are severed.
    LinkCableCut {
        dir: Direction,
    },
    /// The node's own port logic on `dir` dies; only the far end notices.
    LinkLogicFailure {
        dir: Direction,
    },
    Sensor {
        quantity: Quantity,
        value: i32,
    },
    CoreSick {
        #[serde(default)]
        exception: CoreException,
    },
    CoreMeltdown,
    HostComponent {
        component: HostComponent,
        status: TriState,
    },
    HostBreakdown,
    ServiceLinkCut,
    /// Host breakdown and DNP meltdown at once.
    NodeKill,
}

impl FaultKind {
    pub fn label(&self) -> &'static str {
        match self {
            FaultKind::LinkSick { .. } => "link-sick",
            FaultKind::LinkCableCut { .. } => "link-cable-cut",
            FaultKind::LinkLogicFailure { .. } => "link-logic-failure",
            FaultKind::Sensor { .. } => "sensor",
            FaultKind::CoreSick { .. } => "core-sick",
            FaultKind::CoreMeltdown => "core-meltdown",
            FaultKind::HostComponent { .. } => "host-component",
            FaultKind::HostBreakdown => "host-breakdown",
            FaultKind::ServiceLinkCut => "service-link-cut",
            FaultKind::NodeKill => "node-kill",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub time: u64,
    pub node: NodeCoord,
    #[serde(flatten)]
    pub kind: FaultKind,
}

impl FaultEvent {
    pub fn new(time: u64, node: NodeCoord, kind: FaultKind) -> Self {
        FaultEvent { time, node, kind }
    }
}

/// Applies a fault to a running world. See [`crate::sim::World::inject_fault`].
pub fn inject_fault(world: &mut crate::sim::World, event: &FaultEvent) -> Result<(), NetworkError> {
    world.inject_fault(event)
}
