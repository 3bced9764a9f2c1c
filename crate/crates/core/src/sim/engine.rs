use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::scenario::Scenario;
use super::trace::{Trace, TraceEvent, END_KIND};
use super::SimError;
use crate::network::{
    DeliveryOutcome, DiagnosticPacket, FaultEvent, FaultKind, LinkState, MeshStats, NetworkError, ServiceNetwork,
    TorusTopology,
};
use crate::node::{
    Dims, DnpCheckOutcome, DnpFaultManager, HostCheckOutcome, HostFaultManager, NodeCoord, NodeError, SensorLimits,
};
use crate::registers::{Direction, HostComponent, TriState};
use crate::supervisor::{
    Component, DiagnosticPath, HealthMap, HealthStatus, Inference, Report, ReportKind, SystemHealthReport, Update,
};

/// Bit raised in the targeted exception register by a core-sick fault.
const INJECTED_EXCEPTION_BIT: u32 = 1 << 1;

#[derive(Debug, Clone, Copy)]
enum Action {
    Inject(usize),
    MeshArrive {
        to: NodeCoord,
        port: Direction,
        pkt: DiagnosticPacket,
        corrupted: bool,
    },
    ServiceArrive(Report),
    DnpWrite,
    HostWrite,
    DnpRead,
    HostRead,
    Heartbeat,
    Sweep,
}

impl Action {
    const fn rank(&self) -> u8 {
        match self {
            Action::Inject(_) => 0,
            Action::MeshArrive { .. } => 1,
            Action::ServiceArrive(_) => 2,
            Action::DnpWrite => 3,
            Action::HostWrite => 4,
            Action::DnpRead => 5,
            Action::HostRead => 6,
            Action::Heartbeat => 7,
            Action::Sweep => 8,
        }
    }
}

/// Queue entry. Ordered by (time, entity, kind rank, insertion order),
/// smallest first.
#[derive(Debug, Clone, Copy)]
struct Event {
    time: u64,
    entity: usize,
    seq: u64,
    action: Action,
}

impl Event {
    fn key(&self) -> (u64, usize, u8, u64) {
        (self.time, self.entity, self.action.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Stale DNP-side reads of the host register before any declaration.
    pub dnp_misses: u64,
    /// Stale host-side reads of the DNP register before any declaration.
    pub host_misses: u64,
    pub dnp_declarations: u64,
    pub host_declarations: u64,
    pub service_drops: u64,
    pub mesh: MeshStats,
    pub events: u64,
}

/// What the supervisor must eventually learn about one injected fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    /// Any of these (subject, component) entries reaching `status` counts.
    pub candidates: Vec<(NodeCoord, Component)>,
    pub status: HealthStatus,
    pub path: DiagnosticPath,
}

/// The map entry a single fault is expected to produce, or `None` when the
/// fault is not observable (e.g. a sensor value inside the normal zone).
pub fn expected_awareness(dims: Dims, ev: &FaultEvent, sc: &Scenario) -> Option<Expectation> {
    let n = ev.node;
    let limits = sc.protocol.limits().unwrap_or_default();
    let dnp = DiagnosticPath::DnpFmHostService;
    let (candidates, status, path) = match ev.kind {
        FaultKind::LinkSick { dir, error_rate } => {
            if error_rate <= sc.protocol.link_error_threshold {
                return None;
            }
            (
                vec![(n.neighbor(dims, dir), Component::Link(dir.opposite()))],
                HealthStatus::Sick,
                dnp,
            )
        }
        FaultKind::LinkCableCut { dir } => (
            vec![
                (n, Component::Link(dir)),
                (n.neighbor(dims, dir), Component::Link(dir.opposite())),
            ],
            HealthStatus::Broken,
            dnp,
        ),
        FaultKind::LinkLogicFailure { dir } => (
            vec![(n.neighbor(dims, dir), Component::Link(dir.opposite()))],
            HealthStatus::Broken,
            dnp,
        ),
        FaultKind::Sensor { quantity, value } => {
            let status: HealthStatus = limits.get(quantity).classify(value).into();
            if status == HealthStatus::Normal {
                return None;
            }
            (vec![(n, Component::Sensor(quantity))], status, dnp)
        }
        FaultKind::CoreSick { .. } => (
            vec![(n, Component::DnpCore)],
            HealthStatus::Sick,
            DiagnosticPath::HostService,
        ),
        FaultKind::CoreMeltdown => (
            vec![(n, Component::DnpCore)],
            HealthStatus::Down,
            DiagnosticPath::HostService,
        ),
        FaultKind::HostComponent { component, status } => {
            let path = if component == HostComponent::ServiceNet && status == TriState::Broken {
                DiagnosticPath::MeshRelay
            } else {
                DiagnosticPath::HostService
            };
            if status == TriState::Normal {
                return None;
            }
            (vec![(n, Component::HostPart(component))], status.into(), path)
        }
        FaultKind::HostBreakdown => (
            vec![(n, Component::Host)],
            HealthStatus::Down,
            DiagnosticPath::MeshRelay,
        ),
        FaultKind::ServiceLinkCut => (
            vec![(n, Component::HostPart(HostComponent::ServiceNet))],
            HealthStatus::Broken,
            DiagnosticPath::MeshRelay,
        ),
        FaultKind::NodeKill => {
            let c = Direction::ALL
                .into_iter()
                .map(|d| (n.neighbor(dims, d), Component::Link(d.opposite())))
                .filter(|(r, _)| *r != n)
                .collect();
            (c, HealthStatus::Broken, dnp)
        }
    };
    Some(Expectation {
        candidates,
        status,
        path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Awareness {
    pub fault: usize,
    pub event: FaultEvent,
    pub expected: Option<Expectation>,
    /// Injection-to-map latency and the path the matching entry took.
    pub observed: Option<(u64, DiagnosticPath)>,
}

impl Awareness {
    pub fn latency(&self) -> Option<u64> {
        self.observed.map(|(l, _)| l)
    }

    pub fn path(&self) -> Option<DiagnosticPath> {
        self.observed.map(|(_, p)| p)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: SystemHealthReport,
    pub stats: RunStats,
    pub awareness: Vec<Awareness>,
}

fn entity_dnp(c: NodeCoord) -> String {
    format!("dnp{c}")
}

fn entity_host(c: NodeCoord) -> String {
    format!("host{c}")
}

fn report_label(kind: &ReportKind) -> String {
    match kind.assertion() {
        Some((c, s)) => format!("{c}:{s}"),
        None => "heartbeat".into(),
    }
}

fn check_fault(dims: Dims, ev: &FaultEvent) -> Result<(), NetworkError> {
    if !dims.contains(ev.node) {
        return Err(NetworkError::UnknownTarget(ev.node));
    }
    match ev.kind {
        FaultKind::LinkSick { error_rate, .. } if !(0.0..=1.0).contains(&error_rate) => {
            Err(NetworkError::InvalidParameter(format!("error rate {error_rate}")))
        }
        FaultKind::Sensor { quantity, value } => {
            let fits = match quantity {
                crate::node::Quantity::Temperature => crate::registers::temp_encode(value).is_ok(),
                _ => (0..=255).contains(&value),
            };
            if fits {
                Ok(())
            } else {
                Err(NetworkError::InvalidParameter(format!("{quantity} value {value}")))
            }
        }
        _ => Ok(()),
    }
}

/// A complete simulated machine: agents, both fabrics and the supervisor.
pub struct World {
    scenario: Scenario,
    dims: Dims,
    now: u64,
    dnps: Vec<DnpFaultManager>,
    hosts: Vec<HostFaultManager>,
    host_alive: Vec<bool>,
    last_sample: Vec<u64>,
    topology: TorusTopology,
    service: ServiceNetwork,
    supervisor: HealthMap,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Event>,
    seq: u64,
    trace: Trace,
    stats: RunStats,
    faults: Vec<FaultEvent>,
    awareness: Vec<Awareness>,
    inferred: BTreeMap<NodeCoord, bool>,
}

impl World {
    pub fn new(sc: &Scenario) -> Result<Self, SimError> {
        let violations = sc.validate();
        if !violations.is_empty() {
            return Err(SimError::Invalid(violations));
        }
        let p = &sc.protocol;
        let dims = sc.dims;
        let limits: SensorLimits = p.limits().expect("validated thresholds");
        let mut dnps = Vec::with_capacity(dims.node_count());
        let mut hosts = Vec::with_capacity(dims.node_count());
        for c in dims.coords() {
            let mut dnp = DnpFaultManager::new(c, p.dnp_timing());
            dnp.regfile.set_strict(p.strict_masks);
            dnp.set_limits(limits).map_err(|e| SimError::Node(c, e))?;
            dnp.set_maxhops(p.maxhops).map_err(|e| SimError::Node(c, e))?;
            dnp.configure_links(p.link_error_threshold, p.link_window);
            dnps.push(dnp);
            hosts.push(HostFaultManager::new(c, c.neighbors(dims), p.host_timing()));
        }
        let mut world = World {
            scenario: sc.clone(),
            dims,
            now: 0,
            dnps,
            hosts,
            host_alive: vec![true; dims.node_count()],
            last_sample: vec![0; dims.node_count()],
            topology: TorusTopology::new(dims, p.mesh_latency),
            service: ServiceNetwork::new(dims, p.service_latency),
            supervisor: HealthMap::new(dims, p.heartbeat_timeout()),
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            queue: BinaryHeap::new(),
            seq: 0,
            trace: Trace::default(),
            stats: RunStats::default(),
            faults: Vec::new(),
            awareness: Vec::new(),
            inferred: BTreeMap::new(),
        };
        world.schedule_timers();
        for ev in &sc.faults {
            world.inject_fault(ev)?;
        }
        Ok(world)
    }

    /// Random phases per agent: writers start in `[0, T_write)`, readers
    /// one full write period later plus a phase in `[0, T_read)`.
    fn schedule_timers(&mut self) {
        let p = self.scenario.protocol;
        for i in 0..self.dims.node_count() {
            let dw = self.rng.random_range(0..p.dnp_write_period);
            let hw = self.rng.random_range(0..p.host_write_period);
            let dr = p.host_write_period + self.rng.random_range(0..p.dnp_read_period);
            let hr = p.dnp_write_period + self.rng.random_range(0..p.host_read_period);
            let hb = self.rng.random_range(0..p.heartbeat_period);
            self.schedule(dw, i, Action::DnpWrite);
            self.schedule(hw, i, Action::HostWrite);
            self.schedule(dr, i, Action::DnpRead);
            self.schedule(hr, i, Action::HostRead);
            self.schedule(hb, i, Action::Heartbeat);
        }
        let n = self.supervisor_entity();
        self.schedule(p.heartbeat_period, n, Action::Sweep);
    }

    fn supervisor_entity(&self) -> usize {
        self.dims.node_count()
    }

    fn schedule(&mut self, time: u64, entity: usize, action: Action) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            entity,
            seq: self.seq,
            action,
        });
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dnp(&self, c: NodeCoord) -> &DnpFaultManager {
        &self.dnps[self.dims.index(c)]
    }

    pub fn host(&self, c: NodeCoord) -> &HostFaultManager {
        &self.hosts[self.dims.index(c)]
    }

    pub fn supervisor(&self) -> &HealthMap {
        &self.supervisor
    }

    pub fn topology(&self) -> &TorusTopology {
        &self.topology
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            mesh: self.topology.stats(),
            ..self.stats
        }
    }

    /// Schedules a fault; it takes effect when simulated time reaches
    /// `event.time`.
    pub fn inject_fault(&mut self, event: &FaultEvent) -> Result<(), NetworkError> {
        if event.time < self.now {
            return Err(NetworkError::EventInPast {
                time: event.time,
                now: self.now,
            });
        }
        check_fault(self.dims, event)?;
        let idx = self.faults.len();
        self.faults.push(*event);
        self.awareness.push(Awareness {
            fault: idx,
            event: *event,
            expected: expected_awareness(self.dims, event, &self.scenario),
            observed: None,
        });
        let entity = self.dims.index(event.node);
        self.schedule(event.time, entity, Action::Inject(idx));
        Ok(())
    }

    /// Processes every event with time at or before `until`.
    pub fn run_until(&mut self, until: u64) {
        while self.queue.peek().is_some_and(|e| e.time <= until) {
            let ev = self.queue.pop().expect("peeked");
            self.now = ev.time;
            self.stats.events += 1;
            self.dispatch(ev);
        }
        self.now = self.now.max(until);
    }

    /// Runs to the scenario duration and closes the trace.
    pub fn finish(mut self) -> RunOutput {
        let end = self.scenario.duration;
        self.run_until(end);
        let report = self.supervisor.snapshot(end);
        let stats = self.stats();
        self.trace
            .push(TraceEvent::new(end, "engine", END_KIND).with("events", stats.events));
        RunOutput {
            trace: self.trace,
            report,
            stats,
            awareness: self.awareness,
        }
    }

    fn dispatch(&mut self, ev: Event) {
        let i = ev.entity;
        let p = self.scenario.protocol;
        match ev.action {
            Action::Inject(idx) => self.apply_fault(idx),
            Action::MeshArrive {
                to,
                port,
                pkt,
                corrupted,
            } => self.mesh_arrive(to, port, pkt, corrupted),
            Action::ServiceArrive(r) => self.service_arrive(r),
            Action::DnpWrite => {
                if self.dnps[i].is_melted() {
                    return;
                }
                self.sample_traffic(i);
                self.dnps[i].update_watchdog();
                self.schedule(self.now + p.dnp_write_period, i, Action::DnpWrite);
            }
            Action::DnpRead => {
                if self.dnps[i].is_melted() {
                    return;
                }
                self.dnp_read(i);
                self.schedule(self.now + p.dnp_read_period, i, Action::DnpRead);
            }
            Action::HostWrite => {
                if !self.host_alive[i] {
                    return;
                }
                let up = self.service.is_up(self.dims.coord(i));
                self.hosts[i].set_carrier(up);
                let reports = self.hosts[i].update_watchdog(&mut self.dnps[i].regfile, self.now);
                for r in reports {
                    self.send_report(i, r);
                }
                self.schedule(self.now + p.host_write_period, i, Action::HostWrite);
            }
            Action::HostRead => {
                if !self.host_alive[i] {
                    return;
                }
                self.host_read(i);
                self.schedule(self.now + p.host_read_period, i, Action::HostRead);
            }
            Action::Heartbeat => {
                if !self.host_alive[i] {
                    return;
                }
                let hb = self.hosts[i].heartbeat(self.now);
                self.send_report(i, hb);
                self.schedule(self.now + p.heartbeat_period, i, Action::Heartbeat);
            }
            Action::Sweep => {
                self.sweep();
                let n = self.supervisor_entity();
                self.schedule(self.now + p.heartbeat_period, n, Action::Sweep);
            }
        }
    }

    fn apply_fault(&mut self, idx: usize) {
        let ev = self.faults[idx];
        let c = ev.node;
        let i = self.dims.index(c);
        let mut rec = TraceEvent::new(self.now, "injector", "fault")
            .with("i", idx)
            .with("kind", ev.kind.label())
            .with("node", c);
        // parameters were checked when the fault was scheduled
        let applied: Result<(), NetworkError> = match ev.kind {
            FaultKind::LinkSick { dir, error_rate } => {
                rec = rec.with("dir", dir).with("error_rate", error_rate);
                self.topology.set_sick(c, dir, error_rate)
            }
            FaultKind::LinkCableCut { dir } => {
                rec = rec.with("dir", dir);
                self.topology.cut_cable(c, dir)
            }
            FaultKind::LinkLogicFailure { dir } => {
                rec = rec.with("dir", dir);
                self.topology.fail_port_logic(c, dir)
            }
            FaultKind::Sensor { quantity, value } => {
                rec = rec.with("quantity", quantity).with("value", value);
                self.dnps[i]
                    .set_sensor(quantity, value)
                    .map_err(|e| NetworkError::InvalidParameter(e.to_string()))
            }
            FaultKind::CoreSick { exception } => {
                rec = rec.with("exception", format!("{exception:?}").to_lowercase());
                self.dnps[i]
                    .raise_exception(exception.address(), INJECTED_EXCEPTION_BIT)
                    .map_err(|e| NetworkError::InvalidParameter(e.to_string()))
            }
            FaultKind::CoreMeltdown => self.melt(i),
            FaultKind::HostComponent { component, status } => {
                rec = rec.with("component", component.label()).with("status", status.label());
                self.hosts[i].set_component(component, status);
                Ok(())
            }
            FaultKind::HostBreakdown => self.kill_host(i),
            FaultKind::ServiceLinkCut => self.service.cut(c),
            FaultKind::NodeKill => self.kill_host(i).and_then(|_| self.melt(i)),
        };
        self.trace.push(rec);
        if let Err(e) = applied {
            self.trace.push(
                TraceEvent::new(self.now, "injector", "fault.rejected")
                    .with("i", idx)
                    .with("reason", e),
            );
        }
    }

    fn melt(&mut self, i: usize) -> Result<(), NetworkError> {
        self.dnps[i].melt_down();
        self.topology.silence(self.dims.coord(i))
    }

    fn kill_host(&mut self, i: usize) -> Result<(), NetworkError> {
        self.host_alive[i] = false;
        self.service.host_down(self.dims.coord(i))
    }

    /// Background traffic since the previous sample, fed to every live
    /// receive port. A dead local port freezes its monitor.
    fn sample_traffic(&mut self, i: usize) {
        let c = self.dims.coord(i);
        let elapsed = self.now - self.last_sample[i];
        self.last_sample[i] = self.now;
        let packets =
            u32::try_from(elapsed.saturating_mul(self.scenario.protocol.traffic_per_tick as u64)).unwrap_or(u32::MAX);
        for d in Direction::ALL {
            if !self.topology.port_functional(c, d) {
                continue;
            }
            let alive = self.topology.handshake_alive(c, d);
            let state = self.topology.incoming_state(c, d);
            let mon = &mut self.dnps[i].link_monitors[d.index()];
            mon.handshake_alive = alive;
            match state {
                LinkState::Normal => mon.record_good(packets),
                LinkState::Sick { error_rate } => {
                    for _ in 0..packets {
                        let bad = self.rng.random_bool(error_rate);
                        mon.record(1, bad);
                    }
                }
                LinkState::Broken => {}
            }
        }
    }

    fn dnp_read(&mut self, i: usize) {
        let c = self.dims.coord(i);
        let was_down = self.dnps[i].host_declared_down();
        let outcome = self.dnps[i].check_host();
        match outcome {
            HostCheckOutcome::Missed if !was_down => {
                self.stats.dnp_misses += 1;
                let n = self.dnps[i].consecutive_invalid_reads();
                self.trace
                    .push(TraceEvent::new(self.now, entity_dnp(c), "dnp.miss").with("count", n));
            }
            HostCheckOutcome::HostDeclaredDown => {
                self.stats.dnp_declarations += 1;
                self.trace
                    .push(TraceEvent::new(self.now, entity_dnp(c), "dnp.declare-host-down"));
            }
            _ => {}
        }
        let Some(origin) = self.dnps[i].relay_decision(&outcome) else {
            return;
        };
        match self.dnps[i].relay_host_fault(origin, self.now) {
            Ok(packets) => {
                for (dir, mut pkt) in packets {
                    self.mesh_send(c, dir, &mut pkt);
                }
            }
            Err(NodeError::NoLiveLinks) | Err(_) => {
                self.trace.push(
                    TraceEvent::new(self.now, entity_dnp(c), "mesh.drop")
                        .with("origin", origin)
                        .with("reason", "no-live-links"),
                );
            }
        }
    }

    fn mesh_send(&mut self, from: NodeCoord, dir: Direction, pkt: &mut DiagnosticPacket) {
        let to = from.neighbor(self.dims, dir);
        let outcome = self.topology.mesh_send(from, dir, pkt, self.now, &mut self.rng);
        let base = TraceEvent::new(self.now, entity_dnp(from), "mesh.send")
            .with("dir", dir)
            .with("to", to)
            .with("origin", pkt.origin);
        let port = dir.opposite();
        let arrive = self.now + self.topology.latency();
        let to_idx = self.dims.index(to);
        match outcome {
            DeliveryOutcome::Delivered { at } => {
                self.trace.push(base);
                self.schedule(
                    at,
                    to_idx,
                    Action::MeshArrive {
                        to,
                        port,
                        pkt: *pkt,
                        corrupted: false,
                    },
                );
            }
            DeliveryOutcome::Corrupted => {
                self.trace.push(base);
                self.schedule(
                    arrive,
                    to_idx,
                    Action::MeshArrive {
                        to,
                        port,
                        pkt: *pkt,
                        corrupted: true,
                    },
                );
            }
            DeliveryOutcome::Dropped => {
                self.trace.push(base);
                self.trace.push(
                    TraceEvent::new(self.now, entity_dnp(from), "mesh.drop")
                        .with("dir", dir)
                        .with("origin", pkt.origin)
                        .with("reason", "link-broken"),
                );
            }
        }
    }

    fn mesh_arrive(&mut self, to: NodeCoord, port: Direction, pkt: DiagnosticPacket, corrupted: bool) {
        let i = self.dims.index(to);
        if self.dnps[i].is_melted() {
            return;
        }
        if corrupted {
            self.dnps[i].receive_corrupted(port);
            self.trace.push(
                TraceEvent::new(self.now, entity_dnp(to), "mesh.corrupt")
                    .with("port", port)
                    .with("src", pkt.src),
            );
            return;
        }
        let rec = TraceEvent::new(self.now, entity_dnp(to), "mesh.deliver")
            .with("port", port)
            .with("src", pkt.src)
            .with("origin", pkt.origin)
            .with("hops", pkt.hops);
        self.trace.push(rec);
        if let Err(e) = self.dnps[i].receive_diagnostic(port, &pkt) {
            self.trace.push(
                TraceEvent::new(self.now, entity_dnp(to), "mesh.reject")
                    .with("src", pkt.src)
                    .with("reason", e),
            );
        }
    }

    fn host_read(&mut self, i: usize) {
        let c = self.dims.coord(i);
        let was_down = self.hosts[i].dnp_declared_down();
        let (outcome, reports) = self.hosts[i].poll_dnp(&mut self.dnps[i].regfile, self.now);
        match outcome {
            DnpCheckOutcome::Missed if !was_down => {
                self.stats.host_misses += 1;
                let n = self.hosts[i].consecutive_invalid_reads();
                self.trace
                    .push(TraceEvent::new(self.now, entity_host(c), "host.miss").with("count", n));
            }
            DnpCheckOutcome::DnpDeclaredDown => {
                self.stats.host_declarations += 1;
                self.trace
                    .push(TraceEvent::new(self.now, entity_host(c), "host.declare-dnp-down"));
            }
            _ => {}
        }
        for r in reports {
            self.send_report(i, r);
        }
    }

    fn send_report(&mut self, i: usize, r: Report) {
        let c = self.dims.coord(i);
        let heartbeat = r.kind == ReportKind::Heartbeat;
        let drop = |w: &mut World, reason: &str| {
            w.stats.service_drops += 1;
            if !heartbeat {
                w.trace.push(
                    TraceEvent::new(w.now, entity_host(c), "service.drop")
                        .with("subject", r.subject)
                        .with("report", report_label(&r.kind))
                        .with("reason", reason),
                );
            }
        };
        if !self.hosts[i].can_use_service_net() {
            drop(self, "nic-broken");
            return;
        }
        match self.service.service_send(c, r, self.now) {
            Ok(DeliveryOutcome::Delivered { at }) => {
                if !heartbeat {
                    self.trace.push(
                        TraceEvent::new(self.now, entity_host(c), "service.send")
                            .with("subject", r.subject)
                            .with("report", report_label(&r.kind))
                            .with("via", r.via.label()),
                    );
                }
                let n = self.supervisor_entity();
                self.schedule(at, n, Action::ServiceArrive(r));
            }
            Ok(_) => drop(self, "link-cut"),
            Err(_) => drop(self, "sender-down"),
        }
    }

    fn service_arrive(&mut self, r: Report) {
        let Some(up) = self.supervisor.ingest(r) else {
            return;
        };
        self.trace.push(
            TraceEvent::new(self.now, "supervisor", "supervisor.update")
                .with("node", up.subject)
                .with("component", up.component)
                .with("status", up.entry.status)
                .with("path", up.entry.provenance.path)
                .with("reporter", up.entry.provenance.reporter),
        );
        self.match_awareness(&up);
    }

    fn match_awareness(&mut self, up: &Update) {
        let now = self.now;
        for a in &mut self.awareness {
            let Some(exp) = &a.expected else { continue };
            if a.observed.is_some() || now < a.event.time {
                continue;
            }
            if exp.status == up.entry.status && exp.candidates.contains(&(up.subject, up.component)) {
                let latency = now - a.event.time;
                let path = up.entry.provenance.path;
                a.observed = Some((latency, path));
                self.trace.push(
                    TraceEvent::new(now, "supervisor", "awareness")
                        .with("fault", a.fault)
                        .with("kind", a.event.kind.label())
                        .with("node", a.event.node)
                        .with("latency", latency)
                        .with("path", path),
                );
            }
        }
    }

    fn sweep(&mut self) {
        let inferences = self.supervisor.infer(self.now);
        let mut current = BTreeMap::new();
        for inf in inferences {
            let dead = inf.is_dead();
            current.insert(inf.node(), dead);
            if self.inferred.get(&inf.node()) == Some(&dead) {
                continue;
            }
            let mut rec = TraceEvent::new(self.now, "supervisor", "inference").with("node", inf.node());
            rec = match &inf {
                Inference::NodeDead { evidence, .. } => {
                    let ev: Vec<String> = evidence.iter().map(ToString::to_string).collect();
                    rec.with("verdict", "DEAD").with("evidence", ev.join(","))
                }
                Inference::SilentNode { .. } => rec.with("verdict", "SILENT"),
            };
            self.trace.push(rec);
        }
        self.inferred = current;
    }
}

/// Validates and runs one scenario to completion.
pub fn run(sc: &Scenario) -> Result<RunOutput, SimError> {
    Ok(World::new(sc)?.finish())
}

/// Runs independent scenarios on the rayon pool; results keep input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<RunOutput, SimError>> {
    scenarios.par_iter().map(run).collect()
}
