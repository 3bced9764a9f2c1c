//! Reference fault supervisor: turns reports arriving over the service
//! network into a system-wide health map and draws dead-node inferences.

use std::collections::BTreeMap;
use std::fmt;

use crate::node::{Dims, NodeCoord, Quantity};
use crate::registers::{AlertState, Direction, HostComponent, TriState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    Link(Direction),
    Sensor(Quantity),
    DnpCore,
    Host,
    HostPart(HostComponent),
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Link(d) => write!(f, "link-{d}"),
            Component::Sensor(q) => f.write_str(q.label()),
            Component::DnpCore => f.write_str("dnp-core"),
            Component::Host => f.write_str("host"),
            Component::HostPart(c) => write!(f, "host-{}", c.label().replace('_', "-")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum HealthStatus {
    #[default]
    Normal,
    Warning,
    Alarm,
    Sick,
    Broken,
    Down,
}

impl HealthStatus {
    pub const fn label(self) -> &'static str {
        match self {
            HealthStatus::Normal => "NORMAL",
            HealthStatus::Warning => "WARNING",
            HealthStatus::Alarm => "ALARM",
            HealthStatus::Sick => "SICK",
            HealthStatus::Broken => "BROKEN",
            HealthStatus::Down => "DOWN",
        }
    }
}

impl From<TriState> for HealthStatus {
    fn from(t: TriState) -> Self {
        match t {
            TriState::Normal => HealthStatus::Normal,
            TriState::Sick => HealthStatus::Sick,
            TriState::Broken => HealthStatus::Broken,
        }
    }
}

impl From<AlertState> for HealthStatus {
    fn from(a: AlertState) -> Self {
        match a {
            AlertState::Normal => HealthStatus::Normal,
            AlertState::Warning => HealthStatus::Warning,
            AlertState::Alarm => HealthStatus::Alarm,
        }
    }
}

impl fmt::Display for HealthStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportKind {
    LinkStatus(Direction, TriState),
    SensorAlert(Quantity, AlertState),
    DnpCoreSick,
    DnpCoreMeltdown,
    HostComponent(HostComponent, TriState),
    HostDown,
    Heartbeat,
    AllClear(Component),
}

impl ReportKind {
    /// The component and status this report asserts; `None` for heartbeats.
    pub fn assertion(&self) -> Option<(Component, HealthStatus)> {
        Some(match *self {
            ReportKind::LinkStatus(d, s) => (Component::Link(d), s.into()),
            ReportKind::SensorAlert(q, a) => (Component::Sensor(q), a.into()),
            ReportKind::DnpCoreSick => (Component::DnpCore, HealthStatus::Sick),
            ReportKind::DnpCoreMeltdown => (Component::DnpCore, HealthStatus::Down),
            ReportKind::HostComponent(c, s) => (Component::HostPart(c), s.into()),
            ReportKind::HostDown => (Component::Host, HealthStatus::Down),
            ReportKind::AllClear(c) => (c, HealthStatus::Normal),
            ReportKind::Heartbeat => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Via {
    ServiceNet,
    MeshRelay,
}

impl Via {
    pub const fn label(self) -> &'static str {
        match self {
            Via::ServiceNet => "service-net",
            Via::MeshRelay => "mesh-relay",
        }
    }
}

/// Route a piece of diagnostic information took to reach the supervisor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticPath {
    /// DNP fault manager, then its own host, then the service network.
    DnpFmHostService,
    /// Host fault manager straight onto the service network.
    HostService,
    /// DNP over the mesh to a neighbour DNP, its host, then the service network.
    MeshRelay,
}

impl DiagnosticPath {
    pub const fn label(self) -> &'static str {
        match self {
            DiagnosticPath::DnpFmHostService => "dnpfm→host→service",
            DiagnosticPath::HostService => "host→service",
            DiagnosticPath::MeshRelay => "mesh-relay→service",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            DiagnosticPath::DnpFmHostService,
            DiagnosticPath::HostService,
            DiagnosticPath::MeshRelay,
        ]
        .into_iter()
        .find(|p| p.label() == s)
    }

    pub fn of(component: Component, via: Via) -> Self {
        match (via, component) {
            (Via::MeshRelay, _) => DiagnosticPath::MeshRelay,
            (Via::ServiceNet, Component::Link(_) | Component::Sensor(_)) => DiagnosticPath::DnpFmHostService,
            (Via::ServiceNet, _) => DiagnosticPath::HostService,
        }
    }
}

impl fmt::Display for DiagnosticPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Report {
    pub reporter: NodeCoord,
    pub subject: NodeCoord,
    pub kind: ReportKind,
    pub via: Via,
    pub time: u64,
}

impl Report {
    pub fn new(reporter: NodeCoord, subject: NodeCoord, kind: ReportKind, via: Via, time: u64) -> Self {
        Report {
            reporter,
            subject,
            kind,
            via,
            time,
        }
    }

    /// A node only speaks about another node when relaying mesh information.
    pub fn is_well_formed(&self) -> bool {
        self.via == Via::MeshRelay || self.subject == self.reporter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub reporter: NodeCoord,
    pub via: Via,
    pub path: DiagnosticPath,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.path, self.reporter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub status: HealthStatus,
    pub time: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeHealth {
    pub components: BTreeMap<Component, Entry>,
    pub last_heartbeat: Option<u64>,
}

/// An entry whose status changed as a result of ingesting a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Update {
    pub subject: NodeCoord,
    pub component: Component,
    pub previous: HealthStatus,
    pub entry: Entry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvidenceKind {
    /// The reporter's link on this port, which faces the subject, is broken.
    LinkBroken(Direction),
    HostDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Evidence {
    pub reporter: NodeCoord,
    pub kind: EvidenceKind,
    pub time: u64,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EvidenceKind::LinkBroken(d) => write!(f, "link-{d}@{}:{}", self.reporter, self.time),
            EvidenceKind::HostDown => write!(f, "host-down@{}:{}", self.reporter, self.time),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Inference {
    /// Silent and corroborated by at least one neighbour.
    NodeDead { node: NodeCoord, evidence: Vec<Evidence> },
    /// Silent, with nothing pointing at a dead node.
    SilentNode { node: NodeCoord },
}

impl Inference {
    pub fn node(&self) -> NodeCoord {
        match self {
            Inference::NodeDead { node, .. } | Inference::SilentNode { node } => *node,
        }
    }

    pub fn is_dead(&self) -> bool {
        matches!(self, Inference::NodeDead { .. })
    }
}

pub const DEFAULT_HEARTBEAT_PERIOD: u64 = 50;

/// The supervisor's systemic picture.
#[derive(Debug, Clone)]
pub struct HealthMap {
    dims: Dims,
    heartbeat_timeout: u64,
    nodes: BTreeMap<NodeCoord, NodeHealth>,
    evidence_log: Vec<Report>,
}

impl HealthMap {
    pub fn new(dims: Dims, heartbeat_timeout: u64) -> Self {
        HealthMap {
            dims,
            heartbeat_timeout,
            nodes: BTreeMap::new(),
            evidence_log: Vec::new(),
        }
    }

    pub fn heartbeat_timeout(&self) -> u64 {
        self.heartbeat_timeout
    }

    pub fn node(&self, c: NodeCoord) -> Option<&NodeHealth> {
        self.nodes.get(&c)
    }

    pub fn entry(&self, node: NodeCoord, component: Component) -> Option<&Entry> {
        self.nodes.get(&node)?.components.get(&component)
    }

    pub fn last_heartbeat(&self, node: NodeCoord) -> Option<u64> {
        self.nodes.get(&node)?.last_heartbeat
    }

    /// Every non-heartbeat report ever ingested, including superseded ones.
    pub fn evidence_log(&self) -> &[Report] {
        &self.evidence_log
    }

    /// Applies one report. Conflicts resolve latest-timestamp-wins; older
    /// reports are kept in the evidence log only. Returns the update when
    /// the subject's status changed.
    pub fn ingest(&mut self, r: Report) -> Option<Update> {
        if !r.is_well_formed() || !self.dims.contains(r.subject) {
            return None;
        }
        let node = self.nodes.entry(r.subject).or_default();
        let Some((component, status)) = r.kind.assertion() else {
            node.last_heartbeat = Some(node.last_heartbeat.map_or(r.time, |t| t.max(r.time)));
            return None;
        };
        self.evidence_log.push(r);
        let provenance = Provenance {
            reporter: r.reporter,
            via: r.via,
            path: DiagnosticPath::of(component, r.via),
        };
        let entry = Entry {
            status,
            time: r.time,
            provenance,
        };
        match node.components.get_mut(&component) {
            Some(old) if old.time > r.time => None,
            Some(old) => {
                let previous = old.status;
                *old = entry;
                (previous != status).then_some(Update {
                    subject: r.subject,
                    component,
                    previous,
                    entry,
                })
            }
            None => {
                node.components.insert(component, entry);
                (status != HealthStatus::Normal).then_some(Update {
                    subject: r.subject,
                    component,
                    previous: HealthStatus::Normal,
                    entry,
                })
            }
        }
    }

    fn is_silent(&self, node: NodeCoord, now: u64) -> bool {
        let last = self.last_heartbeat(node).unwrap_or(0);
        now.saturating_sub(last) > self.heartbeat_timeout
    }

    /// Corroborating evidence that `node` is dead: neighbours whose link
    /// toward it is broken, or a host-down entry about it.
    pub fn corroboration(&self, node: NodeCoord) -> Vec<Evidence> {
        let mut evidence = Vec::new();
        for d in Direction::ALL {
            let reporter = node.neighbor(self.dims, d);
            if reporter == node {
                continue;
            }
            let port = d.opposite();
            if let Some(e) = self.entry(reporter, Component::Link(port)) {
                if e.status == HealthStatus::Broken {
                    evidence.push(Evidence {
                        reporter,
                        kind: EvidenceKind::LinkBroken(port),
                        time: e.time,
                    });
                }
            }
        }
        if let Some(e) = self.entry(node, Component::Host) {
            if e.status == HealthStatus::Down {
                evidence.push(Evidence {
                    reporter: e.provenance.reporter,
                    kind: EvidenceKind::HostDown,
                    time: e.time,
                });
            }
        }
        evidence.sort();
        evidence.dedup();
        evidence
    }

    pub fn infer(&self, now: u64) -> Vec<Inference> {
        self.dims
            .coords()
            .filter(|n| self.is_silent(*n, now))
            .map(|node| {
                let evidence = self.corroboration(node);
                if evidence.is_empty() {
                    Inference::SilentNode { node }
                } else {
                    Inference::NodeDead { node, evidence }
                }
            })
            .collect()
    }

    pub fn snapshot(&self, now: u64) -> SystemHealthReport {
        let records = self
            .nodes
            .iter()
            .flat_map(|(node, h)| {
                h.components.iter().map(|(component, e)| HealthRecord {
                    node: *node,
                    component: *component,
                    status: e.status,
                    provenance: e.provenance,
                    time: e.time,
                })
            })
            .collect();
        SystemHealthReport {
            time: now,
            records,
            inferences: self.infer(now),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HealthRecord {
    pub node: NodeCoord,
    pub component: Component,
    pub status: HealthStatus,
    pub provenance: Provenance,
    pub time: u64,
}

/// Serializable view of the health map at one instant.
///
/// Text form: a `#` header, then one `node component status provenance time`
/// record per line, components first (node, component order), then
/// inferences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemHealthReport {
    pub time: u64,
    pub records: Vec<HealthRecord>,
    pub inferences: Vec<Inference>,
}

impl SystemHealthReport {
    pub fn is_all_healthy(&self) -> bool {
        self.inferences.is_empty() && self.records.iter().all(|r| r.status == HealthStatus::Normal)
    }

    pub fn record(&self, node: NodeCoord, component: Component) -> Option<&HealthRecord> {
        self.records.iter().find(|r| r.node == node && r.component == component)
    }

    pub fn dead_nodes(&self) -> impl Iterator<Item = &Inference> {
        self.inferences.iter().filter(|i| i.is_dead())
    }
}

impl fmt::Display for SystemHealthReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.is_all_healthy() {
            "all-healthy"
        } else {
            "degraded"
        };
        writeln!(f, "# lofamo health t={} {}", self.time, verdict)?;
        for r in &self.records {
            writeln!(f, "{} {} {} {} {}", r.node, r.component, r.status, r.provenance, r.time)?;
        }
        for inf in &self.inferences {
            match inf {
                Inference::NodeDead { node, evidence } => {
                    let ev: Vec<String> = evidence.iter().map(Evidence::to_string).collect();
                    writeln!(f, "{node} node DEAD {} {}", ev.join(","), self.time)?;
                }
                Inference::SilentNode { node } => {
                    writeln!(f, "{node} node SILENT - {}", self.time)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIMS: Dims = Dims::new(3, 3, 3);

    fn map() -> HealthMap {
        HealthMap::new(DIMS, 3 * DEFAULT_HEARTBEAT_PERIOD)
    }

    fn c(x: u32, y: u32, z: u32) -> NodeCoord {
        NodeCoord::new(x, y, z)
    }

    fn own(n: NodeCoord, kind: ReportKind, t: u64) -> Report {
        Report::new(n, n, kind, Via::ServiceNet, t)
    }

    fn heartbeats_all(hm: &mut HealthMap, t: u64, except: &[NodeCoord]) {
        for n in DIMS.coords().filter(|n| !except.contains(n)) {
            hm.ingest(own(n, ReportKind::Heartbeat, t));
        }
    }

    #[test]
    fn link_broken_entry() {
        let mut hm = map();
        let n = c(2, 0, 0);
        let up = hm
            .ingest(own(n, ReportKind::LinkStatus(Direction::XMinus, TriState::Broken), 30))
            .unwrap();
        assert_eq!(up.entry.status, HealthStatus::Broken);
        let e = hm.entry(n, Component::Link(Direction::XMinus)).unwrap();
        assert_eq!(e.provenance.path, DiagnosticPath::DnpFmHostService);
        assert_eq!(e.provenance.reporter, n);
    }

    #[test]
    fn mesh_relayed_host_down() {
        let mut hm = map();
        let r = Report::new(c(1, 1, 0), c(1, 1, 1), ReportKind::HostDown, Via::MeshRelay, 90);
        hm.ingest(r).unwrap();
        let e = hm.entry(c(1, 1, 1), Component::Host).unwrap();
        assert_eq!(e.status, HealthStatus::Down);
        assert_eq!(e.provenance.reporter, c(1, 1, 0));
        assert_eq!(e.provenance.path, DiagnosticPath::MeshRelay);
    }

    #[test]
    fn heartbeat_only_moves_time() {
        let mut hm = map();
        let n = c(0, 0, 0);
        assert!(hm.ingest(own(n, ReportKind::Heartbeat, 40)).is_none());
        assert_eq!(hm.last_heartbeat(n), Some(40));
        assert!(hm.node(n).unwrap().components.is_empty());
        assert!(hm.evidence_log().is_empty());
        // out-of-order heartbeat does not move time backwards
        hm.ingest(own(n, ReportKind::Heartbeat, 10));
        assert_eq!(hm.last_heartbeat(n), Some(40));
    }

    #[test]
    fn malformed_report_rejected() {
        let mut hm = map();
        let r = Report::new(c(0, 0, 0), c(1, 0, 0), ReportKind::HostDown, Via::ServiceNet, 1);
        assert!(!r.is_well_formed());
        assert!(hm.ingest(r).is_none());
        assert!(hm.node(c(1, 0, 0)).is_none());
    }

    #[test]
    fn latest_timestamp_wins() {
        let mut hm = map();
        let n = c(0, 1, 0);
        let k = |s| ReportKind::HostComponent(HostComponent::Memory, s);
        hm.ingest(own(n, k(TriState::Broken), 20));
        // older normal report arrives late and loses
        assert!(hm.ingest(own(n, k(TriState::Normal), 10)).is_none());
        let comp = Component::HostPart(HostComponent::Memory);
        assert_eq!(hm.entry(n, comp).unwrap().status, HealthStatus::Broken);
        assert_eq!(hm.evidence_log().len(), 2);
        hm.ingest(own(n, ReportKind::AllClear(comp), 30)).unwrap();
        assert_eq!(hm.entry(n, comp).unwrap().status, HealthStatus::Normal);
    }

    #[test]
    fn dead_node_needs_corroboration() {
        let mut hm = map();
        let dead = c(1, 1, 1);
        heartbeats_all(&mut hm, 10, &[]);
        heartbeats_all(&mut hm, 200, &[dead]);
        for d in Direction::ALL {
            let r = dead.neighbor(DIMS, d);
            hm.ingest(own(r, ReportKind::LinkStatus(d.opposite(), TriState::Broken), 120));
        }
        let inf = hm.infer(200);
        assert_eq!(inf.len(), 1);
        let Inference::NodeDead { node, evidence } = &inf[0] else {
            panic!("{inf:?}")
        };
        assert_eq!(*node, dead);
        assert_eq!(evidence.len(), 6);
    }

    #[test]
    fn silent_without_corroboration() {
        let mut hm = map();
        let n = c(0, 2, 1);
        heartbeats_all(&mut hm, 10, &[]);
        heartbeats_all(&mut hm, 200, &[n]);
        hm.ingest(Report::new(
            c(0, 1, 1),
            n,
            ReportKind::HostComponent(HostComponent::ServiceNet, TriState::Broken),
            Via::MeshRelay,
            60,
        ));
        assert_eq!(hm.infer(200), vec![Inference::SilentNode { node: n }]);
    }

    #[test]
    fn fresh_heartbeat_blocks_dead_inference() {
        let mut hm = map();
        let n = c(2, 2, 2);
        heartbeats_all(&mut hm, 100, &[]);
        hm.ingest(Report::new(c(1, 2, 2), n, ReportKind::HostDown, Via::MeshRelay, 100));
        assert!(hm.infer(250).is_empty());
        assert!(hm.infer(251).iter().any(|i| i.node() == n && i.is_dead()));
    }

    #[test]
    fn empty_snapshot_is_healthy() {
        let mut hm = map();
        heartbeats_all(&mut hm, 0, &[]);
        let s = hm.snapshot(100);
        assert!(s.is_all_healthy());
        assert_eq!(s.to_string(), "# lofamo health t=100 all-healthy\n");
    }

    #[test]
    fn snapshot_lists_distinct_provenance() {
        let mut hm = map();
        heartbeats_all(&mut hm, 0, &[]);
        hm.ingest(own(
            c(0, 0, 0),
            ReportKind::LinkStatus(Direction::XPlus, TriState::Sick),
            30,
        ));
        hm.ingest(own(
            c(2, 1, 0),
            ReportKind::LinkStatus(Direction::YMinus, TriState::Broken),
            31,
        ));
        let s = hm.snapshot(100);
        assert_eq!(
            s.to_string(),
            "# lofamo health t=100 degraded\n\
             (0,0,0) link-X+ SICK dnpfm→host→service@(0,0,0) 30\n\
             (2,1,0) link-Y- BROKEN dnpfm→host→service@(2,1,0) 31\n"
        );
        for line in s.to_string().lines().skip(1) {
            assert_eq!(line.split(' ').count(), 5);
        }
    }

    #[test]
    fn snapshot_dead_line() {
        let mut hm = map();
        let dead = c(1, 1, 1);
        hm.ingest(Report::new(c(1, 1, 0), dead, ReportKind::HostDown, Via::MeshRelay, 130));
        heartbeats_all(&mut hm, 390, &[dead]);
        let text = hm.snapshot(400).to_string();
        assert!(text.contains("(1,1,1) host DOWN mesh-relay→service@(1,1,0) 130\n"));
        assert!(text.contains("(1,1,1) node DEAD host-down@(1,1,0):130 400\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn coord() -> impl Strategy<Value = NodeCoord> {
            (0..3u32, 0..3u32, 0..3u32).prop_map(|(x, y, z)| c(x, y, z))
        }

        fn kind() -> impl Strategy<Value = ReportKind> {
            let tri = prop_oneof![Just(TriState::Normal), Just(TriState::Sick), Just(TriState::Broken)];
            prop_oneof![
                (0..6usize, tri).prop_map(|(d, s)| ReportKind::LinkStatus(Direction::from_index(d), s)),
                Just(ReportKind::HostDown),
                Just(ReportKind::Heartbeat),
                Just(ReportKind::Heartbeat),
            ]
        }

        fn report() -> impl Strategy<Value = Report> {
            (coord(), coord(), kind(), any::<bool>(), 0..500u64).prop_map(|(r, s, k, relay, t)| {
                if relay {
                    Report::new(r, s, k, Via::MeshRelay, t)
                } else {
                    Report::new(s, s, k, Via::ServiceNet, t)
                }
            })
        }

        proptest! {
            #[test]
            fn latest_timestamp_wins(reports in prop::collection::vec(report(), 1..60)) {
                let mut hm = map();
                for r in &reports {
                    hm.ingest(*r);
                }
                for r in &reports {
                    let Some((component, _)) = r.kind.assertion() else { continue };
                    let newest = reports
                        .iter()
                        .filter(|o| o.subject == r.subject && o.kind.assertion().map(|a| a.0) == Some(component))
                        .map(|o| o.time)
                        .max()
                        .unwrap();
                    let e = hm.entry(r.subject, component).unwrap();
                    prop_assert_eq!(e.time, newest);
                    let last_at_newest = reports
                        .iter()
                        .rev()
                        .find(|o| o.subject == r.subject && o.time == newest
                            && o.kind.assertion().map(|a| a.0) == Some(component))
                        .unwrap();
                    prop_assert_eq!(Some((component, e.status)), last_at_newest.kind.assertion());
                }
            }

            #[test]
            fn no_inference_while_heartbeat_fresh(
                reports in prop::collection::vec(report(), 0..80),
                now in 0..800u64,
            ) {
                let mut hm = map();
                for r in reports {
                    hm.ingest(r);
                }
                for inf in hm.infer(now) {
                    let last = hm.last_heartbeat(inf.node()).unwrap_or(0);
                    prop_assert!(now - last.min(now) > hm.heartbeat_timeout());
                    if let Inference::NodeDead { evidence, .. } = &inf {
                        prop_assert!(!evidence.is_empty());
                    }
                }
            }
        }
    }
}
